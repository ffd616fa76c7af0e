//! Separation quality metrics and estimate-to-source assignment.

mod assign;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::TimeSignal;

pub use assign::{hungarian_assign, pit_brute_force, AssignmentResult, PIT_MAX_SOURCES};

/// Ceiling reported for (near-)perfect reconstructions, and the matching floor.
pub const SDR_CAP_DB: f64 = 100.0;

/// Default segment width for error statistics.
pub const SEGMENT_SECONDS: f64 = 0.020;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("{} samples", a.len()), format!("{} samples", b.len())));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    Ok(())
}

fn variance(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = x.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    x.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

fn ratio_db(signal: f64, noise: f64) -> f64 {
    if noise <= 1e-20 * signal {
        return SDR_CAP_DB;
    }
    (10.0 * (signal / noise).log10()).clamp(-SDR_CAP_DB, SDR_CAP_DB)
}

/// `10 log10(Var(v) / Var(v - vbar))` with population variances.
pub fn sdr(v: &TimeSignal, vbar: &TimeSignal) -> Result<f64> {
    sdr_slices(v.samples(), vbar.samples())
}

pub fn sdr_slices(v: &[f64], vbar: &[f64]) -> Result<f64> {
    check_lengths(v, vbar)?;
    let var_v = variance(v.iter().copied());
    if var_v <= 0.0 {
        return Err(Error::InvalidInput("reference has zero variance".into()));
    }
    let var_e = variance(v.iter().zip(vbar).map(|(a, b)| a - b));
    Ok(ratio_db(var_v, var_e))
}

/// Scale-invariant SDR of `vbar` against reference `v`.
pub fn si_sdr(v: &TimeSignal, vbar: &TimeSignal) -> Result<f64> {
    si_sdr_slices(v.samples(), vbar.samples())
}

pub fn si_sdr_slices(v: &[f64], vbar: &[f64]) -> Result<f64> {
    si_sdr_with_grad(v, vbar, false).map(|(value, _)| value)
}

/// SI-SDR and, when `want_grad`, its derivative with respect to `vbar`.
///
/// With `a = <v, vbar>`, `S = ||v||^2` the value is
/// `10 log10(a^2 / (S ||vbar||^2 - a^2))`. The gradient is zero where the
/// value is clamped to the cap.
pub fn si_sdr_with_grad(v: &[f64], vbar: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
    check_lengths(v, vbar)?;
    let s: f64 = v.iter().map(|x| x * x).sum();
    let e: f64 = vbar.iter().map(|x| x * x).sum();
    if s <= 0.0 {
        return Err(Error::InvalidInput("reference is all zeros".into()));
    }
    if e <= 0.0 {
        return Err(Error::InvalidInput("estimate is all zeros".into()));
    }
    let a: f64 = v.iter().zip(vbar).map(|(x, y)| x * y).sum();
    let target = a * a / s;
    let residual = (e - target).max(0.0);
    let value = ratio_db(target, residual);
    let clamped = residual <= 1e-20 * target || value.abs() >= SDR_CAP_DB;
    if !want_grad || clamped {
        let grad = if want_grad { vec![0.0; vbar.len()] } else { Vec::new() };
        return Ok((value, grad));
    }
    // d/dvbar [10 log10 a^2 - 10 log10 (S e - a^2)]
    let q = s * e - a * a;
    let c = 10.0 / std::f64::consts::LN_10;
    let grad = v
        .iter()
        .zip(vbar)
        .map(|(x, y)| c * (2.0 * x / a - 2.0 * (s * y - a * x) / q))
        .collect();
    Ok((value, grad))
}

/// SI-SDR improvement of `vbar` over the unprocessed mixture `m`.
pub fn si_sdri(v: &TimeSignal, vbar: &TimeSignal, m: &TimeSignal) -> Result<f64> {
    Ok(si_sdr(v, vbar)? - si_sdr(v, m)?)
}

/// Mean squared error over consecutive non-overlapping segments of
/// `width_s` seconds; a trailing partial segment is dropped.
pub fn segment_mse(v: &TimeSignal, vbar: &TimeSignal, width_s: f64) -> Result<Vec<f64>> {
    check_lengths(v.samples(), vbar.samples())?;
    let width = (width_s * v.sample_rate() as f64).round() as usize;
    if width == 0 {
        return Err(Error::InvalidInput("segment width rounds to zero samples".into()));
    }
    if v.len() < width {
        return Err(Error::InvalidInput(format!(
            "{} samples is shorter than one {width}-sample segment",
            v.len()
        )));
    }
    Ok(v.samples()
        .chunks_exact(width)
        .zip(vbar.samples().chunks_exact(width))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / width as f64)
        .collect())
}

/// Log-spaced shared histogram of two segment-MSE populations.
#[derive(Debug, Clone, PartialEq)]
pub struct MseHistogram {
    pub edges: Vec<f64>,
    pub counts_det: Vec<usize>,
    pub counts_gen: Vec<usize>,
}

impl MseHistogram {
    pub const DEFAULT_BINS: usize = 50;

    /// Bins span the smallest positive to the largest observed value;
    /// values at or below the lower edge land in the first bin.
    pub fn new(det: &[f64], gen: &[f64], n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidInput("histogram needs at least one bin".into()));
        }
        let all = det.iter().chain(gen);
        let lo = all.clone().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(0.0, f64::max);
        let lo = if lo.is_finite() { lo } else { 1e-12 };
        let hi = if hi > lo { hi } else { lo * 10.0 };
        let (llo, lhi) = (lo.ln(), hi.ln());
        let edges: Vec<f64> = (0..=n_bins)
            .map(|i| (llo + (lhi - llo) * i as f64 / n_bins as f64).exp())
            .collect();
        let bin_of = |v: f64| -> usize {
            if v <= lo {
                return 0;
            }
            let t = (v.ln() - llo) / (lhi - llo);
            ((t * n_bins as f64) as usize).min(n_bins - 1)
        };
        let mut counts_det = vec![0; n_bins];
        let mut counts_gen = vec![0; n_bins];
        det.iter().for_each(|v| counts_det[bin_of(*v)] += 1);
        gen.iter().for_each(|v| counts_gen[bin_of(*v)] += 1);
        Ok(MseHistogram {
            edges,
            counts_det,
            counts_gen,
        })
    }

    /// CSV with columns `bin_left,bin_right,count_det,count_gen`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_left", "bin_right", "count_det", "count_gen"])?;
        for i in 0..self.counts_det.len() {
            w.write_record([
                self.edges[i].to_string(),
                self.edges[i + 1].to_string(),
                self.counts_det[i].to_string(),
                self.counts_gen[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// Segment errors of the deterministic and generative estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentErrorStats {
    pub det: Vec<f64>,
    pub gen: Vec<f64>,
    pub histogram: MseHistogram,
}

impl SegmentErrorStats {
    pub fn new(det: Vec<f64>, gen: Vec<f64>) -> Result<Self> {
        let histogram = MseHistogram::new(&det, &gen, MseHistogram::DEFAULT_BINS)?;
        Ok(SegmentErrorStats { det, gen, histogram })
    }

    pub fn mean_det(&self) -> f64 {
        mean(&self.det)
    }

    pub fn mean_gen(&self) -> f64 {
        mean(&self.gen)
    }

    pub fn wasserstein(&self) -> f64 {
        wasserstein1(&self.det, &self.gen)
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Earth mover's distance between two empirical distributions on the line:
/// the integral of `|F_a - F_b|`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let mut points: Vec<f64> = xa.iter().chain(&xb).copied().collect();
    points.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut total = 0.0;
    for w in points.windows(2) {
        while ia < xa.len() && xa[ia] <= w[0] {
            ia += 1;
        }
        while ib < xb.len() && xb[ib] <= w[0] {
            ib += 1;
        }
        total += (ia as f64 / na - ib as f64 / nb).abs() * (w[1] - w[0]);
    }
    total
}
