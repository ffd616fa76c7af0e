use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The most a phase-blind generative estimate can add to the deterministic
/// bound, in dB.
pub const GENERATIVE_GAIN_DB: f64 = 3.0;

/// Beyond this many noise standard deviations the Gaussian factor is below
/// `exp(-72)` and is skipped.
const BAND_SIGMAS: f64 = 12.0;

/// Uniform-grid composite Simpson quadrature for the Laplace/AWGN integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Source support is truncated to `[-x_max, x_max]`.
    pub x_max: f64,
    /// Output support extends `tail_sigmas` noise deviations past `x_max`.
    pub tail_sigmas: f64,
    /// Minimum number of intervals across the source support.
    pub min_points: usize,
    /// Grid points per noise standard deviation, for small noise.
    pub points_per_sigma: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            x_max: 10.0,
            tail_sigmas: 8.0,
            min_points: 400,
            points_per_sigma: 8.0,
        }
    }
}

impl QuadratureSpec {
    /// Same bounds, half the grid step.
    pub fn refined(&self) -> Self {
        QuadratureSpec {
            min_points: self.min_points * 2,
            points_per_sigma: self.points_per_sigma * 2.0,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0) || !(self.tail_sigmas > 0.0) {
            return Err(Error::InvalidConfig("quadrature bounds must be positive".into()));
        }
        if self.min_points < 400 {
            return Err(Error::InvalidConfig(format!(
                "grid too coarse: {} points per axis (need >= 400)",
                self.min_points
            )));
        }
        if self.points_per_sigma < 4.0 {
            return Err(Error::InvalidConfig(format!(
                "grid too coarse: {} points per noise deviation (need >= 4)",
                self.points_per_sigma
            )));
        }
        Ok(())
    }
}

/// Composite Simpson nodes and weights on `[-half_width, half_width]`
/// with `intervals` (even) intervals.
fn simpson_grid(half_width: f64, intervals: usize) -> (Vec<f64>, Vec<f64>) {
    debug_assert!(intervals % 2 == 0);
    let h = 2.0 * half_width / intervals as f64;
    let nodes = (0..=intervals).map(|i| -half_width + i as f64 * h).collect();
    let weights = (0..=intervals)
        .map(|i| {
            let c = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Unit-variance Laplace density, scale `1/sqrt(2)`.
fn laplace_pdf(x: f64) -> f64 {
    (-SQRT_2 * x.abs()).exp() / SQRT_2
}

/// Differential entropy of the unit-variance Laplace source, `1 + ln(sqrt 2)`.
pub fn laplace_entropy() -> f64 {
    1.0 + SQRT_2.ln()
}

/// `I(x; x + n)` for unit-variance Laplace `x` and Gaussian `n` with
/// variance `sigma2`, by direct double integration of
/// `p(x, v) log(p(x, v) / (p(x) p(v)))`.
pub fn mi_laplace_awgn(sigma2: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!("noise variance must be positive, got {sigma2}")));
    }
    quad.validate()?;
    let sigma = sigma2.sqrt();
    let step = (2.0 * quad.x_max / quad.min_points as f64).min(sigma / quad.points_per_sigma);
    // multiple of 4 keeps x = 0 (the Laplace kink) on a panel boundary
    let nx = {
        let n = (2.0 * quad.x_max / step).ceil() as usize;
        n.div_ceil(4) * 4
    };
    let v_max = quad.x_max + quad.tail_sigmas * sigma;
    let nv = {
        let n = (2.0 * v_max / step).ceil() as usize;
        n.div_ceil(2) * 2
    };
    let (xs, wx) = simpson_grid(quad.x_max, nx);
    let (vs, wv) = simpson_grid(v_max, nv);
    let hx = 2.0 * quad.x_max / nx as f64;
    let px: Vec<f64> = xs.iter().map(|&x| laplace_pdf(x)).collect();
    let log_norm = -0.5 * (2.0 * PI * sigma2).ln();
    let band = BAND_SIGMAS * sigma;

    let total: f64 = vs
        .par_iter()
        .zip(wv.par_iter())
        .map(|(&v, &w_v)| {
            let lo = (((v - band + quad.x_max) / hx).floor().max(0.0)) as usize;
            let hi = ((((v + band + quad.x_max) / hx).ceil()) as usize).min(nx);
            if lo > hi {
                return 0.0;
            }
            // p(v) on the same grid keeps the integrand's marginal consistent
            let mut p_v = 0.0;
            for i in lo..=hi {
                let d = v - xs[i];
                p_v += wx[i] * px[i] * (log_norm - d * d / (2.0 * sigma2)).exp();
            }
            if p_v <= 0.0 {
                return 0.0;
            }
            let log_pv = p_v.ln();
            let mut acc = 0.0;
            for i in lo..=hi {
                let d = v - xs[i];
                let log_cond = log_norm - d * d / (2.0 * sigma2);
                acc += wx[i] * px[i] * log_cond.exp() * (log_cond - log_pv);
            }
            w_v * acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total.max(0.0))
}

/// Mutual information between one source and a mixture of `n_sources`
/// unit-variance sources, with the interferers replaced by Gaussian noise
/// of the same total variance.
pub fn default_mi_ref(n_sources: usize, quad: &QuadratureSpec) -> Result<f64> {
    if n_sources < 2 {
        return Err(Error::InvalidInput("a mixture needs at least two sources".into()));
    }
    mi_laplace_awgn((n_sources - 1) as f64, quad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPoint {
    pub sigma2: f64,
    /// `I(x; x + n)` at this noise level, nats.
    pub mi: f64,
    pub rho: f64,
}

/// `min(1, I(sigma2) / mi_ref)`.
pub fn rho(sigma2: f64, mi_ref: f64, quad: &QuadratureSpec) -> Result<RhoPoint> {
    if !(mi_ref > 0.0) || !mi_ref.is_finite() {
        return Err(Error::InvalidInput(format!("mi_ref must be positive, got {mi_ref}")));
    }
    let mi = mi_laplace_awgn(sigma2, quad)?;
    Ok(RhoPoint {
        sigma2,
        mi,
        rho: (mi / mi_ref).min(1.0),
    })
}

/// [`rho`] over a strictly increasing noise grid; the result is checked to
/// be non-increasing.
pub fn rho_curve(grid: &[f64], mi_ref: f64, quad: &QuadratureSpec) -> Result<Vec<RhoPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty sigma2 grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("sigma2 grid must be strictly increasing".into()));
    }
    let points = grid
        .iter()
        .map(|&s| rho(s, mi_ref, quad))
        .collect::<Result<Vec<_>>>()?;
    if let Some(w) = points.windows(2).find(|w| w[1].rho > w[0].rho) {
        return Err(Error::NonFinite(format!(
            "rho increased from {} to {} between sigma2 {} and {}",
            w[0].rho, w[1].rho, w[0].sigma2, w[1].sigma2
        )));
    }
    Ok(points)
}

/// CSV with columns `sigma2,mi_nats,rho`.
pub fn write_rho_csv<W: Write>(points: &[RhoPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sigma2", "mi_nats", "rho"])?;
    for p in points {
        w.write_record([p.sigma2.to_string(), p.mi.to_string(), p.rho.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes a matplotlib script that plots the curve stored in `csv_name`
/// (resolved relative to the script's directory).
pub fn write_plot_script(path: impl AsRef<Path>, csv_name: &str) -> Result<()> {
    let script = format!(
        r#"#!/usr/bin/env python3
# Plots rho against the vocoder noise variance.
import csv, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "{csv_name}"))))
s = [float(r["sigma2"]) for r in rows]
rho = [float(r["rho"]) for r in rows]
plt.semilogx(s, rho, marker="o")
plt.xlabel("noise variance")
plt.ylabel("rho")
plt.ylim(0, 1.05)
plt.grid(True, which="both", alpha=0.3)
plt.savefig(os.path.join(here, "rho_curve.png"), dpi=150)
"#
    );
    let path = path.as_ref();
    std::fs::write(path, script).map_err(|e| Error::io(path, e))
}

/// Inputs to the segment-based SDR bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    /// Signal length in samples.
    pub signal_len: f64,
    /// Segment width in samples.
    pub segment_width: f64,
    /// Source variance.
    pub var_v: f64,
    /// Per-segment mutual information between mixture and source, used as
    /// a dimensionless factor.
    pub mi_ref: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.signal_len, self.segment_width, self.var_v, self.mi_ref];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("bound inputs must be finite".into()));
        }
        if !(self.segment_width > 0.0) || self.signal_len < self.segment_width {
            return Err(Error::InvalidInput(format!(
                "need signal_len >= segment_width > 0, got {} / {}",
                self.signal_len, self.segment_width
            )));
        }
        if !(self.var_v > 0.0) {
            return Err(Error::InvalidInput("source variance must be positive".into()));
        }
        if self.mi_ref < 0.0 {
            return Err(Error::InvalidInput("mutual information must be non-negative".into()));
        }
        Ok(())
    }

    fn argument(&self) -> f64 {
        self.signal_len / self.segment_width * self.var_v * self.mi_ref
    }
}

/// `10 log10((L / w) Var(v) I)`.
pub fn classical_sdr_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let arg = b.argument();
    if !(arg > 0.0) {
        return Err(Error::InvalidInput(format!("bound argument {arg} is not positive")));
    }
    Ok(10.0 * arg.log10())
}

/// The classical bound plus [`GENERATIVE_GAIN_DB`].
pub fn generative_sdr_bound(b: &BoundInputs) -> Result<f64> {
    Ok(classical_sdr_bound(b)? + GENERATIVE_GAIN_DB)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub classical_db: f64,
    pub generative_db: f64,
    pub rho: Vec<RhoPoint>,
}

impl BoundReport {
    pub fn new(inputs: BoundInputs, rho: Vec<RhoPoint>) -> Result<Self> {
        Ok(BoundReport {
            classical_db: classical_sdr_bound(&inputs)?,
            generative_db: generative_sdr_bound(&inputs)?,
            inputs,
            rho,
        })
    }
}
