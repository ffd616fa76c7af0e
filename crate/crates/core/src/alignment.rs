//! Relative-phase features and cross-correlation alignment.
//!
//! Delay convention: a positive delay means the generative spectrogram lags
//! the deterministic one. The phasor `exp(+j 2 pi f t)` advances it back.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{angle, istft, FrameTransform, Spectrogram, TimeSignal};

/// `psi[0] = angle(Vd)`, `psi[1] = angle(Vg * conj(Vd))`; shape `2 x bins x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFeatures {
    pub psi: Array3<f64>,
}

/// `a[0] = |Vd|`, `a[1] = |Vg|`; shape `2 x bins x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeFeatures {
    pub a: Array3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Per-frame sample offsets of the generative estimate.
    pub delays: Vec<i64>,
    /// Unit-modulus compensation factors, `bins x frames`.
    pub phasors: Array2<Complex64>,
}

pub fn phase_features(vd: &Spectrogram, vg: &Spectrogram) -> Result<PhaseFeatures> {
    vd.check_compatible(vg)?;
    let (bins, frames) = vd.dim();
    let mut psi = Array3::zeros((2, bins, frames));
    Zip::indexed(vd.data()).and(vg.data()).for_each(|(b, k), d, g| {
        psi[[0, b, k]] = angle(*d);
        psi[[1, b, k]] = angle(g * d.conj());
    });
    Ok(PhaseFeatures { psi })
}

pub fn magnitude_features(vd: &Spectrogram, vg: &Spectrogram) -> Result<MagnitudeFeatures> {
    vd.check_compatible(vg)?;
    let (bins, frames) = vd.dim();
    let mut a = Array3::zeros((2, bins, frames));
    Zip::indexed(vd.data()).and(vg.data()).for_each(|(b, k), d, g| {
        a[[0, b, k]] = d.norm();
        a[[1, b, k]] = g.norm();
    });
    Ok(MagnitudeFeatures { a })
}

/// Frequency-domain cross-correlation `Vd * conj(Vg)`.
pub fn xcorr_spectrum(vd: &Spectrogram, vg: &Spectrogram) -> Result<Spectrogram> {
    vd.check_compatible(vg)?;
    let mut r = vd.data().clone();
    Zip::from(&mut r).and(vg.data()).for_each(|r, g| *r *= g.conj());
    Ok(vd.with_data(r))
}

/// Per-frame lag of the cross-correlation peak.
///
/// Lags are searched over `(-n_fft/2, n_fft/2)`. Exact ties go to the
/// smallest magnitude, then to the negative lag, so an all-zero
/// cross-spectrum yields zero delays.
pub fn estimate_delays(r: &Spectrogram) -> Vec<i64> {
    let cfg = r.config();
    let n = cfg.n_fft;
    let half = n / 2;
    let transform = FrameTransform::new(cfg);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    (0..r.n_frames())
        .map(|k| {
            // conj(R) = conj(Vd) Vg correlates so that a lag of Vg peaks at +lag
            transform.inverse_frame(r.data().column(k).iter().map(|z| z.conj()), &mut buf, &mut scratch);
            let mut best: Option<(f64, i64)> = None;
            for (idx, v) in buf.iter().enumerate() {
                if idx == half {
                    continue;
                }
                let lag = if idx < half { idx as i64 } else { idx as i64 - n as i64 };
                let value = v.re;
                best = match best {
                    None => Some((value, lag)),
                    Some((bv, bl)) => {
                        let better = value > bv
                            || (value == bv && (lag.abs() < bl.abs() || (lag.abs() == bl.abs() && lag < bl)));
                        if better {
                            Some((value, lag))
                        } else {
                            Some((bv, bl))
                        }
                    }
                };
            }
            best.map(|(_, lag)| lag).unwrap_or(0)
        })
        .collect()
}

/// `T[b, k] = exp(j 2 pi f_b t_k)` with `f_b` the bin frequency and `t_k`
/// the frame delay in seconds.
pub fn delay_phasors(delays: &[i64], cfg: &crate::spectral::SpectralConfig) -> Result<Array2<Complex64>> {
    let half = (cfg.n_fft / 2) as i64;
    if let Some(d) = delays.iter().find(|d| d.abs() >= half) {
        return Err(Error::InvalidInput(format!(
            "delay {d} outside (-{half}, {half})"
        )));
    }
    let sr = cfg.sample_rate as f64;
    Ok(Array2::from_shape_fn((cfg.n_bins(), delays.len()), |(b, k)| {
        let seconds = delays[k] as f64 / sr;
        Complex64::from_polar(1.0, 2.0 * PI * cfg.bin_frequency(b) * seconds)
    }))
}

/// Cross-correlation alignment of `vg` onto `vd`.
pub fn align(vd: &Spectrogram, vg: &Spectrogram) -> Result<AlignmentResult> {
    let r = xcorr_spectrum(vd, vg)?;
    let delays = estimate_delays(&r);
    let phasors = delay_phasors(&delays, vd.config())?;
    Ok(AlignmentResult { delays, phasors })
}

/// `T * Vg` for a precomputed alignment.
pub fn apply_alignment(vg: &Spectrogram, alignment: &AlignmentResult) -> Result<Spectrogram> {
    if alignment.phasors.dim() != vg.dim() {
        return Err(Error::shape(
            format!("{:?}", vg.dim()),
            format!("{:?}", alignment.phasors.dim()),
        ));
    }
    Ok(vg.with_data(vg.data() * &alignment.phasors))
}

/// Alignment-only fusion: `istft(Vd + T * Vg)` with unit weights.
pub fn xcorr_fuse(vd: &Spectrogram, vg: &Spectrogram) -> Result<TimeSignal> {
    let alignment = align(vd, vg)?;
    let aligned = apply_alignment(vg, &alignment)?;
    let fused = vd.with_data(vd.data() + aligned.data());
    istft(&fused, vd.config())
}
