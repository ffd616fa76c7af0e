use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{stft, SpectralConfig, TimeSignal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    /// Upper edge in Hz; `None` means Nyquist.
    pub f_max: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_mels: 80,
            f_min: 0.0,
            f_max: None,
        }
    }
}

impl MelConfig {
    pub fn upper_edge(&self, cfg: &SpectralConfig) -> f64 {
        self.f_max.unwrap_or_else(|| cfg.nyquist())
    }

    /// Center frequencies (Hz) of the `n_mels` filters.
    pub fn centers(&self, cfg: &SpectralConfig) -> Vec<f64> {
        let edges = self.edges(cfg);
        edges[1..edges.len() - 1].to_vec()
    }

    fn edges(&self, cfg: &SpectralConfig) -> Vec<f64> {
        let lo = hz_to_mel(self.f_min);
        let hi = hz_to_mel(self.upper_edge(cfg));
        let n = self.n_mels + 1;
        (0..=n)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / n as f64))
            .collect()
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Non-negative mel-magnitude matrix, `n_mels x n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpec {
    pub data: Array2<f64>,
    pub signal_len: usize,
}

/// Triangular area-normalized filters, `n_mels x n_bins`.
pub fn mel_filterbank(cfg: &SpectralConfig, mcfg: &MelConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let f_max = mcfg.upper_edge(cfg);
    if mcfg.n_mels == 0 {
        return Err(Error::InvalidConfig("n_mels must be positive".into()));
    }
    if f_max > cfg.nyquist() + 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "f_max {f_max} Hz exceeds Nyquist {} Hz",
            cfg.nyquist()
        )));
    }
    if !(mcfg.f_min >= 0.0 && mcfg.f_min < f_max) {
        return Err(Error::InvalidConfig(format!(
            "mel band [{}, {f_max}] is empty",
            mcfg.f_min
        )));
    }
    let edges = mcfg.edges(cfg);
    let bins = cfg.n_bins();
    let mut fb = Array2::zeros((mcfg.n_mels, bins));
    for m in 0..mcfg.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let height = 2.0 / (hi - lo);
        for b in 0..bins {
            let f = cfg.bin_frequency(b);
            let w = if f > lo && f <= center {
                (f - lo) / (center - lo)
            } else if f > center && f < hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            fb[[m, b]] = height * w;
        }
        if fb.row(m).sum() <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mel filter {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin; use fewer mels or a larger n_fft"
            )));
        }
    }
    Ok(fb)
}

pub fn mel_spectrogram(x: &TimeSignal, cfg: &SpectralConfig, mcfg: &MelConfig) -> Result<MelSpec> {
    let fb = mel_filterbank(cfg, mcfg)?;
    let s = stft(x, cfg)?;
    Ok(MelSpec {
        data: fb.dot(&s.magnitude()),
        signal_len: x.len(),
    })
}

/// Linear magnitude estimate from a mel spectrogram: filterbank
/// pseudo-inverse followed by clamping at zero.
pub fn mel_to_magnitude(mel: &MelSpec, cfg: &SpectralConfig, mcfg: &MelConfig) -> Result<Array2<f64>> {
    let fb = mel_filterbank(cfg, mcfg)?;
    if mel.data.nrows() != mcfg.n_mels {
        return Err(Error::shape(
            format!("{} mel rows", mcfg.n_mels),
            format!("{} mel rows", mel.data.nrows()),
        ));
    }
    let (rows, cols) = fb.dim();
    let m = DMatrix::from_fn(rows, cols, |i, j| fb[[i, j]]);
    let pinv = m
        .pseudo_inverse(1e-10)
        .map_err(|e| Error::InvalidConfig(format!("filterbank pseudo-inverse failed: {e}")))?;
    let pinv = Array2::from_shape_fn((cols, rows), |(i, j)| pinv[(i, j)]);
    Ok(pinv.dot(&mel.data).mapv(|v| v.max(0.0)))
}
