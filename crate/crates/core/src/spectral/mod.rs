//! Windowed spectral transforms.
//!
//! Spectrograms are one-sided: a real signal framed with `n_fft` samples
//! produces `n_fft / 2 + 1` bins per frame, the non-negative half of the
//! full `n_fft`-point DFT. The negative-frequency half is the complex
//! conjugate mirror and is never stored.
//!
//! Framing is centered: the signal is reflect-padded by `n_fft / 2` on both
//! sides before slicing, so frame `k` is centered on sample `k * hop`.

mod griffin_lim;
mod mel;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use griffin_lim::{griffin_lim, griffin_lim_mel, griffin_lim_traced, magnitude_error};
pub use mel::{mel_filterbank, mel_spectrogram, mel_to_magnitude, hz_to_mel, mel_to_hz, MelConfig, MelSpec};

/// Analysis/synthesis window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            sample_rate: 8000,
            n_fft: 512,
            hop: 128,
            window: Window::Hann,
        }
    }
}

impl SpectralConfig {
    pub fn new(sample_rate: u32, n_fft: usize, hop: usize, window: Window) -> Result<Self> {
        let cfg = SpectralConfig {
            sample_rate,
            n_fft,
            hop,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hann window with a quarter-frame hop.
    pub fn hann(sample_rate: u32, n_fft: usize) -> Result<Self> {
        Self::new(sample_rate, n_fft, n_fft / 4, Window::Hann)
    }

    /// The configurations this crate is tuned and tested for: the 8 kHz
    /// default, a shorter and a 16 kHz Hann frame, and a half-overlap
    /// rectangular frame.
    pub fn presets() -> Vec<SpectralConfig> {
        vec![
            SpectralConfig::default(),
            SpectralConfig::new(8000, 256, 64, Window::Hann).expect("valid preset"),
            SpectralConfig::new(16000, 1024, 256, Window::Hann).expect("valid preset"),
            SpectralConfig::new(8000, 512, 256, Window::Rectangular).expect("valid preset"),
        ]
    }

    /// Checks framing constraints and that both the window and its square
    /// overlap-add to a constant at the configured hop.
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        if self.n_fft < 4 || self.n_fft % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "n_fft must be even and >= 4, got {}",
                self.n_fft
            )));
        }
        if self.hop == 0 || self.n_fft % self.hop != 0 {
            return Err(Error::InvalidConfig(format!(
                "hop {} must divide n_fft {}",
                self.hop, self.n_fft
            )));
        }
        if self.hop > self.n_fft / 2 {
            return Err(Error::InvalidConfig(format!(
                "hop {} exceeds n_fft / 2",
                self.hop
            )));
        }
        let w = self.window.coefficients(self.n_fft);
        for (label, power) in [("window", 1), ("squared window", 2)] {
            let sums: Vec<f64> = (0..self.hop)
                .map(|offset| {
                    (offset..self.n_fft)
                        .step_by(self.hop)
                        .map(|i| w[i].powi(power))
                        .sum()
                })
                .collect();
            let mean = sums.iter().sum::<f64>() / sums.len() as f64;
            let worst = sums.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
            if mean <= 0.0 || worst > 1e-10 * mean {
                return Err(Error::InvalidConfig(format!(
                    "{label} is not constant-overlap-add at hop {} (deviation {worst:e})",
                    self.hop
                )));
            }
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count produced by [`stft`] for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        1 + len / self.hop
    }

    /// Physical frequency in Hz of one-sided bin `bin`.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.n_fft as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    /// Number of samples in a segment of `seconds`.
    pub fn samples_for(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate as f64).round() as usize
    }
}

/// A mono sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl TimeSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("signal is empty".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("sample {i} is {}", samples[i])));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        Ok(TimeSignal {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn scaled(&self, gain: f64) -> TimeSignal {
        TimeSignal {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// One-sided complex spectrogram, `n_bins x n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Array2<Complex64>,
    config: SpectralConfig,
    signal_len: usize,
}

impl Spectrogram {
    pub fn new(data: Array2<Complex64>, config: SpectralConfig, signal_len: usize) -> Result<Self> {
        config.validate()?;
        let (bins, frames) = data.dim();
        if bins != config.n_bins() {
            return Err(Error::shape(format!("{} bins", config.n_bins()), format!("{bins} bins")));
        }
        if frames == 0 {
            return Err(Error::InvalidInput("spectrogram has no frames".into()));
        }
        if frames != config.n_frames(signal_len) {
            return Err(Error::shape(
                format!("{} frames for {signal_len} samples", config.n_frames(signal_len)),
                format!("{frames} frames"),
            ));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("spectrogram entry".into()));
        }
        Ok(Spectrogram {
            data,
            config,
            signal_len,
        })
    }

    pub fn zeros(config: &SpectralConfig, signal_len: usize) -> Result<Self> {
        let data = Array2::zeros((config.n_bins(), config.n_frames(signal_len)));
        Self::new(data, config.clone(), signal_len)
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn n_bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|z| z.norm())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Same geometry, different contents. The caller guarantees the shape.
    pub(crate) fn with_data(&self, data: Array2<Complex64>) -> Spectrogram {
        debug_assert_eq!(data.dim(), self.data.dim());
        Spectrogram {
            data,
            config: self.config.clone(),
            signal_len: self.signal_len,
        }
    }

    /// Errors unless `other` was produced with the same config and length.
    pub fn check_compatible(&self, other: &Spectrogram) -> Result<()> {
        if self.config != other.config {
            return Err(Error::InvalidInput("spectrogram configs differ".into()));
        }
        if self.dim() != other.dim() || self.signal_len != other.signal_len {
            return Err(Error::shape(
                format!("{:?} / {} samples", self.dim(), self.signal_len),
                format!("{:?} / {} samples", other.dim(), other.signal_len),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Spectrogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Spectrogram({} bins x {} frames, n_fft={}, hop={})",
            self.n_bins(),
            self.n_frames(),
            self.config.n_fft,
            self.config.hop
        )
    }
}

/// Planned transforms for one config. Framing here is uncentered; the
/// public [`stft`] / [`istft`] add the reflect padding and cropping.
pub(crate) struct FrameTransform {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FrameTransform {
    pub(crate) fn new(cfg: &SpectralConfig) -> Self {
        let mut planner = FftPlanner::new();
        FrameTransform {
            n_fft: cfg.n_fft,
            hop: cfg.hop,
            window: cfg.window.coefficients(cfg.n_fft),
            forward: planner.plan_fft_forward(cfg.n_fft),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
        }
    }

    pub(crate) fn frames_for(&self, padded_len: usize) -> usize {
        1 + (padded_len - self.n_fft) / self.hop
    }

    pub(crate) fn synthesis_len(&self, frames: usize) -> usize {
        (frames - 1) * self.hop + self.n_fft
    }

    /// Windowed DFT of every full frame of `x`.
    pub(crate) fn analyze(&self, x: &[f64]) -> Array2<Complex64> {
        let n = self.n_fft;
        let frames = self.frames_for(x.len());
        let bins = n / 2 + 1;
        let mut out = Array2::zeros((bins, frames));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for k in 0..frames {
            let start = k * self.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(x[start + i] * self.window[i], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for b in 0..bins {
                out[[b, k]] = buf[b];
            }
        }
        out
    }

    /// Real inverse DFT of one one-sided column, imaginary parts of the DC
    /// and Nyquist bins ignored.
    pub(crate) fn inverse_frame(
        &self,
        column: impl Iterator<Item = Complex64>,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        let n = self.n_fft;
        let half = n / 2;
        for (b, z) in column.enumerate() {
            if b == 0 || b == half {
                buf[b] = Complex64::new(z.re, 0.0);
            } else {
                buf[b] = z;
                buf[n - b] = z.conj();
            }
        }
        self.inverse.process_with_scratch(buf, scratch);
        let scale = 1.0 / n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Windowed overlap-add of the inverse DFTs of `spec`, and the matching
    /// per-sample window-square sum.
    pub(crate) fn overlap_add(&self, spec: &Array2<Complex64>) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_fft;
        let frames = spec.ncols();
        let mut acc = vec![0.0; self.synthesis_len(frames)];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for k in 0..frames {
            self.inverse_frame(spec.column(k).iter().copied(), &mut buf, &mut scratch);
            let start = k * self.hop;
            for i in 0..n {
                acc[start + i] += buf[i].re * self.window[i];
            }
        }
        (acc, self.window_square_sum(frames))
    }

    /// Weighted overlap-add: the least-squares signal whose windowed frames
    /// best match the inverse DFTs of `spec`.
    pub(crate) fn synthesize(&self, spec: &Array2<Complex64>) -> Vec<f64> {
        let (mut acc, wss) = self.overlap_add(spec);
        for (a, w) in acc.iter_mut().zip(&wss) {
            *a = if *w > WSS_FLOOR { *a / w } else { 0.0 };
        }
        acc
    }

    /// Per-sample sum of squared windows over `frames` frames.
    pub(crate) fn window_square_sum(&self, frames: usize) -> Vec<f64> {
        let mut wss = vec![0.0; self.synthesis_len(frames)];
        for k in 0..frames {
            let start = k * self.hop;
            for i in 0..self.n_fft {
                wss[start + i] += self.window[i] * self.window[i];
            }
        }
        wss
    }

    /// Adjoint of [`FrameTransform::synthesize`]: maps a gradient on the
    /// synthesized signal to `dL/dRe + i dL/dIm` on every spectrogram entry.
    pub(crate) fn synthesize_adjoint(&self, grad: &[f64], frames: usize) -> Array2<Complex64> {
        let n = self.n_fft;
        let half = n / 2;
        debug_assert_eq!(grad.len(), self.synthesis_len(frames));
        let wss = self.window_square_sum(frames);
        let scaled: Vec<f64> = grad
            .iter()
            .zip(&wss)
            .map(|(g, w)| if *w > WSS_FLOOR { g / w } else { 0.0 })
            .collect();
        let mut out = Array2::zeros((half + 1, frames));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for k in 0..frames {
            let start = k * self.hop;
            for i in 0..n {
                buf[i] = Complex64::new(scaled[start + i] * self.window[i], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for b in 0..=half {
                // interior bins appear twice in the Hermitian extension
                let c = if b == 0 || b == half { 1.0 } else { 2.0 };
                out[[b, k]] = buf[b] * (c / n as f64);
            }
        }
        out
    }
}

pub(crate) const WSS_FLOOR: f64 = 1e-10;

pub(crate) fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((0..pad).map(|i| x[n - 2 - i]));
    out
}

/// Centered short-time Fourier transform of `x`.
pub fn stft(x: &TimeSignal, cfg: &SpectralConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    if x.sample_rate() != cfg.sample_rate {
        return Err(Error::InvalidInput(format!(
            "signal sample rate {} does not match config {}",
            x.sample_rate(),
            cfg.sample_rate
        )));
    }
    if x.len() < cfg.n_fft {
        return Err(Error::InvalidInput(format!(
            "signal of {} samples is shorter than one frame ({})",
            x.len(),
            cfg.n_fft
        )));
    }
    let transform = FrameTransform::new(cfg);
    let padded = reflect_pad(x.samples(), cfg.n_fft / 2);
    let data = transform.analyze(&padded);
    debug_assert_eq!(data.ncols(), cfg.n_frames(x.len()));
    Ok(Spectrogram {
        data,
        config: cfg.clone(),
        signal_len: x.len(),
    })
}

/// Inverse of [`stft`] by weighted overlap-add.
pub fn istft(s: &Spectrogram, cfg: &SpectralConfig) -> Result<TimeSignal> {
    if s.config() != cfg {
        return Err(Error::InvalidInput(
            "spectrogram was produced with a different config".into(),
        ));
    }
    let transform = FrameTransform::new(cfg);
    Ok(TimeSignal {
        samples: crop_centered(&transform.synthesize(&s.data), cfg, s.signal_len),
        sample_rate: cfg.sample_rate,
    })
}

/// Gradient of a loss on `istft(s)` with respect to the entries of `s`,
/// given the gradient `grad` on the output samples.
pub(crate) fn istft_adjoint(grad: &[f64], cfg: &SpectralConfig, frames: usize) -> Array2<Complex64> {
    let transform = FrameTransform::new(cfg);
    let pad = cfg.n_fft / 2;
    let mut padded = vec![0.0; transform.synthesis_len(frames)];
    padded[pad..pad + grad.len()].copy_from_slice(grad);
    transform.synthesize_adjoint(&padded, frames)
}

pub(crate) fn crop_centered(padded: &[f64], cfg: &SpectralConfig, len: usize) -> Vec<f64> {
    let pad = cfg.n_fft / 2;
    padded[pad..pad + len].to_vec()
}

/// Quadrant-aware complex angle in `(-pi, pi]`, with `angle(0) = 0`.
pub fn angle(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(len: usize, seed: u64) -> TimeSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TimeSignal::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000).unwrap()
    }

    #[test]
    fn config_rejects_bad_hops() {
        assert!(SpectralConfig::new(8000, 512, 100, Window::Hann).is_err());
        assert!(SpectralConfig::new(8000, 512, 256, Window::Hann).is_err(), "hann at n/2 is COLA but w^2 is not");
        assert!(SpectralConfig::new(8000, 512, 128, Window::Hann).is_ok());
        assert!(SpectralConfig::new(8000, 512, 256, Window::Rectangular).is_ok());
        assert!(SpectralConfig::new(8000, 511, 1, Window::Rectangular).is_err());
    }

    #[test]
    fn zeros_give_zero_spectrogram() {
        let cfg = SpectralConfig::default();
        let x = TimeSignal::zeros(8000, 8000).unwrap();
        let s = stft(&x, &cfg).unwrap();
        assert!(s.data().iter().all(|z| z.norm() == 0.0));
        assert_eq!(s.n_frames(), cfg.n_frames(8000));
        let y = istft(&s, &cfg).unwrap();
        assert!(y.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn too_short_signal_is_rejected() {
        let cfg = SpectralConfig::default();
        let x = TimeSignal::zeros(511, 8000).unwrap();
        assert!(matches!(stft(&x, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn bin_centered_sine_with_rectangular_window_stays_in_its_bin() {
        // A sinusoid completing exactly k cycles per frame has a single
        // non-zero DFT coefficient under a rectangular window.
        let cfg = SpectralConfig::new(8000, 64, 32, Window::Rectangular).unwrap();
        let k = 5;
        let x: Vec<f64> = (0..640)
            .map(|n| (2.0 * PI * k as f64 * n as f64 / 64.0).sin())
            .collect();
        let s = stft(&TimeSignal::new(x, 8000).unwrap(), &cfg).unwrap();
        // interior frames only; the reflected edges break periodicity
        for frame in 2..s.n_frames() - 2 {
            let col = s.data().column(frame);
            let peak = col[k].norm();
            assert_abs_diff_eq!(peak, 32.0, epsilon = 1e-9);
            for (b, z) in col.iter().enumerate() {
                if b != k {
                    assert!(z.norm() <= 1e-10 * peak, "bin {b} leaked {}", z.norm());
                }
            }
        }
    }

    #[test]
    fn impulse_at_frame_center_has_flat_magnitude() {
        let cfg = SpectralConfig::default();
        let mut x = vec![0.0; 4096];
        let frame = 10;
        x[frame * cfg.hop] = 1.0;
        let s = stft(&TimeSignal::new(x, 8000).unwrap(), &cfg).unwrap();
        // the frame centered on the impulse sees w[n/2] = 1 at the center
        let col = s.data().column(frame);
        for z in col.iter() {
            assert_abs_diff_eq!(z.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = SpectralConfig::default();
        for seed in 0..5 {
            let x = random_signal(5000 + seed as usize * 37, seed);
            let y = istft(&stft(&x, &cfg).unwrap(), &cfg).unwrap();
            assert_eq!(x.len(), y.len());
            let err = x
                .samples()
                .iter()
                .zip(y.samples())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 1e-6 * x.peak(), "seed {seed}: {err}");
        }
    }

    #[test]
    fn istft_rejects_foreign_config() {
        let cfg = SpectralConfig::default();
        let other = SpectralConfig::hann(8000, 256).unwrap();
        let s = stft(&random_signal(2048, 1), &cfg).unwrap();
        assert!(matches!(istft(&s, &other), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constant_frame_rotation_shifts_phase_and_preserves_energy() {
        // Bin-centered partials away from DC and Nyquist rotate exactly.
        let cfg = SpectralConfig::default();
        let len = 8192;
        let partials = [(7usize, 0.8, 0.3), (23, 0.5, 1.1), (61, 0.3, -2.0)];
        let tone = |theta: f64| -> Vec<f64> {
            (0..len)
                .map(|n| {
                    partials
                        .iter()
                        .map(|&(k, a, phi)| {
                            a * (2.0 * PI * k as f64 * n as f64 / 512.0 + phi - theta).cos()
                        })
                        .sum()
                })
                .collect()
        };
        let theta = 0.7;
        let x = TimeSignal::new(tone(0.0), 8000).unwrap();
        let s = stft(&x, &cfg).unwrap();
        let rotated = s.with_data(s.data().mapv(|z| z * Complex64::from_polar(1.0, -theta)));
        assert_abs_diff_eq!(rotated.norm(), s.norm(), epsilon = 1e-9 * s.norm());
        let y = istft(&rotated, &cfg).unwrap();
        let expected = tone(theta);
        // interior: a whole number of periods of every partial
        let (lo, hi) = (512, 512 + 7 * 512);
        let mut max_err = 0.0f64;
        for n in lo..hi {
            max_err = max_err.max((y.samples()[n] - expected[n]).abs());
        }
        assert!(max_err < 1e-9, "{max_err}");
        let e_in: f64 = x.samples()[lo..hi].iter().map(|v| v * v).sum();
        let e_out: f64 = y.samples()[lo..hi].iter().map(|v| v * v).sum();
        assert!(((e_out - e_in) / e_in).abs() <= 1e-9);
    }

    #[test]
    fn angle_quadrants() {
        assert_eq!(angle(Complex64::new(1.0, 0.0)), 0.0);
        assert_abs_diff_eq!(angle(Complex64::new(0.0, 1.0)), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(angle(Complex64::new(-1.0, -1.0)), -3.0 * PI / 4.0, epsilon = 1e-15);
        assert_eq!(angle(Complex64::new(-1.0, -0.0)), PI);
        assert_eq!(angle(Complex64::new(-1.0, 0.0)), PI);
        assert_eq!(angle(Complex64::new(0.0, 0.0)), 0.0);
        assert_eq!(angle(Complex64::new(-0.0, -0.0)), 0.0);
    }
    #[test]
    fn istft_adjoint_matches_inner_products() {
        // <g, istft(S)> = sum Re(conj(A) S) for A = istft_adjoint(g)
        let cfg = SpectralConfig::hann(8000, 16).unwrap();
        let len = 37;
        let frames = cfg.n_frames(len);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let adj = istft_adjoint(&g, &cfg, frames);
        for _ in 0..5 {
            let data = Array2::from_shape_fn((cfg.n_bins(), frames), |_| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let s = Spectrogram::new(data.clone(), cfg.clone(), len).unwrap();
            let y = istft(&s, &cfg).unwrap();
            let lhs: f64 = g.iter().zip(y.samples()).map(|(a, b)| a * b).sum();
            let rhs: f64 = adj.iter().zip(data.iter()).map(|(a, z)| (a.conj() * z).re).sum();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }
}
