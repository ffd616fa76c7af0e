//! Synthetic mixtures, estimate simulators and the benchmark runner.
//!
//! Sources are harmonic tones under a per-20 ms Laplace amplitude envelope.
//! The deterministic simulator adds interference leakage and short bursts
//! of interfering content; the generative simulator re-synthesizes the
//! deterministic estimate from its mel spectrogram with a phase-blind
//! Griffin-Lim and adds white noise.

mod bench;

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::TrainExample;
use crate::spectral::{griffin_lim_mel, mel_spectrogram, MelConfig, SpectralConfig, TimeSignal};

pub use bench::{
    calibrate_parity, dump_instance_wavs, run_benchmark, write_parity_json, BenchReport, InstanceRow, ParityReport,
    Runtime, Strategy, StrategySummary,
};

/// Width of the segments the envelope and MSE statistics are drawn on.
pub const SEGMENT_S: f64 = 0.020;
/// Length of one burst artifact.
pub const BURST_S: f64 = 0.010;

/// Harmonic source generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    pub n_harmonics: usize,
    /// Harmonic `h` has amplitude `h^-rolloff`.
    pub rolloff: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            f0_min: 120.0,
            f0_max: 360.0,
            n_harmonics: 3,
            rolloff: 2.0,
        }
    }
}

/// Deterministic-separator simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetSim {
    /// Level of the summed interferers relative to the target, dB;
    /// `-inf` disables leakage.
    pub leakage_db: f64,
    /// Expected bursts per second.
    pub burst_rate: f64,
    /// Amplitude of the interfering content inside a burst.
    pub burst_gain: f64,
}

impl Default for DetSim {
    fn default() -> Self {
        DetSim {
            leakage_db: -15.0,
            burst_rate: 2.0,
            burst_gain: 0.5,
        }
    }
}

/// Generative-vocoder simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSim {
    /// Variance of the added white noise.
    pub sigma2: f64,
    pub griffin_lim_iters: usize,
}

impl Default for GenSim {
    fn default() -> Self {
        GenSim {
            sigma2: 1e-3,
            griffin_lim_iters: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n_sources: usize,
    pub n_instances: usize,
    pub duration_s: f64,
    /// Range of pairwise source-to-source level differences, dB.
    pub snr_range_db: [f64; 2],
    pub source: SourceConfig,
    pub det_sim: DetSim,
    pub gen_sim: GenSim,
    pub spectral: SpectralConfig,
    pub mel: MelConfig,
    /// Ridge weight of the oracle combiner.
    pub oracle_lambda: f64,
    /// Histogram bins for the segment MSE comparison.
    pub mse_bins: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_sources: 2,
            n_instances: 50,
            duration_s: 1.0,
            snr_range_db: [0.0, 5.0],
            source: SourceConfig::default(),
            det_sim: DetSim::default(),
            gen_sim: GenSim::default(),
            spectral: SpectralConfig::default(),
            mel: MelConfig::default(),
            oracle_lambda: 0.0,
            mse_bins: crate::metrics::MseHistogram::DEFAULT_BINS,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sources < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 sources, got {}", self.n_sources)));
        }
        if self.n_instances == 0 {
            return Err(Error::InvalidConfig("n_instances must be positive".into()));
        }
        let [lo, hi] = self.snr_range_db;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("snr range [{lo}, {hi}] must satisfy 0 <= lo <= hi")));
        }
        let s = &self.source;
        if !(s.f0_min > 0.0 && s.f0_max > s.f0_min) || s.n_harmonics == 0 {
            return Err(Error::InvalidConfig("source f0 range and harmonic count must be positive".into()));
        }
        if s.f0_max * s.n_harmonics as f64 >= self.spectral.nyquist() {
            return Err(Error::InvalidConfig("highest harmonic must stay below Nyquist".into()));
        }
        let d = &self.det_sim;
        if d.leakage_db.is_nan() || d.leakage_db == f64::INFINITY || d.burst_rate < 0.0 || !d.burst_gain.is_finite() {
            return Err(Error::InvalidConfig("invalid deterministic simulator parameters".into()));
        }
        if !(self.gen_sim.sigma2 >= 0.0) || self.gen_sim.griffin_lim_iters == 0 {
            return Err(Error::InvalidConfig("sigma2 must be >= 0 and griffin_lim_iters >= 1".into()));
        }
        if !(self.oracle_lambda >= 0.0) {
            return Err(Error::InvalidConfig("oracle_lambda must be >= 0".into()));
        }
        if self.mse_bins == 0 {
            return Err(Error::InvalidConfig("mse_bins must be positive".into()));
        }
        self.spectral.validate()?;
        if self.signal_len() < self.spectral.n_fft {
            return Err(Error::InvalidConfig("duration shorter than one STFT frame".into()));
        }
        Ok(())
    }

    pub fn signal_len(&self) -> usize {
        self.spectral.samples_for(self.duration_s)
    }
}

fn sample_laplace(rng: &mut ChaCha8Rng) -> f64 {
    // inverse CDF of the unit-scale Laplace
    let u: f64 = rng.random_range(-0.5..0.5);
    -u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn normalize(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        let s = var.sqrt();
        for v in x.iter_mut() {
            *v = (*v - mean) / s;
        }
    }
}

/// `n` independent unit-variance harmonic sources of `len` samples.
///
/// Fundamentals are spread over `[f0_min, f0_max]` (one jittered slot per
/// source, slots shuffled). The amplitude envelope takes an independent
/// `|Laplace|` value per 20 ms segment, interpolated linearly between
/// segment centers.
pub fn gen_sources(n: usize, len: usize, sample_rate: u32, scfg: &SourceConfig, seed: u64) -> Result<Vec<TimeSignal>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 sources, got {n}")));
    }
    if len == 0 {
        return Err(Error::InvalidInput("sources need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (scfg.f0_max - scfg.f0_min) / n as f64;
    let mut slots: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        slots.swap(i, rng.random_range(0..=i));
    }
    let fs = sample_rate as f64;
    let seg = ((SEGMENT_S * fs).round() as usize).max(1);
    let n_seg = len.div_ceil(seg) + 1;
    (0..n)
        .map(|i| {
            let f0 = scfg.f0_min + width * (slots[i] as f64 + rng.random_range(0.2..0.8));
            let phases: Vec<f64> = (0..scfg.n_harmonics).map(|_| rng.random_range(-PI..PI)).collect();
            let env: Vec<f64> = (0..n_seg).map(|_| sample_laplace(&mut rng).abs()).collect();
            let mut x: Vec<f64> = (0..len)
                .map(|t| {
                    // envelope value k sits at the center of segment k
                    let pos = (t as f64 + 0.5) / seg as f64 - 0.5;
                    let k = pos.floor().max(0.0) as usize;
                    let frac = (pos - k as f64).clamp(0.0, 1.0);
                    let e = env[k] * (1.0 - frac) + env[(k + 1).min(n_seg - 1)] * frac;
                    let tt = t as f64 / fs;
                    let carrier: f64 = phases
                        .iter()
                        .enumerate()
                        .map(|(h, p)| {
                            let h = (h + 1) as f64;
                            h.powf(-scfg.rolloff) * (2.0 * PI * f0 * h * tt + p).sin()
                        })
                        .sum();
                    e * carrier
                })
                .collect();
            normalize(&mut x);
            TimeSignal::new(x, sample_rate)
        })
        .collect()
}

/// `sum g_i v_i` and the scaled sources `g_i v_i`.
pub fn mix_with_gains(sources: &[TimeSignal], gains: &[f64]) -> Result<(TimeSignal, Vec<TimeSignal>)> {
    if sources.len() < 2 {
        return Err(Error::InvalidInput("a mixture needs at least two sources".into()));
    }
    if gains.len() != sources.len() {
        return Err(Error::shape(format!("{} gains", sources.len()), format!("{}", gains.len())));
    }
    let len = sources[0].len();
    let rate = sources[0].sample_rate();
    if let Some(s) = sources.iter().find(|s| s.len() != len || s.sample_rate() != rate) {
        return Err(Error::shape(format!("{len} samples at {rate} Hz"), format!("{} at {}", s.len(), s.sample_rate())));
    }
    let scaled: Vec<TimeSignal> = sources.iter().zip(gains).map(|(s, g)| s.scaled(*g)).collect();
    let mut m = vec![0.0; len];
    for s in &scaled {
        for (a, b) in m.iter_mut().zip(s.samples()) {
            *a += b;
        }
    }
    Ok((TimeSignal::new(m, rate)?, scaled))
}

/// Gains `10^(-u_i / 20)` with `u_0 = 0` and `u_i` uniform in
/// `snr_range_db`, so every source pair differs by at most the range width
/// and source 0 is at most `hi` dB above any other.
pub fn draw_gains(n: usize, snr_range_db: [f64; 2], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = snr_range_db;
    (0..n)
        .map(|i| {
            if i == 0 {
                1.0
            } else {
                let u = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                10f64.powf(-u / 20.0)
            }
        })
        .collect()
}

/// Mixture at random levels; returns `(mixture, gains)`.
pub fn mix(sources: &[TimeSignal], snr_range_db: [f64; 2], seed: u64) -> Result<(TimeSignal, Vec<f64>)> {
    let gains = draw_gains(sources.len(), snr_range_db, seed);
    let (m, _) = mix_with_gains(sources, &gains)?;
    Ok((m, gains))
}

/// `v_i + leak * sum_{j != i} v_j` plus rectangular 10 ms bursts of
/// `burst_gain * sum_{j != i} v_j`. Burst count per source is Poisson with
/// mean `burst_rate * duration`.
pub fn simulate_deterministic(sources: &[TimeSignal], mixture: &TimeSignal, det: &DetSim, seed: u64) -> Result<Vec<TimeSignal>> {
    let len = mixture.len();
    if let Some(s) = sources.iter().find(|s| s.len() != len) {
        return Err(Error::shape(format!("{len} samples"), format!("{}", s.len())));
    }
    let rate = mixture.sample_rate();
    let leak = if det.leakage_db == f64::NEG_INFINITY { 0.0 } else { 10f64.powf(det.leakage_db / 20.0) };
    let burst_len = ((BURST_S * rate as f64).round() as usize).clamp(1, len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: Vec<f64> = (0..len).map(|t| sources.iter().map(|s| s.samples()[t]).sum()).collect();
    sources
        .iter()
        .map(|s| {
            let v = s.samples();
            let interf: Vec<f64> = total.iter().zip(v).map(|(m, x)| m - x).collect();
            let mut out: Vec<f64> = v.iter().zip(&interf).map(|(x, i)| x + leak * i).collect();
            let expected = det.burst_rate * mixture.duration();
            let count = poisson(expected, &mut rng);
            for _ in 0..count {
                let start = rng.random_range(0..=len - burst_len);
                for t in start..start + burst_len {
                    out[t] += det.burst_gain * interf[t];
                }
            }
            TimeSignal::new(out, rate)
        })
        .collect()
}

/// Knuth's multiplication method; fine for the small means used here.
fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let limit = (-mean).exp();
    let mut p = 1.0;
    let mut k = 0;
    loop {
        p *= rng.random_range(0.0..1.0);
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

/// `griffin_lim(mel(v_d)) + N(0, sigma2)`, same length as `vd`.
///
/// The Griffin-Lim phase and the noise come from independent streams of
/// `seed`, so changing `sigma2` leaves the Griffin-Lim part unchanged.
pub fn simulate_generative(
    vd: &TimeSignal,
    gen: &GenSim,
    cfg: &SpectralConfig,
    mcfg: &MelConfig,
    seed: u64,
) -> Result<TimeSignal> {
    if !(gen.sigma2 >= 0.0) {
        return Err(Error::InvalidConfig(format!("sigma2 must be >= 0, got {}", gen.sigma2)));
    }
    let mel = mel_spectrogram(vd, cfg, mcfg)?;
    let y = griffin_lim_mel(&mel, cfg, mcfg, gen.griffin_lim_iters, seed)?;
    if gen.sigma2 == 0.0 {
        return Ok(y);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise = Normal::new(0.0, gen.sigma2.sqrt()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let out = y.samples().iter().map(|v| v + noise.sample(&mut rng)).collect();
    TimeSignal::new(out, y.sample_rate())
}

/// Everything generated for one benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub mixture: TimeSignal,
    /// Sources as they appear in the mixture (gains applied).
    pub references: Vec<TimeSignal>,
    pub gains: Vec<f64>,
    pub det: Vec<TimeSignal>,
    pub gen: Vec<TimeSignal>,
}

impl Instance {
    pub fn into_example(self) -> TrainExample {
        TrainExample {
            mixture: self.mixture,
            sources: self.references,
            det: self.det,
            gen: self.gen,
        }
    }
}

/// Derived seeds for the independent random streams of one instance.
fn stream(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(k)
}

/// Generates, mixes and simulates one instance from `seed`.
pub fn simulate_instance(cfg: &BenchConfig, seed: u64) -> Result<Instance> {
    cfg.validate()?;
    let len = cfg.signal_len();
    let rate = cfg.spectral.sample_rate;
    let sources = gen_sources(cfg.n_sources, len, rate, &cfg.source, stream(seed, 1))?;
    let gains = draw_gains(cfg.n_sources, cfg.snr_range_db, stream(seed, 2));
    let (mixture, references) = mix_with_gains(&sources, &gains)?;
    let det = simulate_deterministic(&references, &mixture, &cfg.det_sim, stream(seed, 3))?;
    let gen = det
        .iter()
        .enumerate()
        .map(|(i, d)| simulate_generative(d, &cfg.gen_sim, &cfg.spectral, &cfg.mel, stream(seed, 10 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance {
        mixture,
        references,
        gains,
        det,
        gen,
    })
}

/// `n` training examples with seeds disjoint from the benchmark's
/// `seed + index` scheme when `seed` differs.
pub fn make_training_set(cfg: &BenchConfig, n: usize, seed: u64) -> Result<Vec<TrainExample>> {
    use rayon::prelude::*;
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_instance(cfg, seed.wrapping_add(i)).map(Instance::into_example))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{segment_mse, si_sdr};
    use crate::spectral::{magnitude_error, stft};

    fn kurtosis(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
        x.iter().map(|a| (a - m).powi(4)).sum::<f64>() / n / (v * v)
    }

    fn sources(n: usize, seed: u64) -> Vec<TimeSignal> {
        gen_sources(n, 8000, 8000, &SourceConfig::default(), seed).unwrap()
    }

    #[test]
    fn sources_are_reproducible_unit_variance_and_super_gaussian() {
        let a = sources(3, 1);
        assert_eq!(a, sources(3, 1));
        assert_ne!(a, sources(3, 2));
        for s in &a {
            let var = s.energy() / s.len() as f64;
            assert!((var - 1.0).abs() < 1e-9);
            assert!(kurtosis(s.samples()) > 3.0, "{}", kurtosis(s.samples()));
        }
    }

    #[test]
    fn sources_are_nearly_uncorrelated() {
        for seed in 0..5 {
            let s = sources(5, seed);
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    let dot: f64 = s[i].samples().iter().zip(s[j].samples()).map(|(a, b)| a * b).sum();
                    let corr = dot / s[i].len() as f64;
                    assert!(corr.abs() <= 0.05, "seed {seed} ({i},{j}): {corr}");
                }
            }
        }
    }

    #[test]
    fn too_few_sources_are_rejected() {
        assert!(gen_sources(1, 100, 8000, &SourceConfig::default(), 0).is_err());
        let s = sources(2, 0);
        assert!(mix(&s[..1], [0.0, 5.0], 0).is_err());
        assert!(mix_with_gains(&s, &[1.0]).is_err());
    }

    #[test]
    fn unit_gains_add_variances() {
        let s = sources(2, 3);
        let (m, scaled) = mix_with_gains(&s, &[1.0, 1.0]).unwrap();
        assert_eq!(scaled, s);
        let var = m.energy() / m.len() as f64;
        assert!((var - 2.0).abs() <= 0.1, "{var}");
    }

    #[test]
    fn gains_respect_the_level_range() {
        for seed in 0..20 {
            let g = draw_gains(5, [0.0, 5.0], seed);
            for a in &g {
                for b in &g {
                    let db = 20.0 * (a / b).log10();
                    assert!(db.abs() <= 5.0 + 1e-9);
                }
            }
        }
        let s = sources(2, 0);
        assert_eq!(mix(&s, [0.0, 5.0], 4).unwrap(), mix(&s, [0.0, 5.0], 4).unwrap());
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let a = TimeSignal::zeros(10, 8000).unwrap();
        let b = TimeSignal::zeros(11, 8000).unwrap();
        assert!(mix_with_gains(&[a.clone(), b.clone()], &[1.0, 1.0]).is_err());
        assert!(simulate_deterministic(&[a.clone(), b], &a, &DetSim::default(), 0).is_err());
    }

    #[test]
    fn clean_deterministic_simulation_is_exact() {
        let s = sources(2, 5);
        let (m, _) = mix_with_gains(&s, &[1.0, 1.0]).unwrap();
        let det = DetSim {
            leakage_db: f64::NEG_INFINITY,
            burst_rate: 0.0,
            burst_gain: 1.0,
        };
        assert_eq!(simulate_deterministic(&s, &m, &det, 0).unwrap(), s);
    }

    #[test]
    fn leakage_sets_the_sdr() {
        let s = sources(2, 6);
        let (m, _) = mix_with_gains(&s, &[1.0, 1.0]).unwrap();
        let det = DetSim {
            leakage_db: -20.0,
            burst_rate: 0.0,
            burst_gain: 0.0,
        };
        for (v, d) in s.iter().zip(simulate_deterministic(&s, &m, &det, 0).unwrap()) {
            let sdr = si_sdr(v, &d).unwrap();
            assert!((sdr - 20.0).abs() <= 0.5, "{sdr}");
        }
    }

    #[test]
    fn bursts_fatten_the_error_tail() {
        let s = sources(2, 7);
        let (m, _) = mix_with_gains(&s, &[1.0, 1.0]).unwrap();
        let calm = DetSim {
            leakage_db: -20.0,
            burst_rate: 0.0,
            burst_gain: 0.0,
        };
        let bursty = DetSim {
            burst_rate: 5.0,
            burst_gain: 1.0,
            ..calm.clone()
        };
        let q99 = |det: &DetSim| {
            let d = simulate_deterministic(&s, &m, det, 3).unwrap();
            let mut e = segment_mse(&s[0], &d[0], SEGMENT_S).unwrap();
            e.sort_by(f64::total_cmp);
            (e[e.len() - 1], crate::metrics::median(&e))
        };
        let (calm_max, calm_med) = q99(&calm);
        let (burst_max, burst_med) = q99(&bursty);
        assert!(burst_max > 10.0 * calm_max, "{burst_max} vs {calm_max}");
        assert!(burst_med < 2.0 * calm_med);
    }

    #[test]
    fn generative_output_keeps_magnitude_but_not_phase() {
        let cfg = SpectralConfig::default();
        let mcfg = MelConfig::default();
        let s = sources(2, 8);
        let gen = GenSim {
            sigma2: 0.0,
            griffin_lim_iters: 64,
        };
        let y = simulate_generative(&s[0], &gen, &cfg, &mcfg, 1).unwrap();
        assert_eq!(y.len(), s[0].len());
        assert_eq!(y, simulate_generative(&s[0], &gen, &cfg, &mcfg, 1).unwrap());
        let target = stft(&s[0], &cfg).unwrap();
        let out = stft(&y, &cfg).unwrap();
        let err = magnitude_error(out.data(), &target.magnitude());
        assert!(err <= 0.3, "{err}");
        // waveforms are far apart even though magnitudes agree
        let diff: f64 = y.samples().iter().zip(s[0].samples()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(diff > 0.3 * s[0].energy());
    }

    #[test]
    fn generative_noise_has_the_requested_variance() {
        let cfg = SpectralConfig::default();
        let mcfg = MelConfig::default();
        let s = sources(2, 9);
        let quiet = GenSim {
            sigma2: 0.0,
            griffin_lim_iters: 4,
        };
        let loud = GenSim { sigma2: 1.0, ..quiet.clone() };
        let a = simulate_generative(&s[0], &quiet, &cfg, &mcfg, 2).unwrap();
        let b = simulate_generative(&s[0], &loud, &cfg, &mcfg, 2).unwrap();
        let mse = segment_mse(&a, &b, SEGMENT_S).unwrap();
        let mean = crate::metrics::mean(&mse);
        assert!((mean - 1.0).abs() <= 0.1, "{mean}");
    }

    #[test]
    fn config_validation() {
        assert!(BenchConfig::default().validate().is_ok());
        let bad = |f: fn(&mut BenchConfig)| {
            let mut c = BenchConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.n_sources = 1));
        assert!(bad(|c| c.n_instances = 0));
        assert!(bad(|c| c.snr_range_db = [3.0, 1.0]));
        assert!(bad(|c| c.gen_sim.griffin_lim_iters = 0));
        assert!(bad(|c| c.duration_s = 0.01));
        assert!(bad(|c| c.source.n_harmonics = 20));
    }

    #[test]
    fn instances_are_reproducible() {
        let cfg = BenchConfig {
            duration_s: 0.25,
            ..Default::default()
        };
        let a = simulate_instance(&cfg, 3).unwrap();
        assert_eq!(a, simulate_instance(&cfg, 3).unwrap());
        assert_eq!(a.det.len(), 2);
        assert_eq!(a.gen[1].len(), a.mixture.len());
    }
}
