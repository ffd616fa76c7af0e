//! Adam training of the combiner under permutation-invariant assignment.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::combiner::{combiner_backward, fuse_item, BatchItem, CombinerConfig, CombinerParams};
use crate::error::{Error, Result};
use crate::metrics::{hungarian_assign, si_sdr_slices};
use crate::spectral::{stft, SpectralConfig, TimeSignal};
use crate::wav::{read_wav, write_wav, WavFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Instances per optimizer step.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub combiner: CombinerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 3,
            epochs: 30,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            combiner: CombinerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        let unit = 0.0..1.0;
        if !unit.contains(&self.beta1) || !unit.contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("Adam moments must lie in [0, 1) and epsilon > 0".into()));
        }
        self.combiner.validate()
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// One mixture with its sources and the two estimate families, aligned by
/// index: `det[i]` and `gen[i]` are estimates of the same (unknown) source.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub mixture: TimeSignal,
    pub sources: Vec<TimeSignal>,
    pub det: Vec<TimeSignal>,
    pub gen: Vec<TimeSignal>,
}

impl TrainExample {
    pub fn validate(&self) -> Result<()> {
        let c = self.sources.len();
        if c == 0 || self.det.len() != c || self.gen.len() != c {
            return Err(Error::InvalidInput(format!(
                "need matching non-empty source/estimate lists, got {}/{}/{}",
                c,
                self.det.len(),
                self.gen.len()
            )));
        }
        let n = self.mixture.len();
        if let Some(s) = self.sources.iter().chain(&self.det).chain(&self.gen).find(|s| s.len() != n) {
            return Err(Error::shape(format!("{n} samples"), format!("{}", s.len())));
        }
        Ok(())
    }

    /// Writes `mixture.wav`, `source_<i>.wav`, `det_<i>.wav`, `gen_<i>.wav`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_wav(dir.join("mixture.wav"), &self.mixture, WavFormat::Float32)?;
        for (name, list) in [("source", &self.sources), ("det", &self.det), ("gen", &self.gen)] {
            for (i, s) in list.iter().enumerate() {
                write_wav(dir.join(format!("{name}_{i}.wav")), s, WavFormat::Float32)?;
            }
        }
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mixture = read_wav(dir.join("mixture.wav"))?;
        let list = |name: &str| -> Result<Vec<TimeSignal>> {
            let mut out = Vec::new();
            loop {
                let path = dir.join(format!("{name}_{}.wav", out.len()));
                if !path.exists() {
                    return Ok(out);
                }
                out.push(read_wav(&path)?);
            }
        };
        let example = TrainExample {
            mixture,
            sources: list("source")?,
            det: list("det")?,
            gen: list("gen")?,
        };
        example.validate()?;
        Ok(example)
    }
}

/// Saves each example in its own numbered subdirectory.
pub fn save_dataset(examples: &[TrainExample], dir: impl AsRef<Path>) -> Result<()> {
    for (i, ex) in examples.iter().enumerate() {
        ex.save_dir(dir.as_ref().join(format!("{i:05}")))?;
    }
    Ok(())
}

/// Loads every subdirectory of `dir`, in name order.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<TrainExample>> {
    let dir = dir.as_ref();
    let mut subdirs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    subdirs.iter().map(TrainExample::load_dir).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Mean SI-SDR of the assigned estimates seen during the epoch, before
    /// each step.
    pub mean_si_sdr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: CombinerParams,
    pub log: Vec<EpochLog>,
}

struct Prepared {
    items: Vec<BatchItem>,
    sources: Vec<TimeSignal>,
}

fn prepare(dataset: &[TrainExample], cfg: &SpectralConfig) -> Result<Vec<Prepared>> {
    dataset
        .par_iter()
        .map(|ex| {
            ex.validate()?;
            let items = ex
                .det
                .iter()
                .zip(&ex.gen)
                .zip(&ex.sources)
                .map(|((d, g), s)| BatchItem::new(stft(d, cfg)?, stft(g, cfg)?, s.clone()))
                .collect::<Result<Vec<_>>>()?;
            Ok(Prepared {
                items,
                sources: ex.sources.clone(),
            })
        })
        .collect()
}

/// Fuses every estimate of `p`, assigns them to sources by Hungarian on
/// negative SI-SDR and returns the assigned items with their SI-SDRs.
fn assign(params: &CombinerParams, p: &Prepared) -> Result<(Vec<BatchItem>, Vec<f64>)> {
    let fused = p
        .items
        .iter()
        .map(|item| fuse_item(params, item))
        .collect::<Result<Vec<_>>>()?;
    let cost = p
        .sources
        .iter()
        .map(|s| {
            fused
                .iter()
                .map(|f| si_sdr_slices(s.samples(), f.samples()).map(|v| -v))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let perm = hungarian_assign(&cost)?.permutation;
    let mut items = Vec::with_capacity(perm.len());
    let mut values = Vec::with_capacity(perm.len());
    for (i, &j) in perm.iter().enumerate() {
        let mut item = p.items[j].clone();
        item.reference = p.sources[i].clone();
        items.push(item);
        values.push(-cost[i][j]);
    }
    Ok((items, values))
}

/// Mean SI-SDR over all sources of `dataset` after assignment.
pub fn dataset_si_sdr(params: &CombinerParams, dataset: &[TrainExample], cfg: &SpectralConfig) -> Result<f64> {
    let prepared = prepare(dataset, cfg)?;
    let values: Vec<Vec<f64>> = prepared
        .par_iter()
        .map(|p| assign(params, p).map(|(_, v)| v))
        .collect::<Result<_>>()?;
    let all: Vec<f64> = values.into_iter().flatten().collect();
    Ok(all.iter().sum::<f64>() / all.len() as f64)
}

/// Trains a freshly initialized combiner.
pub fn train_combiner(dataset: &[TrainExample], cfg: &SpectralConfig, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    let init = CombinerParams::init(&tcfg.combiner, tcfg.seed)?;
    train_from(init, dataset, cfg, tcfg)
}

/// Continues training from `params`.
pub fn train_from(
    mut params: CombinerParams,
    dataset: &[TrainExample],
    cfg: &SpectralConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    params.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let prepared = prepare(dataset, cfg)?;
    let mut flat = params.to_flat();
    let mut adam = Adam::new(flat.len(), tcfg);
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut log = Vec::with_capacity(tcfg.epochs);
    for epoch in 0..tcfg.epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        let mut values = Vec::new();
        for batch in order.chunks(tcfg.batch_size) {
            let assigned: Vec<(Vec<BatchItem>, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| assign(&params, &prepared[i]))
                .collect::<Result<_>>()?;
            let mut items = Vec::new();
            for (it, v) in assigned {
                items.extend(it);
                values.extend(v);
            }
            let (loss, grad) = combiner_backward(&items, &params, 1.0)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss {loss} at epoch {epoch}")));
            }
            losses.push(loss);
            adam.step(&mut flat, &grad.to_flat());
            params.set_flat(&flat)?;
        }
        log.push(EpochLog {
            epoch,
            mean_loss: losses.iter().sum::<f64>() / losses.len() as f64,
            mean_si_sdr: values.iter().sum::<f64>() / values.len() as f64,
        });
    }
    Ok(TrainOutcome { params, log })
}
