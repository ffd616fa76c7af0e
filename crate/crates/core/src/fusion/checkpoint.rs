//! JSON checkpoint container for [`CombinerParams`].
//!
//! ```text
//! {
//!   "format": "fusesep-combiner",
//!   "version": 1,
//!   "config_hash": "<sha256 of the compact config JSON, hex>",
//!   "config": { "hidden": [...], "leaky_slope": ..., "head_init_scale": ... },
//!   "layers": [ { "name": "trunk.0", "in_channels": 4, "out_channels": 8,
//!                 "kernel": [3, 3], "weight": [...], "bias": [...] }, ... ]
//! }
//! ```
//!
//! Weights are row-major `[out][in][dy][dx]`. Trunk layers come first, then
//! `magnitude_head` and `phase_head`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::combiner::{CombinerConfig, CombinerParams, ConvLayer};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "fusesep-combiner";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Layer {
    name: String,
    in_channels: usize,
    out_channels: usize,
    kernel: [usize; 2],
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Container {
    format: String,
    version: u32,
    config_hash: String,
    config: CombinerConfig,
    layers: Vec<Layer>,
}

fn config_hash(cfg: &CombinerConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn layer(name: String, l: &ConvLayer) -> Layer {
    Layer {
        name,
        in_channels: l.in_channels,
        out_channels: l.out_channels,
        kernel: [3, 3],
        weight: l.weight.clone(),
        bias: l.bias.clone(),
    }
}

fn unlayer(l: Layer, expect: &str) -> Result<ConvLayer> {
    if l.name != expect {
        return Err(Error::InvalidInput(format!("checkpoint layer {} where {expect} was expected", l.name)));
    }
    if l.kernel != [3, 3] {
        return Err(Error::shape("3x3 kernel", format!("{:?}", l.kernel)));
    }
    Ok(ConvLayer {
        in_channels: l.in_channels,
        out_channels: l.out_channels,
        weight: l.weight,
        bias: l.bias,
    })
}

pub fn save_checkpoint(params: &CombinerParams, path: impl AsRef<Path>) -> Result<()> {
    params.validate()?;
    let mut layers: Vec<Layer> = params
        .trunk
        .iter()
        .enumerate()
        .map(|(i, l)| layer(format!("trunk.{i}"), l))
        .collect();
    layers.push(layer("magnitude_head".into(), &params.magnitude_head));
    layers.push(layer("phase_head".into(), &params.phase_head));
    let container = Container {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config_hash: config_hash(&params.config)?,
        config: params.config.clone(),
        layers,
    };
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&container)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<CombinerParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let c: Container = serde_json::from_str(&text)?;
    if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
            c.format, c.version
        )));
    }
    if c.config_hash != config_hash(&c.config)? {
        return Err(Error::InvalidInput("checkpoint config hash does not match its config".into()));
    }
    let n_trunk = c.config.hidden.len();
    if c.layers.len() != n_trunk + 2 {
        return Err(Error::shape(format!("{} layers", n_trunk + 2), format!("{}", c.layers.len())));
    }
    let mut layers = c.layers.into_iter();
    let trunk = (0..n_trunk)
        .map(|i| unlayer(layers.next().expect("counted"), &format!("trunk.{i}")))
        .collect::<Result<Vec<_>>>()?;
    let magnitude_head = unlayer(layers.next().expect("counted"), "magnitude_head")?;
    let phase_head = unlayer(layers.next().expect("counted"), "phase_head")?;
    let params = CombinerParams {
        config: c.config,
        trunk,
        magnitude_head,
        phase_head,
    };
    params.validate()?;
    Ok(params)
}
