//! Dual-head convolutional combiner with a hand-written backward pass.
//!
//! Tensors are stored channel-major as flat `Vec<f64>` of
//! `channels x bins x frames`. All convolutions are 3x3 with zero padding,
//! so every layer keeps the tile grid.

use ndarray::Array3;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_fusion, fused_spectrogram, weights_from_heads, FusionWeights};
use crate::alignment::{magnitude_features, phase_features, MagnitudeFeatures, PhaseFeatures};
use crate::error::{Error, Result};
use crate::metrics::si_sdr_with_grad;
use crate::spectral::{istft, istft_adjoint, Spectrogram, TimeSignal};

/// `log1p |Vd|`, `log1p |Vg|`, `angle Vd`, `angle(Vg conj Vd)`.
pub const INPUT_CHANNELS: usize = 4;
/// Each head emits one channel for `alpha` and one for `beta`.
pub const HEAD_CHANNELS: usize = 2;
const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombinerConfig {
    /// Output channels of each trunk layer.
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    /// Multiplier on the head weight initialization.
    pub head_init_scale: f64,
}

impl Default for CombinerConfig {
    fn default() -> Self {
        CombinerConfig {
            hidden: vec![8, 8, 16],
            leaky_slope: 0.01,
            head_init_scale: 0.01,
        }
    }
}

impl CombinerConfig {
    /// Five trunk layers plus the head projection.
    pub fn paper() -> Self {
        CombinerConfig {
            hidden: vec![32, 32, 64, 64, 64],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("trunk layers need at least one channel".into()));
        }
        if !self.leaky_slope.is_finite() || !self.head_init_scale.is_finite() {
            return Err(Error::InvalidConfig("combiner hyperparameters must be finite".into()));
        }
        Ok(())
    }

    fn trunk_width(&self) -> usize {
        self.hidden.last().copied().unwrap_or(INPUT_CHANNELS)
    }
}

/// One 3x3 convolution, weights indexed `[out][in][dy][dx]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    fn zeros(in_channels: usize, out_channels: usize) -> Self {
        ConvLayer {
            in_channels,
            out_channels,
            weight: vec![0.0; out_channels * in_channels * TAPS],
            bias: vec![0.0; out_channels],
        }
    }

    fn uniform(in_channels: usize, out_channels: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Self::zeros(in_channels, out_channels);
        let bound = scale.abs() / ((in_channels * TAPS) as f64).sqrt();
        if bound == 0.0 {
            return layer;
        }
        for w in &mut layer.weight {
            *w = rng.random_range(-bound..bound);
        }
        layer
    }

    fn check(&self) -> Result<()> {
        if self.weight.len() != self.out_channels * self.in_channels * TAPS
            || self.bias.len() != self.out_channels
        {
            return Err(Error::shape(
                format!("{}x{}x3x3 weights", self.out_channels, self.in_channels),
                format!("{} weights, {} biases", self.weight.len(), self.bias.len()),
            ));
        }
        if self.weight.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("combiner parameter".into()));
        }
        Ok(())
    }

    /// `out = bias + conv(input)`.
    fn forward(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let hw = h * w;
        let mut out = vec![0.0; self.out_channels * hw];
        for (o, out_o) in out.chunks_exact_mut(hw).enumerate() {
            out_o.fill(self.bias[o]);
            for (i, in_i) in input.chunks_exact(hw).enumerate() {
                let taps = &self.weight[(o * self.in_channels + i) * TAPS..][..TAPS];
                for_each_tap(h, w, |tap, y, sy, x0, x1, sx0| {
                    let wt = taps[tap];
                    let dst = &mut out_o[y * w + x0..y * w + x1];
                    let src = &in_i[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += wt * s;
                    }
                });
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to `input`.
    fn backward(&self, input: &[f64], grad_out: &[f64], h: usize, w: usize, grad: &mut ConvLayer) -> Vec<f64> {
        let hw = h * w;
        let mut grad_in = vec![0.0; input.len()];
        for (o, g_o) in grad_out.chunks_exact(hw).enumerate() {
            grad.bias[o] += g_o.iter().sum::<f64>();
            for (i, in_i) in input.chunks_exact(hw).enumerate() {
                let base = (o * self.in_channels + i) * TAPS;
                let taps = &self.weight[base..base + TAPS];
                let gtaps = &mut grad.weight[base..base + TAPS];
                let gin_i = &mut grad_in[i * hw..(i + 1) * hw];
                for_each_tap(h, w, |tap, y, sy, x0, x1, sx0| {
                    let go = &g_o[y * w + x0..y * w + x1];
                    let n = x1 - x0;
                    let src = &in_i[sy * w + sx0..sy * w + sx0 + n];
                    gtaps[tap] += go.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                    let wt = taps[tap];
                    for (d, g) in gin_i[sy * w + sx0..sy * w + sx0 + n].iter_mut().zip(go) {
                        *d += wt * g;
                    }
                });
            }
        }
        grad_in
    }
}

/// Visits every (tap, output row) pair of a zero-padded 3x3 convolution.
/// The callback receives the tap index, output row `y`, source row `sy`,
/// the valid output column range `x0..x1` and the matching source start.
fn for_each_tap(h: usize, w: usize, mut f: impl FnMut(usize, usize, usize, usize, usize, usize)) {
    for dy in 0..KERNEL {
        for dx in 0..KERNEL {
            let y_lo = usize::from(dy == 0);
            let y_hi = if dy == 2 { h.saturating_sub(1) } else { h };
            let x0 = usize::from(dx == 0);
            let x1 = if dx == 2 { w.saturating_sub(1) } else { w };
            if x1 <= x0 {
                continue;
            }
            for y in y_lo..y_hi {
                f(dy * KERNEL + dx, y, y + dy - 1, x0, x1, x0 + dx - 1);
            }
        }
    }
}

/// Weights of the combiner: a residual convolutional trunk and two heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerParams {
    pub config: CombinerConfig,
    pub trunk: Vec<ConvLayer>,
    /// Produces `D1`, the weight magnitudes.
    pub magnitude_head: ConvLayer,
    /// Produces `D2`, the weight phases.
    pub phase_head: ConvLayer,
}

impl CombinerParams {
    /// All weights and biases zero.
    pub fn zeros(config: &CombinerConfig) -> Result<Self> {
        config.validate()?;
        let mut trunk = Vec::with_capacity(config.hidden.len());
        let mut c_in = INPUT_CHANNELS;
        for &c in &config.hidden {
            trunk.push(ConvLayer::zeros(c_in, c));
            c_in = c;
        }
        Ok(CombinerParams {
            config: config.clone(),
            trunk,
            magnitude_head: ConvLayer::zeros(c_in, HEAD_CHANNELS),
            phase_head: ConvLayer::zeros(c_in, HEAD_CHANNELS),
        })
    }

    /// Seeded fan-in uniform initialization. The heads start near
    /// `D1 = (1, 0)`, `D2 = 0`, i.e. the deterministic estimate alone.
    pub fn init(config: &CombinerConfig, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut params.trunk {
            *layer = ConvLayer::uniform(layer.in_channels, layer.out_channels, 1.0, &mut rng);
        }
        let width = config.trunk_width();
        params.magnitude_head = ConvLayer::uniform(width, HEAD_CHANNELS, config.head_init_scale, &mut rng);
        params.phase_head = ConvLayer::uniform(width, HEAD_CHANNELS, config.head_init_scale, &mut rng);
        params.magnitude_head.bias[0] = 1.0;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.trunk.len() != self.config.hidden.len() {
            return Err(Error::shape(
                format!("{} trunk layers", self.config.hidden.len()),
                format!("{}", self.trunk.len()),
            ));
        }
        let mut c_in = INPUT_CHANNELS;
        for (layer, &c) in self.trunk.iter().zip(&self.config.hidden) {
            if layer.in_channels != c_in || layer.out_channels != c {
                return Err(Error::shape(
                    format!("{c_in}->{c}"),
                    format!("{}->{}", layer.in_channels, layer.out_channels),
                ));
            }
            layer.check()?;
            c_in = c;
        }
        for head in [&self.magnitude_head, &self.phase_head] {
            if head.in_channels != c_in || head.out_channels != HEAD_CHANNELS {
                return Err(Error::shape(
                    format!("{c_in}->{HEAD_CHANNELS}"),
                    format!("{}->{}", head.in_channels, head.out_channels),
                ));
            }
            head.check()?;
        }
        Ok(())
    }

    fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.trunk.iter().chain([&self.magnitude_head, &self.phase_head])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvLayer> {
        self.trunk
            .iter_mut()
            .chain([&mut self.magnitude_head, &mut self.phase_head])
    }

    pub fn n_params(&self) -> usize {
        self.layers().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Every parameter in a fixed order: per layer, weights then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in self.layers() {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`CombinerParams::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::shape(format!("{} parameters", self.n_params()), format!("{}", flat.len())));
        }
        let mut rest = flat;
        for l in self.layers_mut() {
            let (w, r) = rest.split_at(l.weight.len());
            l.weight.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    fn add_assign(&mut self, other: &CombinerParams) {
        for (a, b) in self.layers_mut().zip(other.layers()) {
            for (x, y) in a.weight.iter_mut().zip(&b.weight) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }
}

/// Stacked input features for one estimate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerInput {
    data: Vec<f64>,
    bins: usize,
    frames: usize,
}

impl CombinerInput {
    pub fn new(a: &MagnitudeFeatures, psi: &PhaseFeatures) -> Result<Self> {
        if a.a.dim() != psi.psi.dim() {
            return Err(Error::shape(format!("{:?}", a.a.dim()), format!("{:?}", psi.psi.dim())));
        }
        let (ch, bins, frames) = a.a.dim();
        if ch != 2 {
            return Err(Error::shape("2 feature channels", format!("{ch}")));
        }
        let mut data = Vec::with_capacity(INPUT_CHANNELS * bins * frames);
        data.extend(a.a.iter().map(|x| x.ln_1p()));
        data.extend(psi.psi.iter().copied());
        Ok(CombinerInput { data, bins, frames })
    }

    pub fn from_spectrograms(vd: &Spectrogram, vg: &Spectrogram) -> Result<Self> {
        Self::new(&magnitude_features(vd, vg)?, &phase_features(vd, vg)?)
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.bins, self.frames)
    }
}

/// Activations kept for the backward pass.
struct Cache {
    /// Input to each trunk layer, then the trunk output.
    h: Vec<Vec<f64>>,
    /// Pre-activation of each trunk layer.
    z: Vec<Vec<f64>>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn forward_cached(params: &CombinerParams, input: &CombinerInput) -> Result<Cache> {
    let (h, w) = input.dim();
    if params.trunk.first().map_or(params.magnitude_head.in_channels, |l| l.in_channels) != INPUT_CHANNELS {
        return Err(Error::shape(format!("{INPUT_CHANNELS} input channels"), "params expect otherwise"));
    }
    let slope = params.config.leaky_slope;
    let mut hs = vec![input.data.clone()];
    let mut zs = Vec::with_capacity(params.trunk.len());
    for layer in &params.trunk {
        let prev = hs.last().expect("input is always present");
        let z = layer.forward(prev, h, w);
        let mut next: Vec<f64> = z.iter().map(|&v| leaky(v, slope)).collect();
        if layer.in_channels == layer.out_channels {
            for (n, p) in next.iter_mut().zip(prev) {
                *n += p;
            }
        }
        zs.push(z);
        hs.push(next);
    }
    let top = hs.last().expect("input is always present");
    let d1 = params.magnitude_head.forward(top, h, w);
    let d2 = params.phase_head.forward(top, h, w);
    Ok(Cache { h: hs, z: zs, d1, d2 })
}

fn to_array(v: Vec<f64>, bins: usize, frames: usize) -> Array3<f64> {
    Array3::from_shape_vec((HEAD_CHANNELS, bins, frames), v).expect("head output has head shape")
}

/// Head outputs `(D1, D2)`, each `2 x bins x frames`.
pub fn combiner_forward(
    a: &MagnitudeFeatures,
    psi: &PhaseFeatures,
    params: &CombinerParams,
) -> Result<(Array3<f64>, Array3<f64>)> {
    params.validate()?;
    let input = CombinerInput::new(a, psi)?;
    let cache = forward_cached(params, &input)?;
    let (b, k) = input.dim();
    Ok((to_array(cache.d1, b, k), to_array(cache.d2, b, k)))
}

/// Fusion weights predicted for one estimate pair.
pub fn learned_weights(params: &CombinerParams, vd: &Spectrogram, vg: &Spectrogram) -> Result<FusionWeights> {
    let (d1, d2) = combiner_forward(&magnitude_features(vd, vg)?, &phase_features(vd, vg)?, params)?;
    weights_from_heads(&d1, &d2)
}

/// `apply_fusion` with combiner-predicted weights.
pub fn learned_fuse(params: &CombinerParams, vd: &Spectrogram, vg: &Spectrogram) -> Result<TimeSignal> {
    apply_fusion(vd, vg, &learned_weights(params, vd, vg)?)
}

/// One estimate pair and the source it is assigned to.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub input: CombinerInput,
    pub vd: Spectrogram,
    pub vg: Spectrogram,
    pub reference: TimeSignal,
}

impl BatchItem {
    pub fn new(vd: Spectrogram, vg: Spectrogram, reference: TimeSignal) -> Result<Self> {
        if reference.len() != vd.signal_len() {
            return Err(Error::shape(format!("{} samples", vd.signal_len()), format!("{}", reference.len())));
        }
        Ok(BatchItem {
            input: CombinerInput::from_spectrograms(&vd, &vg)?,
            vd,
            vg,
            reference,
        })
    }
}

/// Fused waveform for one item, without caching.
pub(crate) fn fuse_item(params: &CombinerParams, item: &BatchItem) -> Result<TimeSignal> {
    let cache = forward_cached(params, &item.input)?;
    let (b, k) = item.input.dim();
    let w = weights_from_heads(&to_array(cache.d1, b, k), &to_array(cache.d2, b, k))?;
    istft(&fused_spectrogram(&item.vd, &item.vg, &w)?, item.vd.config())
}

/// Loss and gradient for one item, loss `= -scale * SI-SDR`.
pub(crate) fn item_backward(params: &CombinerParams, item: &BatchItem, scale: f64) -> Result<(f64, f64, CombinerParams)> {
    let (h, w) = item.input.dim();
    if item.vd.dim() != (h, w) {
        return Err(Error::shape(format!("{:?}", item.vd.dim()), format!("{:?}", (h, w))));
    }
    let cache = forward_cached(params, &item.input)?;
    let hw = h * w;
    let weights = weights_from_heads(&to_array(cache.d1.clone(), h, w), &to_array(cache.d2.clone(), h, w))?;
    let fused = fused_spectrogram(&item.vd, &item.vg, &weights)?;
    let est = istft(&fused, item.vd.config())?;
    let (value, grad_t) = si_sdr_with_grad(item.reference.samples(), est.samples(), true)?;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("SI-SDR loss is {value}")));
    }
    let loss = -scale * value;
    let g_time: Vec<f64> = grad_t.iter().map(|g| -scale * g).collect();
    let g_spec = istft_adjoint(&g_time, item.vd.config(), w);

    // d/dD1 = Re(G e^{jD2}), d/dD2 = -Im(G conj(q)) for each weight q
    let mut g_d1 = vec![0.0; HEAD_CHANNELS * hw];
    let mut g_d2 = vec![0.0; HEAD_CHANNELS * hw];
    for (idx, gs) in g_spec.iter().enumerate() {
        let (b, k) = (idx / w, idx % w);
        let pairs = [
            (item.vd.data()[[b, k]], weights.alpha[[b, k]]),
            (item.vg.data()[[b, k]], weights.beta[[b, k]]),
        ];
        for (c, (x, q)) in pairs.into_iter().enumerate() {
            let g_q: Complex64 = gs * x.conj();
            let at = c * hw + idx;
            g_d1[at] = (g_q * Complex64::from_polar(1.0, cache.d2[at])).re;
            g_d2[at] = -(g_q * q.conj()).im;
        }
    }

    let mut grad = CombinerParams::zeros(&params.config)?;
    let top = cache.h.last().expect("input is always present");
    let mut g_h = params.magnitude_head.backward(top, &g_d1, h, w, &mut grad.magnitude_head);
    let g_phase = params.phase_head.backward(top, &g_d2, h, w, &mut grad.phase_head);
    for (a, b) in g_h.iter_mut().zip(&g_phase) {
        *a += b;
    }
    let slope = params.config.leaky_slope;
    for (l, layer) in params.trunk.iter().enumerate().rev() {
        let g_z: Vec<f64> = g_h
            .iter()
            .zip(&cache.z[l])
            .map(|(g, z)| if *z > 0.0 { *g } else { slope * g })
            .collect();
        let mut g_prev = layer.backward(&cache.h[l], &g_z, h, w, &mut grad.trunk[l]);
        if layer.in_channels == layer.out_channels {
            for (p, g) in g_prev.iter_mut().zip(&g_h) {
                *p += g;
            }
        }
        g_h = g_prev;
    }
    Ok((loss, value, grad))
}

/// Gradient of `loss_scale * mean(-SI-SDR)` over the batch, with each
/// item's source assignment held fixed. Returns `(loss, gradient)`.
pub fn combiner_backward(batch: &[BatchItem], params: &CombinerParams, loss_scale: f64) -> Result<(f64, CombinerParams)> {
    use rayon::prelude::*;
    params.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let scale = loss_scale / batch.len() as f64;
    let parts: Vec<(f64, f64, CombinerParams)> = batch
        .par_iter()
        .map(|item| item_backward(params, item, scale))
        .collect::<Result<_>>()?;
    let mut grad = CombinerParams::zeros(&params.config)?;
    let mut loss = 0.0;
    // fixed summation order keeps the result independent of scheduling
    for (l, _, g) in &parts {
        loss += l;
        grad.add_assign(g);
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{stft, SpectralConfig, Window};
    use ndarray::Array3;

    fn tiny_cfg() -> SpectralConfig {
        SpectralConfig::new(8000, 16, 4, Window::Hann).unwrap()
    }

    fn signal(seed: u64, len: usize) -> TimeSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TimeSignal::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000).unwrap()
    }

    fn item(seed: u64, len: usize) -> BatchItem {
        let cfg = tiny_cfg();
        let v = signal(seed, len);
        let noise = signal(seed + 100, len);
        let d: Vec<f64> = v.samples().iter().zip(noise.samples()).map(|(a, b)| a + 0.3 * b).collect();
        let vd = stft(&TimeSignal::new(d, 8000).unwrap(), &cfg).unwrap();
        let vg = stft(&signal(seed + 200, len), &cfg).unwrap();
        BatchItem::new(vd, vg, v).unwrap()
    }

    fn tiny_params(seed: u64) -> CombinerParams {
        let cfg = CombinerConfig {
            hidden: vec![2],
            head_init_scale: 1.0,
            ..Default::default()
        };
        let mut p = CombinerParams::init(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let flat: Vec<f64> = p.to_flat().iter().map(|x| x + rng.random_range(-0.3..0.3)).collect();
        p.set_flat(&flat).unwrap();
        p
    }

    #[test]
    fn zero_params_give_zero_heads() {
        let it = item(1, 64);
        let p = CombinerParams::zeros(&CombinerConfig::default()).unwrap();
        let cache = forward_cached(&p, &it.input).unwrap();
        assert!(cache.d1.iter().chain(&cache.d2).all(|x| *x == 0.0));
    }

    #[test]
    fn constant_head_gives_unit_weights() {
        let it = item(1, 64);
        let cfg = CombinerConfig {
            hidden: vec![],
            ..Default::default()
        };
        let mut p = CombinerParams::zeros(&cfg).unwrap();
        p.magnitude_head.bias = vec![1.0, 1.0];
        let w = learned_weights(&p, &it.vd, &it.vg).unwrap();
        assert!(w.alpha.iter().chain(w.beta.iter()).all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn init_starts_at_the_deterministic_estimate() {
        let it = item(3, 64);
        let cfg = CombinerConfig {
            head_init_scale: 0.0,
            ..Default::default()
        };
        let p = CombinerParams::init(&cfg, 0).unwrap();
        let out = learned_fuse(&p, &it.vd, &it.vg).unwrap();
        let det = istft(&it.vd, it.vd.config()).unwrap();
        assert_eq!(out, det);
    }

    #[test]
    fn forward_is_deterministic_and_seeded() {
        let it = item(1, 64);
        let a = CombinerParams::init(&CombinerConfig::default(), 7).unwrap();
        let b = CombinerParams::init(&CombinerConfig::default(), 7).unwrap();
        let c = CombinerParams::init(&CombinerConfig::default(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let x = learned_weights(&a, &it.vd, &it.vg).unwrap();
        let y = learned_weights(&b, &it.vd, &it.vg).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn flat_round_trip_and_shape_checks() {
        let mut p = CombinerParams::init(&CombinerConfig::paper(), 1).unwrap();
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.n_params());
        p.set_flat(&flat).unwrap();
        assert_eq!(p.to_flat(), flat);
        assert!(p.set_flat(&flat[1..]).is_err());
        let mut bad = p.clone();
        bad.trunk[1].bias.pop();
        assert!(bad.validate().is_err());
        let mut bad = p.clone();
        bad.phase_head.weight[0] = f64::NAN;
        assert!(bad.validate().is_err());
        let bad_cfg = CombinerConfig {
            hidden: vec![4, 0],
            ..Default::default()
        };
        assert!(CombinerParams::zeros(&bad_cfg).is_err());
    }

    #[test]
    fn feature_shape_mismatch_is_rejected() {
        let p = CombinerParams::init(&CombinerConfig::default(), 1).unwrap();
        let a = MagnitudeFeatures { a: Array3::zeros((2, 4, 5)) };
        let psi = PhaseFeatures { psi: Array3::zeros((2, 4, 6)) };
        assert!(combiner_forward(&a, &psi, &p).is_err());
        let a3 = MagnitudeFeatures { a: Array3::zeros((3, 4, 5)) };
        let psi3 = PhaseFeatures { psi: Array3::zeros((3, 4, 5)) };
        assert!(combiner_forward(&a3, &psi3, &p).is_err());
    }

    /// Naive convolution straight from the definition.
    fn conv_reference(layer: &ConvLayer, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let mut out = vec![0.0; layer.out_channels * h * w];
        for o in 0..layer.out_channels {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = layer.bias[o];
                    for i in 0..layer.in_channels {
                        for dy in 0..3 {
                            for dx in 0..3 {
                                let (sy, sx) = (y as i64 + dy as i64 - 1, x as i64 + dx as i64 - 1);
                                if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                                    continue;
                                }
                                acc += layer.weight[((o * layer.in_channels + i) * 3 + dy) * 3 + dx]
                                    * input[(i * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out[(o * h + y) * w + x] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn convolution_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (h, w) in [(5, 7), (1, 1), (2, 3), (4, 1)] {
            let layer = ConvLayer::uniform(3, 2, 1.0, &mut rng);
            let input: Vec<f64> = (0..3 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = layer.forward(&input, h, w);
            let slow = conv_reference(&layer, &input, h, w);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_backward_is_the_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (h, w) = (4, 5);
        let mut layer = ConvLayer::uniform(2, 3, 1.0, &mut rng);
        layer.bias = vec![0.0; 3];
        let x: Vec<f64> = (0..2 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..3 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grad = ConvLayer::zeros(2, 3);
        let gx = layer.backward(&x, &g, h, w, &mut grad);
        let lhs: f64 = layer.forward(&x, h, w).iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        // the layer is linear in its weights too
        let via_weights: f64 = layer.weight.iter().zip(&grad.weight).map(|(a, b)| a * b).sum();
        assert!((lhs - via_weights).abs() < 1e-10);
    }

    fn batch_loss(p: &CombinerParams, batch: &[BatchItem]) -> f64 {
        combiner_backward(batch, p, 1.0).unwrap().0
    }

    #[test]
    fn gradient_matches_central_differences() {
        let batch = vec![item(10, 16), item(11, 16)];
        assert_eq!(batch[0].input.dim(), (9, 5));
        for point in 0..3 {
            let p = tiny_params(20 + point);
            let (_, grad) = combiner_backward(&batch, &p, 1.0).unwrap();
            let analytic = grad.to_flat();
            let base = p.to_flat();
            let step = 1e-4;
            let mut numeric = vec![0.0; base.len()];
            for i in 0..base.len() {
                let mut q = p.clone();
                let mut x = base.clone();
                x[i] = base[i] + step;
                q.set_flat(&x).unwrap();
                let up = batch_loss(&q, &batch);
                x[i] = base[i] - step;
                q.set_flat(&x).unwrap();
                let down = batch_loss(&q, &batch);
                numeric[i] = (up - down) / (2.0 * step);
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff <= 1e-4 * norm, "point {point}: {diff} vs {norm}");
        }
    }

    #[test]
    fn loss_scale_is_linear() {
        let batch = vec![item(12, 32)];
        let p = tiny_params(3);
        let (l1, g1) = combiner_backward(&batch, &p, 1.0).unwrap();
        let (l2, g2) = combiner_backward(&batch, &p, 2.0).unwrap();
        assert!((l2 - 2.0 * l1).abs() <= 1e-10 * l1.abs());
        for (a, b) in g1.to_flat().iter().zip(g2.to_flat()) {
            assert!((b - 2.0 * a).abs() <= 1e-10 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn capped_loss_has_finite_zero_gradient() {
        let cfg = tiny_cfg();
        let v = signal(5, 32);
        let vd = stft(&v, &cfg).unwrap();
        let batch = vec![BatchItem::new(vd.clone(), vd, v).unwrap()];
        let p = CombinerParams::init(
            &CombinerConfig {
                hidden: vec![2],
                head_init_scale: 0.0,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let (loss, grad) = combiner_backward(&batch, &p, 1.0).unwrap();
        assert!(loss.is_finite());
        assert!(grad.to_flat().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn empty_batch_is_an_error() {
        let p = tiny_params(1);
        assert!(combiner_backward(&[], &p, 1.0).is_err());
    }
}
