//! Linear spectral fusion of a deterministic and a generative estimate.
//!
//! The fused spectrogram is `alpha * Vd + beta * Vg` with complex per-tile
//! weights. Weights come from a least-squares oracle, from the learned
//! combiner in [`combiner`], or are fixed by the caller.

mod checkpoint;
pub mod combiner;
pub mod train;

use ndarray::{Array2, Array3, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{istft, Spectrogram, TimeSignal};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use combiner::{
    combiner_backward, combiner_forward, learned_fuse, learned_weights, BatchItem, CombinerConfig,
    CombinerInput, CombinerParams, ConvLayer,
};
pub use train::{
    dataset_si_sdr, load_dataset, save_dataset, train_combiner, train_from, Adam, EpochLog, TrainConfig,
    TrainExample, TrainOutcome,
};

/// Complex weights for the two estimates, `bins x frames` each.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub alpha: Array2<Complex64>,
    pub beta: Array2<Complex64>,
}

impl FusionWeights {
    pub fn new(alpha: Array2<Complex64>, beta: Array2<Complex64>) -> Result<Self> {
        if alpha.dim() != beta.dim() {
            return Err(Error::shape(format!("{:?}", alpha.dim()), format!("{:?}", beta.dim())));
        }
        if alpha.iter().chain(beta.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("fusion weight".into()));
        }
        Ok(FusionWeights { alpha, beta })
    }

    /// The same `(alpha, beta)` on every tile.
    pub fn constant(dim: (usize, usize), alpha: Complex64, beta: Complex64) -> Self {
        FusionWeights {
            alpha: Array2::from_elem(dim, alpha),
            beta: Array2::from_elem(dim, beta),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.alpha.dim()
    }

    pub fn mean_alpha_magnitude(&self) -> f64 {
        mean_norm(&self.alpha)
    }

    pub fn mean_beta_magnitude(&self) -> f64 {
        mean_norm(&self.beta)
    }
}

fn mean_norm(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).sum::<f64>() / a.len().max(1) as f64
}

/// `Q = D1 exp(-j D2)`; channel 0 is `alpha`, channel 1 is `beta`.
/// Both heads have shape `2 x bins x frames`.
pub fn weights_from_heads(d1: &Array3<f64>, d2: &Array3<f64>) -> Result<FusionWeights> {
    if d1.dim() != d2.dim() {
        return Err(Error::shape(format!("{:?}", d1.dim()), format!("{:?}", d2.dim())));
    }
    let (ch, bins, frames) = d1.dim();
    if ch != 2 {
        return Err(Error::shape("2 head channels", format!("{ch}")));
    }
    let q = |c: usize| {
        let mut out = Array2::zeros((bins, frames));
        Zip::from(&mut out)
            .and(d1.index_axis(ndarray::Axis(0), c))
            .and(d2.index_axis(ndarray::Axis(0), c))
            .for_each(|o, &m, &p| *o = Complex64::from_polar(m, -p));
        out
    };
    FusionWeights::new(q(0), q(1))
}

/// `alpha * Vd + beta * Vg`.
pub fn fused_spectrogram(vd: &Spectrogram, vg: &Spectrogram, w: &FusionWeights) -> Result<Spectrogram> {
    vd.check_compatible(vg)?;
    if w.dim() != vd.dim() {
        return Err(Error::shape(format!("{:?}", vd.dim()), format!("{:?}", w.dim())));
    }
    let mut out = Array2::zeros(vd.dim());
    Zip::from(&mut out)
        .and(vd.data())
        .and(vg.data())
        .and(&w.alpha)
        .and(&w.beta)
        .for_each(|o, d, g, a, b| *o = a * d + b * g);
    Spectrogram::new(out, vd.config().clone(), vd.signal_len())
}

/// `istft(alpha * Vd + beta * Vg)`.
pub fn apply_fusion(vd: &Spectrogram, vg: &Spectrogram, w: &FusionWeights) -> Result<TimeSignal> {
    let fused = fused_spectrogram(vd, vg, w)?;
    istft(&fused, vd.config())
}

/// Frobenius norm of `vref - v`.
pub fn spectral_residual(vref: &Spectrogram, v: &Spectrogram) -> Result<f64> {
    vref.check_compatible(v)?;
    Ok(vref
        .data()
        .iter()
        .zip(v.data())
        .map(|(r, x)| (r - x).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Per-bin sums over frames used by the normal equations.
struct BinStats {
    dd: f64,
    gg: f64,
    /// `sum conj(d) g`
    dg: Complex64,
    /// `sum conj(d) r`
    dr: Complex64,
    /// `sum conj(g) r`
    gr: Complex64,
    rr: f64,
}

impl BinStats {
    fn collect(d: &[Complex64], g: &[Complex64], r: &[Complex64]) -> Self {
        let mut s = BinStats {
            dd: 0.0,
            gg: 0.0,
            dg: Complex64::new(0.0, 0.0),
            dr: Complex64::new(0.0, 0.0),
            gr: Complex64::new(0.0, 0.0),
            rr: 0.0,
        };
        for ((d, g), r) in d.iter().zip(g).zip(r) {
            s.dd += d.norm_sqr();
            s.gg += g.norm_sqr();
            s.dg += d.conj() * g;
            s.dr += d.conj() * r;
            s.gr += g.conj() * r;
            s.rr += r.norm_sqr();
        }
        s
    }

    /// `sum |r - a d - b g|^2 + lambda (|a|^2 + |b|^2)` expanded in the sums.
    fn objective(&self, a: Complex64, b: Complex64, lambda: f64) -> f64 {
        let cross = a.conj() * b * self.dg;
        self.rr + a.norm_sqr() * (self.dd + lambda) + b.norm_sqr() * (self.gg + lambda)
            - 2.0 * (a.conj() * self.dr).re
            - 2.0 * (b.conj() * self.gr).re
            + 2.0 * cross.re
    }

    fn solve(&self, lambda: f64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let a11 = self.dd + lambda;
        let a22 = self.gg + lambda;
        let scale = a11 + a22;
        if scale <= 0.0 {
            return (one, zero);
        }
        // One estimate carries no energy in this bin: scalar fit on the other.
        if a11 <= 1e-15 * scale {
            return (zero, self.gr / a22);
        }
        if a22 <= 1e-15 * scale {
            return (self.dr / a11, zero);
        }
        let det = a11 * a22 - self.dg.norm_sqr();
        if det < 1e-12 * a11 * a22 {
            // collinear estimates span one direction; fitting on d alone is optimal
            return (self.dr / a11, zero);
        }
        let alpha = (a22 * self.dr - self.dg * self.gr) / det;
        let beta = (a11 * self.gr - self.dg.conj() * self.dr) / det;
        let mut best = (alpha, beta);
        // Guard against rounding: never do worse than either estimate alone.
        let mut best_obj = self.objective(alpha, beta, lambda);
        for cand in [(one, zero), (zero, one)] {
            let obj = self.objective(cand.0, cand.1, lambda);
            if obj < best_obj {
                best = cand;
                best_obj = obj;
            }
        }
        best
    }
}

/// Least-squares fusion weights with access to the reference spectrogram.
///
/// One `(alpha, beta)` pair per frequency bin, shared by all frames, solving
/// `min sum_k |Vref - alpha Vd - beta Vg|^2 + lambda (|alpha|^2 + |beta|^2)`.
pub fn oracle_weights(
    vd: &Spectrogram,
    vg: &Spectrogram,
    vref: &Spectrogram,
    lambda: f64,
) -> Result<FusionWeights> {
    check_oracle_inputs(vd, vg, vref, lambda)?;
    let (bins, frames) = vd.dim();
    let mut alpha = Array2::zeros((bins, frames));
    let mut beta = Array2::zeros((bins, frames));
    for b in 0..bins {
        let row = |s: &Spectrogram| s.data().row(b).to_vec();
        let stats = BinStats::collect(&row(vd), &row(vg), &row(vref));
        let (a, g) = stats.solve(lambda);
        alpha.row_mut(b).fill(a);
        beta.row_mut(b).fill(g);
    }
    FusionWeights::new(alpha, beta)
}

/// Ridge-regularized oracle with an independent pair per tile. A single
/// tile gives one equation in two unknowns, so `lambda` must be positive.
pub fn oracle_weights_per_tile(
    vd: &Spectrogram,
    vg: &Spectrogram,
    vref: &Spectrogram,
    lambda: f64,
) -> Result<FusionWeights> {
    check_oracle_inputs(vd, vg, vref, lambda)?;
    if lambda <= 0.0 {
        return Err(Error::InvalidConfig("per-tile oracle weights need lambda > 0".into()));
    }
    let dim = vd.dim();
    let mut alpha = Array2::zeros(dim);
    let mut beta = Array2::zeros(dim);
    Zip::from(&mut alpha)
        .and(&mut beta)
        .and(vd.data())
        .and(vg.data())
        .and(vref.data())
        .for_each(|a, b, d, g, r| {
            let denom = d.norm_sqr() + g.norm_sqr() + lambda;
            *a = d.conj() * r / denom;
            *b = g.conj() * r / denom;
        });
    FusionWeights::new(alpha, beta)
}

fn check_oracle_inputs(vd: &Spectrogram, vg: &Spectrogram, vref: &Spectrogram, lambda: f64) -> Result<()> {
    vd.check_compatible(vg)?;
    vd.check_compatible(vref)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("ridge weight must be >= 0, got {lambda}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{stft, SpectralConfig};
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn noise(seed: u64, len: usize) -> TimeSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TimeSignal::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 8000).unwrap()
    }

    fn spec(seed: u64) -> Spectrogram {
        stft(&noise(seed, 2048), &SpectralConfig::default()).unwrap()
    }

    #[test]
    fn heads_map_to_polar_weights() {
        let ones = Array3::from_elem((2, 3, 4), 1.0);
        let zeros = Array3::zeros((2, 3, 4));
        let w = weights_from_heads(&ones, &zeros).unwrap();
        assert!(w.alpha.iter().chain(w.beta.iter()).all(|z| *z == c(1.0, 0.0)));

        let w = weights_from_heads(&(&ones * 2.0), &Array3::from_elem((2, 3, 4), PI / 2.0)).unwrap();
        for z in w.alpha.iter() {
            assert_abs_diff_eq!(z.re, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, -2.0, epsilon = 1e-15);
        }

        let w = weights_from_heads(&zeros, &Array3::from_elem((2, 3, 4), 1.3)).unwrap();
        assert!(w.alpha.iter().all(|z| z.norm() == 0.0));

        assert!(weights_from_heads(&ones, &Array3::zeros((2, 3, 5))).is_err());
        assert!(weights_from_heads(&Array3::zeros((3, 1, 1)), &Array3::zeros((3, 1, 1))).is_err());
    }

    #[test]
    fn polar_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d1 = Array3::from_shape_fn((2, 5, 6), |_| rng.random_range(0.01..3.0));
        let d2 = Array3::from_shape_fn((2, 5, 6), |_| rng.random_range(-10.0..10.0));
        let w = weights_from_heads(&d1, &d2).unwrap();
        for ((b, k), z) in w.beta.indexed_iter() {
            assert_abs_diff_eq!(z.norm(), d1[[1, b, k]], epsilon = 1e-12);
            let diff = crate::spectral::angle(z * Complex64::from_polar(1.0, d2[[1, b, k]]));
            assert_abs_diff_eq!(diff, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn fixed_weights() {
        let vd = spec(1);
        let vg = spec(2);
        let dim = vd.dim();
        let d_only = istft(&vd, vd.config()).unwrap();

        let out = apply_fusion(&vd, &vg, &FusionWeights::constant(dim, c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        assert_eq!(out, d_only);

        let out = apply_fusion(&vd, &vg, &FusionWeights::constant(dim, c(0.0, 0.0), c(0.0, 0.0))).unwrap();
        assert!(out.samples().iter().all(|x| *x == 0.0));

        let half = FusionWeights::constant(dim, c(0.5, 0.0), c(0.5, 0.0));
        let out = apply_fusion(&vd, &vd, &half).unwrap();
        for (a, b) in out.samples().iter().zip(d_only.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn fusion_is_linear_in_the_estimates() {
        let (d1, d2, g1, g2) = (spec(1), spec(2), spec(3), spec(4));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = d1.dim();
        let w = FusionWeights::new(
            Array2::from_shape_fn(dim, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
            Array2::from_shape_fn(dim, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
        )
        .unwrap();
        let sum = |a: &Spectrogram, b: &Spectrogram| a.with_data(a.data() + b.data());
        let joint = apply_fusion(&sum(&d1, &d2), &sum(&g1, &g2), &w).unwrap();
        let x = apply_fusion(&d1, &g1, &w).unwrap();
        let y = apply_fusion(&d2, &g2, &w).unwrap();
        let scale = joint.peak();
        for ((j, a), b) in joint.samples().iter().zip(x.samples()).zip(y.samples()) {
            assert!((j - a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let vd = spec(1);
        let w = FusionWeights::constant((3, 3), c(1.0, 0.0), c(0.0, 0.0));
        assert!(apply_fusion(&vd, &vd, &w).is_err());
        let short = stft(&noise(1, 1024), &SpectralConfig::default()).unwrap();
        assert!(oracle_weights(&vd, &short, &vd, 0.0).is_err());
        assert!(FusionWeights::new(Array2::zeros((2, 2)), Array2::zeros((2, 3))).is_err());
        assert!(FusionWeights::new(Array2::from_elem((1, 1), c(f64::NAN, 0.0)), Array2::zeros((1, 1))).is_err());
    }

    #[test]
    fn oracle_with_silent_generative_is_scalar_least_squares() {
        let vd = spec(1);
        let vref = spec(7);
        let vg = vd.with_data(Array2::zeros(vd.dim()));
        let w = oracle_weights(&vd, &vg, &vref, 0.0).unwrap();
        for b in 0..vd.n_bins() {
            let d = vd.data().row(b);
            let r = vref.data().row(b);
            let num: Complex64 = r.iter().zip(d.iter()).map(|(r, d)| r * d.conj()).sum();
            let den: f64 = d.iter().map(|d| d.norm_sqr()).sum();
            let expect = num / den;
            assert!((w.alpha[[b, 0]] - expect).norm() <= 1e-9 * expect.norm().max(1.0));
            assert_eq!(w.beta[[b, 0]], c(0.0, 0.0));
        }
    }

    #[test]
    fn oracle_recovers_exact_deterministic() {
        let vd = spec(1);
        let vg = spec(2);
        let w = oracle_weights(&vd, &vg, &vd, 0.0).unwrap();
        for (a, b) in w.alpha.iter().zip(w.beta.iter()) {
            assert!((a - c(1.0, 0.0)).norm() < 1e-9);
            assert!(b.norm() < 1e-9);
        }
    }

    #[test]
    fn oracle_beats_both_estimates_and_a_grid() {
        let cfg = SpectralConfig::default();
        for seed in 0..5 {
            let vref = spec(100 + seed);
            let noisy = |s: u64, gain: f64| {
                let n = spec(s);
                vref.with_data(vref.data() + &(n.data() * gain))
            };
            let vd = noisy(200 + seed, 0.3);
            let vg = noisy(300 + seed, 0.5);
            let w = oracle_weights(&vd, &vg, &vref, 0.0).unwrap();
            let fused = fused_spectrogram(&vd, &vg, &w).unwrap();
            let r = spectral_residual(&vref, &fused).unwrap();
            assert!(r <= spectral_residual(&vref, &vd).unwrap());
            assert!(r <= spectral_residual(&vref, &vg).unwrap());
            assert_eq!(fused.config(), &cfg);
        }

        // one bin: nothing on a complex grid around the solution does better
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut draw = || c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let d: Vec<Complex64> = (0..6).map(|_| draw()).collect();
        let g: Vec<Complex64> = (0..6).map(|_| draw()).collect();
        let r: Vec<Complex64> = (0..6).map(|_| draw()).collect();
        let stats = BinStats::collect(&d, &g, &r);
        let (a, b) = stats.solve(0.0);
        let best = stats.objective(a, b, 0.0);
        let direct: f64 = (0..6).map(|k| (r[k] - a * d[k] - b * g[k]).norm_sqr()).sum();
        assert_abs_diff_eq!(best, direct, epsilon = 1e-10);
        let steps: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
        for &ar in &steps {
            for &ai in &steps {
                for &br in steps.iter().step_by(2) {
                    for &bi in steps.iter().step_by(2) {
                        let obj = stats.objective(c(ar, ai), c(br, bi), 0.0);
                        assert!(obj >= best - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_bins() {
        let zero = c(0.0, 0.0);
        let stats = BinStats::collect(&[zero; 3], &[zero; 3], &[c(1.0, 0.0); 3]);
        assert_eq!(stats.solve(0.0), (c(1.0, 0.0), zero));

        let d = [c(1.0, 0.0), c(0.0, 2.0)];
        let g = d.map(|z| z * c(0.0, 3.0));
        let r = [c(2.0, 1.0), c(-1.0, 0.5)];
        let stats = BinStats::collect(&d, &g, &r);
        let (a, b) = stats.solve(0.0);
        assert_eq!(b, zero);
        let expect = stats.dr / stats.dd;
        assert!((a - expect).norm() < 1e-12);

        let stats = BinStats::collect(&[zero; 2], &g, &r);
        let (a, b) = stats.solve(0.0);
        assert_eq!(a, zero);
        assert!((b - stats.gr / stats.gg).norm() < 1e-12);
    }

    #[test]
    fn per_tile_oracle() {
        let vd = spec(1);
        let vg = spec(2);
        let vref = spec(3);
        assert!(oracle_weights_per_tile(&vd, &vg, &vref, 0.0).is_err());
        let w = oracle_weights_per_tile(&vd, &vg, &vref, 1e-6).unwrap();
        let fused = fused_spectrogram(&vd, &vg, &w).unwrap();
        let r = spectral_residual(&vref, &fused).unwrap();
        assert!(r < 1e-3 * vref.norm());
        assert!(oracle_weights(&vd, &vg, &vref, -1.0).is_err());
    }
}
