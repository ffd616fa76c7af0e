//! Information-theoretic calculators.
//!
//! [`DiscreteJoint`] and the `*_check` functions evaluate mutual-information
//! identities and inequalities exactly on finite alphabets. The [`awgn`]
//! half integrates the mutual information of a Laplace source through an
//! additive Gaussian channel and turns it into SDR bounds. All information
//! values are in nats.

mod awgn;

use crate::error::{Error, Result};

pub use awgn::{
    classical_sdr_bound, default_mi_ref, generative_sdr_bound, laplace_entropy, mi_laplace_awgn, rho,
    rho_curve, write_plot_script, write_rho_csv, BoundInputs, BoundReport, QuadratureSpec, RhoPoint,
    GENERATIVE_GAIN_DB,
};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Probability table over a product of finite alphabets, row-major in the
/// order of `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    dims: Vec<usize>,
    p: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(dims: Vec<usize>, p: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidInput(format!("bad alphabet sizes {dims:?}")));
        }
        let size: usize = dims.iter().product();
        if p.len() != size {
            return Err(Error::shape(format!("{size} cells"), format!("{} cells", p.len())));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteJoint { dims, p })
    }

    /// Normalizes non-negative weights into a joint.
    pub fn from_weights(dims: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("weights must have positive total".into()));
        }
        Self::new(dims, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// Marginal over the listed variables, in the listed order.
    pub fn marginal(&self, axes: &[usize]) -> DiscreteJoint {
        let strides = self.strides();
        let dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; dims.iter().product()];
        for (flat, &pv) in self.p.iter().enumerate() {
            let mut idx = 0;
            for &a in axes {
                idx = idx * self.dims[a] + (flat / strides[a]) % self.dims[a];
            }
            out[idx] += pv;
        }
        DiscreteJoint { dims, p: out }
    }

    /// Merges consecutive variables `[from, to)` into one.
    pub fn group(&self, from: usize, to: usize) -> DiscreteJoint {
        let mut dims = self.dims[..from].to_vec();
        dims.push(self.dims[from..to].iter().product());
        dims.extend_from_slice(&self.dims[to..]);
        DiscreteJoint { dims, p: self.p.clone() }
    }
}

/// `sum p log(p / (p_x p_y))` for a two-variable joint, `0 log 0 = 0`.
pub fn discrete_mi(joint: &DiscreteJoint) -> Result<f64> {
    if joint.dims.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "mutual information needs a 2-variable joint, got {}",
            joint.dims.len()
        )));
    }
    let (nx, ny) = (joint.dims[0], joint.dims[1]);
    let px: Vec<f64> = (0..nx).map(|i| joint.p[i * ny..(i + 1) * ny].iter().sum()).collect();
    let py: Vec<f64> = (0..ny).map(|j| (0..nx).map(|i| joint.p[i * ny + j]).sum()).collect();
    let mut mi = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let p = joint.p[i * ny + j];
            if p > 0.0 {
                mi += p * (p / (px[i] * py[j])).ln();
            }
        }
    }
    Ok(mi)
}

fn mi_between(joint: &DiscreteJoint, a: &[usize], b: &[usize]) -> f64 {
    let axes: Vec<usize> = a.iter().chain(b).copied().collect();
    let m = joint.marginal(&axes).group(0, a.len()).group(1, 1 + b.len());
    discrete_mi(&m).expect("grouped marginal has two variables")
}

/// `I(X; Y | Z)` by averaging the conditional mutual information of each
/// slice `Z = z`; `joint` is ordered `(X, Y, Z)`.
fn conditional_mi(joint: &DiscreteJoint) -> f64 {
    let (nx, ny, nz) = (joint.dims[0], joint.dims[1], joint.dims[2]);
    let mut total = 0.0;
    for z in 0..nz {
        let slice: Vec<f64> = (0..nx * ny).map(|xy| joint.p[xy * nz + z]).collect();
        let pz: f64 = slice.iter().sum();
        if pz <= 0.0 {
            continue;
        }
        let conditional = DiscreteJoint {
            dims: vec![nx, ny],
            p: slice.iter().map(|v| v / pz).collect(),
        };
        total += pz * discrete_mi(&conditional).expect("two variables");
    }
    total
}

/// Both sides of `I(X; Y,Z) = I(X; Z) + I(X; Y | Z)` for a joint ordered
/// `(X, Y, Z)`. The left side groups `(Y, Z)` into one variable; the right
/// side goes through the conditional slices.
pub fn chain_rule_check(joint: &DiscreteJoint) -> Result<(f64, f64)> {
    if joint.dims.len() != 3 {
        return Err(Error::InvalidInput("chain rule needs a 3-variable joint".into()));
    }
    let lhs = discrete_mi(&joint.group(1, 3))?;
    let rhs = mi_between(joint, &[0], &[2]) + conditional_mi(joint);
    Ok((lhs, rhs))
}

/// Row-stochastic channel matrix, `inputs x outputs`.
fn validate_kernel(kernel: &[Vec<f64>], inputs: usize, label: &str) -> Result<usize> {
    if kernel.len() != inputs {
        return Err(Error::shape(format!("{label} with {inputs} rows"), format!("{} rows", kernel.len())));
    }
    let outputs = kernel.first().map_or(0, Vec::len);
    if outputs == 0 {
        return Err(Error::InvalidInput(format!("{label} has no outputs")));
    }
    for (i, row) in kernel.iter().enumerate() {
        if row.len() != outputs {
            return Err(Error::shape(format!("{outputs} columns"), format!("{label} row {i} has {}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!("{label} row {i} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidInput(format!("{label} row {i} sums to {s}")));
        }
    }
    Ok(outputs)
}

/// Appends a variable produced from the last one through `kernel`.
fn extend_markov(joint: &DiscreteJoint, kernel: &[Vec<f64>]) -> DiscreteJoint {
    let last = *joint.dims.last().unwrap();
    let outputs = kernel[0].len();
    let mut p = Vec::with_capacity(joint.p.len() * outputs);
    for (flat, &pv) in joint.p.iter().enumerate() {
        let state = flat % last;
        p.extend(kernel[state].iter().map(|k| pv * k));
    }
    let mut dims = joint.dims.clone();
    dims.push(outputs);
    DiscreteJoint { dims, p }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpiReport {
    pub i_vm: f64,
    pub i_vd: f64,
}

/// `I(V; M)` and `I(V; D)` for `D` drawn from `M` through `kernel`.
pub fn dpi_check(joint_vm: &DiscreteJoint, kernel: &[Vec<f64>]) -> Result<DpiReport> {
    if joint_vm.dims.len() != 2 {
        return Err(Error::InvalidInput("expected a (V, M) joint".into()));
    }
    validate_kernel(kernel, joint_vm.dims[1], "kernel")?;
    let vmd = extend_markov(joint_vm, kernel);
    Ok(DpiReport {
        i_vm: discrete_mi(joint_vm)?,
        i_vd: mi_between(&vmd, &[0], &[2]),
    })
}

/// Information quantities of the chain `V -> M -> D -> G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainBoundReport {
    pub i_vm: f64,
    pub i_vd: f64,
    pub i_vg: f64,
    pub i_v_dg: f64,
    pub i_vg_given_d: f64,
}

impl ChainBoundReport {
    /// Largest violation over the checked inequalities (non-positive when
    /// all hold):
    /// `I(V;D) <= I(V;M)`, `I(V;D,G) <= I(V;M) + I(V;G|D)`,
    /// `I(V;D,G) <= I(V;M)`, `I(V;G) <= 2 I(V;M)`.
    pub fn worst_violation(&self) -> f64 {
        [
            self.i_vd - self.i_vm,
            self.i_v_dg - (self.i_vm + self.i_vg_given_d),
            self.i_v_dg - self.i_vm,
            self.i_vg - 2.0 * self.i_vm,
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.worst_violation() <= tol
    }
}

/// Evaluates the inequality chain for `D = f(M)` (through `kernel_md`)
/// and `G = g(D, noise)` (through `kernel_dg`).
pub fn chain_bound_check(
    joint_vm: &DiscreteJoint,
    kernel_md: &[Vec<f64>],
    kernel_dg: &[Vec<f64>],
) -> Result<ChainBoundReport> {
    if joint_vm.dims.len() != 2 {
        return Err(Error::InvalidInput("expected a (V, M) joint".into()));
    }
    let nd = validate_kernel(kernel_md, joint_vm.dims[1], "M->D kernel")?;
    validate_kernel(kernel_dg, nd, "D->G kernel")?;
    let vmdg = extend_markov(&extend_markov(joint_vm, kernel_md), kernel_dg);
    Ok(ChainBoundReport {
        i_vm: discrete_mi(joint_vm)?,
        i_vd: mi_between(&vmdg, &[0], &[2]),
        i_vg: mi_between(&vmdg, &[0], &[3]),
        i_v_dg: mi_between(&vmdg, &[0], &[2, 3]),
        i_vg_given_d: conditional_mi(&vmdg.marginal(&[0, 3, 2])),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_joint(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> DiscreteJoint {
        let n = dims.iter().product();
        DiscreteJoint::from_weights(dims, (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| {
                let w: Vec<f64> = (0..cols).map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            })
            .collect()
    }

    #[test]
    fn rejects_unnormalized_tables() {
        assert!(DiscreteJoint::new(vec![2, 2], vec![0.25, 0.25, 0.25, 0.3]).is_err());
        assert!(DiscreteJoint::new(vec![2, 2], vec![0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(DiscreteJoint::new(vec![2, 2], vec![1.0]).is_err());
    }

    #[test]
    fn independent_product_has_zero_information() {
        let px = [0.2, 0.3, 0.5];
        let py = [0.6, 0.4];
        let p = px.iter().flat_map(|a| py.iter().map(move |b| a * b)).collect();
        let j = DiscreteJoint::new(vec![3, 2], p).unwrap();
        assert_abs_diff_eq!(discrete_mi(&j).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_coupling_gives_log_alphabet() {
        let mut p = vec![0.0; 16];
        for i in 0..4 {
            p[i * 4 + i] = 0.25;
        }
        let j = DiscreteJoint::new(vec![4, 4], p).unwrap();
        assert_abs_diff_eq!(discrete_mi(&j).unwrap(), 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn two_by_two_matches_direct_sum() {
        let j = DiscreteJoint::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        // all marginals are 1/2
        let direct = 2.0 * 0.4 * (0.4f64 / 0.25).ln() + 2.0 * 0.1 * (0.1f64 / 0.25).ln();
        assert_abs_diff_eq!(discrete_mi(&j).unwrap(), direct, epsilon = 1e-15);
    }

    #[test]
    fn chain_rule_degenerate_cases() {
        let j = DiscreteJoint::new(vec![2, 2, 2], vec![0.125; 8]).unwrap();
        let (l, r) = chain_rule_check(&j).unwrap();
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);

        // X = (Y, Z) with Y, Z fair independent bits
        let mut p = vec![0.0; 4 * 2 * 2];
        for y in 0..2 {
            for z in 0..2 {
                let x = 2 * y + z;
                p[(x * 2 + y) * 2 + z] = 0.25;
            }
        }
        let j = DiscreteJoint::new(vec![4, 2, 2], p).unwrap();
        let (l, r) = chain_rule_check(&j).unwrap();
        assert_abs_diff_eq!(l, 4f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(r, 4f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn chain_rule_on_random_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let dims = (0..3).map(|_| rng.random_range(2..=4)).collect();
            let (l, r) = chain_rule_check(&random_joint(&mut rng, dims)).unwrap();
            assert!((l - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn dpi_identity_and_constant_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let j = random_joint(&mut rng, vec![3, 4]);
        let identity: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|k| (i == k) as u8 as f64).collect()).collect();
        let r = dpi_check(&j, &identity).unwrap();
        assert_abs_diff_eq!(r.i_vm, r.i_vd, epsilon = 1e-15);
        let constant = vec![vec![0.5, 0.3, 0.2]; 4];
        let r = dpi_check(&j, &constant).unwrap();
        assert_abs_diff_eq!(r.i_vd, 0.0, epsilon = 1e-15);
        for _ in 0..50 {
            let k = random_kernel(&mut rng, 4, 3);
            let r = dpi_check(&j, &k).unwrap();
            assert!(r.i_vd <= r.i_vm + 1e-12);
        }
    }

    #[test]
    fn invalid_kernels_are_rejected() {
        let j = DiscreteJoint::new(vec![2, 2], vec![0.25; 4]).unwrap();
        assert!(dpi_check(&j, &[vec![1.0]]).is_err());
        assert!(dpi_check(&j, &[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(chain_bound_check(&j, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![1.0]]).is_err());
    }

    #[test]
    fn chain_bound_without_processing_is_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let j = random_joint(&mut rng, vec![3, 3]);
        let id: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|k| (i == k) as u8 as f64).collect()).collect();
        let r = chain_bound_check(&j, &id, &id).unwrap();
        assert_abs_diff_eq!(r.i_v_dg, r.i_vm, epsilon = 1e-14);
        assert_abs_diff_eq!(r.i_vg, r.i_vm, epsilon = 1e-14);
        assert!(r.holds(1e-12));
    }

    #[test]
    fn pure_noise_generator_carries_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let j = random_joint(&mut rng, vec![3, 3]);
        let kd = random_kernel(&mut rng, 3, 3);
        let noise = vec![vec![0.25; 4]; 3];
        let r = chain_bound_check(&j, &kd, &noise).unwrap();
        assert_abs_diff_eq!(r.i_vg, 0.0, epsilon = 1e-15);
        assert!(r.holds(1e-12));
    }

    #[test]
    fn marginal_and_group_shapes() {
        let j = DiscreteJoint::from_weights(vec![2, 3, 4], (1..=24).map(f64::from).collect()).unwrap();
        let m = j.marginal(&[2, 0]);
        assert_eq!(m.dims(), &[4, 2]);
        assert_abs_diff_eq!(m.probabilities().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(j.group(1, 3).dims(), &[2, 12]);
    }
}
