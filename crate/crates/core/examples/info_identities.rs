//! Chain rule and data-processing checks on a small discrete model.

use fusesep::bounds::{chain_bound_check, chain_rule_check, dpi_check, DiscreteJoint};

fn main() -> fusesep::Result<()> {
    let xyz = DiscreteJoint::from_weights(vec![2, 2, 2], vec![4.0, 1.0, 1.0, 2.0, 1.0, 3.0, 2.0, 2.0])?;
    let (lhs, rhs) = chain_rule_check(&xyz)?;
    println!("I(X;Y,Z) = {lhs:.6}, I(X;Z) + I(X;Y|Z) = {rhs:.6}");

    // source V and mixture M, then noisy channels M -> D -> G
    let vm = DiscreteJoint::from_weights(vec![3, 3], vec![5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0])?;
    let k_md = vec![vec![0.8, 0.2], vec![0.5, 0.5], vec![0.1, 0.9]];
    let k_dg = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]];
    let dpi = dpi_check(&vm, &k_md)?;
    println!("I(V;M) = {:.6} >= I(V;D) = {:.6}", dpi.i_vm, dpi.i_vd);
    let chain = chain_bound_check(&vm, &k_md, &k_dg)?;
    println!(
        "I(V;G) = {:.6}, I(V;D,G) = {:.6}, I(V;G|D) = {:.6}; worst violation {:.2e}",
        chain.i_vg,
        chain.i_v_dg,
        chain.i_vg_given_d,
        chain.worst_violation()
    );
    Ok(())
}
