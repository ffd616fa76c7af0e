//! Permutation-invariant scoring by optimal assignment.

use fusesep::metrics::{hungarian_assign, pit_brute_force, si_sdr};
use fusesep::synthbench::{gen_sources, SourceConfig};

fn main() -> fusesep::Result<()> {
    let refs = gen_sources(4, 4000, 8000, &SourceConfig::default(), 5)?;
    // estimates arrive in a scrambled order
    let order = [2, 0, 3, 1];
    let ests: Vec<_> = order.iter().map(|&i| refs[i].clone()).collect();
    let cost = refs
        .iter()
        .map(|r| ests.iter().map(|e| si_sdr(r, e).map(|v| -v)).collect())
        .collect::<fusesep::Result<Vec<Vec<f64>>>>()?;
    let h = hungarian_assign(&cost)?;
    let b = pit_brute_force(&cost)?;
    println!("hungarian {:?} cost {:.2}", h.permutation, h.total_cost);
    println!("brute force {:?} cost {:.2}", b.permutation, b.total_cost);
    Ok(())
}
