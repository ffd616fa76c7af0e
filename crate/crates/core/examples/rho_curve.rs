//! Fraction of reference information kept under additive noise.

use fusesep::bounds::{default_mi_ref, rho_curve, QuadratureSpec};

fn main() -> fusesep::Result<()> {
    let quad = QuadratureSpec::default();
    let mi_ref = default_mi_ref(2, &quad)?;
    let grid: Vec<f64> = (0..11).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect();
    for p in rho_curve(&grid, mi_ref, &quad)? {
        let bar = "#".repeat((p.rho * 40.0).round() as usize);
        println!("sigma2 {:9.2e}  I {:7.4}  rho {:.4} {bar}", p.sigma2, p.mi, p.rho);
    }
    Ok(())
}
