//! A short run of the synthetic benchmark with the MSE parity check.
//!
//! `cargo run --release --example benchmark -- [instances]`

use fusesep::synthbench::{calibrate_parity, run_benchmark, BenchConfig};

fn main() -> fusesep::Result<()> {
    let n = std::env::args().nth(1).map(|a| a.parse().expect("a count")).unwrap_or(6);
    let cfg = BenchConfig { n_instances: n, ..BenchConfig::default() };
    let report = run_benchmark(&cfg, None)?;
    for s in &report.summary {
        println!(
            "{:<14} median SI-SDRi {:7.3} dB  mean residual {:.3}",
            s.strategy.name(),
            s.median_si_sdri,
            s.mean_residual
        );
    }
    println!("hardest instance: {}", report.flagged_instance());
    println!("{} threads, {:.2} s", report.runtime.threads, report.runtime.total_s);
    let p = calibrate_parity(&cfg, n.min(4), 0.5)?;
    println!(
        "parity: sigma2 {:.3e}, mean ratio {:.3}, W1 {:.3e} / threshold {:.3e}, pass {}",
        p.sigma2,
        p.mean_ratio,
        p.wasserstein,
        p.threshold,
        p.passes()
    );
    Ok(())
}
