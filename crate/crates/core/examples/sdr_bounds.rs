//! Classical and generative SDR upper bounds.

use fusesep::bounds::{classical_sdr_bound, default_mi_ref, generative_sdr_bound, BoundInputs, QuadratureSpec};

fn main() -> fusesep::Result<()> {
    let quad = QuadratureSpec::default();
    for c in 2..=5 {
        let b = BoundInputs {
            signal_len: 8000.0,
            segment_width: 160.0,
            var_v: 1.0,
            mi_ref: default_mi_ref(c, &quad)?,
        };
        println!(
            "C = {c}: mi_ref {:.4} nats  classical {:6.2} dB  generative {:6.2} dB",
            b.mi_ref,
            classical_sdr_bound(&b)?,
            generative_sdr_bound(&b)?
        );
    }
    Ok(())
}
