//! Analysis and resynthesis with every shipped STFT configuration.

use fusesep::{istft, stft, SpectralConfig, TimeSignal};

fn main() -> fusesep::Result<()> {
    for cfg in SpectralConfig::presets() {
        let x: Vec<f64> = (0..4000)
            .map(|n| {
                let t = n as f64 / cfg.sample_rate as f64;
                (2.0 * std::f64::consts::PI * 440.0 * t).sin() + 0.3 * (2.0 * std::f64::consts::PI * 97.0 * t).cos()
            })
            .collect();
        let sig = TimeSignal::new(x, cfg.sample_rate)?;
        let spec = stft(&sig, &cfg)?;
        let back = istft(&spec, &cfg)?;
        let err = sig.samples().iter().zip(back.samples()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!(
            "sr {:>5}  n_fft {:>4}  hop {:>3}  {:?}: {} bins x {} frames, max error {err:.2e}",
            cfg.sample_rate,
            cfg.n_fft,
            cfg.hop,
            cfg.window,
            spec.n_bins(),
            spec.n_frames()
        );
    }
    Ok(())
}
