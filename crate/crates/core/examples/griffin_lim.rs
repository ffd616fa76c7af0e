//! Phase reconstruction from a mel spectrogram, as the generative
//! simulator does it.

use fusesep::spectral::{griffin_lim_mel, griffin_lim_traced, mel_spectrogram, MelConfig};
use fusesep::synthbench::{gen_sources, SourceConfig};
use fusesep::{stft, SpectralConfig};

fn main() -> fusesep::Result<()> {
    let cfg = SpectralConfig::default();
    let mcfg = MelConfig::default();
    let x = gen_sources(2, 8000, cfg.sample_rate, &SourceConfig::default(), 7)?.remove(0);
    let magnitude = stft(&x, &cfg)?.magnitude();

    let (_, trace) = griffin_lim_traced(&magnitude, x.len(), &cfg, 64, 1)?;
    for (i, e) in trace.iter().enumerate().step_by(8) {
        println!("iteration {i:>3}: relative magnitude error {e:.4}");
    }

    let mel = mel_spectrogram(&x, &cfg, &mcfg)?;
    let y = griffin_lim_mel(&mel, &cfg, &mcfg, 64, 1)?;
    let back = stft(&y, &cfg)?.magnitude();
    let rel = (&back - &magnitude).mapv(|v| v * v).sum().sqrt() / magnitude.mapv(|v| v * v).sum().sqrt();
    println!("{} mel bands -> waveform: relative magnitude error {rel:.4}", mcfg.n_mels);
    Ok(())
}
