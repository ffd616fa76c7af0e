//! SDR, SI-SDR and segment MSE of progressively degraded estimates.

use fusesep::metrics::{mean, sdr, segment_mse, si_sdr, si_sdri};
use fusesep::synthbench::{gen_sources, mix, SourceConfig};
use fusesep::TimeSignal;

fn main() -> fusesep::Result<()> {
    let sources = gen_sources(2, 8000, 8000, &SourceConfig::default(), 1)?;
    let (mixture, gains) = mix(&sources, [0.0, 5.0], 2)?;
    let v = TimeSignal::new(sources[0].samples().iter().map(|s| s * gains[0]).collect(), 8000)?;
    println!("mixture:  SI-SDR {:7.3} dB", si_sdr(&v, &mixture)?);
    for leak in [0.3, 0.1, 0.03] {
        let est: Vec<f64> = v.samples().iter().zip(mixture.samples()).map(|(a, m)| a + leak * (m - a)).collect();
        let est = TimeSignal::new(est, 8000)?;
        // a gain change leaves SI-SDR alone but moves SDR
        let loud = TimeSignal::new(est.samples().iter().map(|s| 2.0 * s).collect(), 8000)?;
        println!(
            "leak {leak:4}: SI-SDR {:7.3}  SI-SDRi {:6.3}  SDR {:7.3}  SDR x2 {:7.3}  mean 20 ms MSE {:.2e}",
            si_sdr(&v, &est)?,
            si_sdri(&v, &est, &mixture)?,
            sdr(&v, &est)?,
            sdr(&v, &loud)?,
            mean(&segment_mse(&v, &est, 0.02)?)
        );
    }
    Ok(())
}
