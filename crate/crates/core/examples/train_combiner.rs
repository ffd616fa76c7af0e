//! Trains a small combiner on synthetic instances and saves a checkpoint.
//!
//! `cargo run --release --example train_combiner -- [instances] [epochs]`

use fusesep::fusion::{dataset_si_sdr, save_checkpoint, train_combiner, TrainConfig};
use fusesep::synthbench::{make_training_set, BenchConfig};

fn main() -> fusesep::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("a count"));
    let n = args.next().unwrap_or(8);
    let epochs = args.next().unwrap_or(5);
    let bench = BenchConfig::default();
    let data = make_training_set(&bench, n, 1_000_000)?;
    let tcfg = TrainConfig { epochs, ..TrainConfig::default() };
    let outcome = train_combiner(&data, &bench.spectral, &tcfg)?;
    for l in &outcome.log {
        println!("epoch {:>3}  loss {:8.3}  SI-SDR {:7.3} dB", l.epoch, l.mean_loss, l.mean_si_sdr);
    }
    let held_out = make_training_set(&bench, 4, 2_000_000)?;
    println!("held-out SI-SDR {:.3} dB", dataset_si_sdr(&outcome.params, &held_out, &bench.spectral)?);
    let path = std::env::temp_dir().join("fusesep_combiner.json");
    save_checkpoint(&outcome.params, &path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}
