//! Command-line front end. `main` only forwards to [`run`].
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::alignment::{align, apply_alignment, xcorr_fuse};
use crate::bounds::{
    default_mi_ref, rho_curve, write_plot_script, write_rho_csv, BoundInputs, BoundReport, GENERATIVE_GAIN_DB,
};
use crate::config::CliConfig;
use crate::error::Error;
use crate::fusion::{
    apply_fusion, learned_fuse, load_checkpoint, load_dataset, oracle_weights, save_checkpoint, train_combiner,
    train_from, CombinerParams, TrainOutcome,
};
use crate::metrics::{
    hungarian_assign, mean, median, sdr, segment_mse, si_sdr, SEGMENT_SECONDS,
};
use crate::spectral::{istft, stft, SpectralConfig, TimeSignal};
use crate::synthbench::{calibrate_parity, dump_instance_wavs, make_training_set, run_benchmark, write_parity_json};
use crate::wav::{read_wav, write_wav, WavFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(m) => Failure::Usage(format!("invalid configuration: {m}")),
            other => Failure::Data(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

#[derive(Parser)]
#[command(name = "fusesep", version, about = "Fuse deterministic and generative source-separation estimates")]
struct Cli {
    /// JSON config file (sections: spectral, mel, train, train_set, bench, bounds, parity).
    /// Missing keys take their defaults; print them with `fusesep config`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a deterministic and a generative estimate into one waveform.
    Fuse(FuseArgs),
    /// Classical and generative SDR upper bounds in dB.
    Bounds(BoundsArgs),
    /// Information ratio rho over a grid of generative noise variances.
    Rho(RhoArgs),
    /// Run the synthetic benchmark and write CSV reports.
    Bench(BenchArgs),
    /// Train the convolutional combiner and write a checkpoint.
    Train(TrainArgs),
    /// SI-SDR, SDR and segment-MSE statistics of estimates against references.
    Metrics(MetricsArgs),
    /// Cross-correlation alignment of a generative estimate onto a deterministic one.
    Align(AlignArgs),
    /// Print the effective configuration (defaults merged with --config) as JSON.
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum FuseStrategy {
    Xcorr,
    Oracle,
    Learned,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pcm16,
    Float32,
}

impl From<Format> for WavFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Pcm16 => WavFormat::Pcm16,
            Format::Float32 => WavFormat::Float32,
        }
    }
}

#[derive(Args)]
struct FuseArgs {
    /// Deterministic estimate (WAV).
    #[arg(long)]
    det: PathBuf,
    /// Generative estimate (WAV).
    #[arg(long)]
    gen: PathBuf,
    #[arg(long, value_enum, default_value = "xcorr")]
    strategy: FuseStrategy,
    /// Reference source; required by `oracle`, enables SI-SDR reporting.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Combiner checkpoint; required by `learned`.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Ridge weight for the oracle weights.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
    /// Metrics JSON path [default: <out>.json].
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "float32")]
    format: Format,
}

#[derive(Args)]
struct BoundsArgs {
    /// Signal length L in samples.
    #[arg(long)]
    signal_len: Option<f64>,
    /// Segment width w in samples.
    #[arg(long)]
    segment_width: Option<f64>,
    /// Source variance.
    #[arg(long, default_value_t = 1.0)]
    var: f64,
    /// Reference mutual information [default: Laplace/AWGN value for bounds.n_sources].
    #[arg(long)]
    mi_ref: Option<f64>,
    /// Print only the classical bound.
    #[arg(long, conflicts_with = "generative")]
    classical: bool,
    /// Print only the generative bound.
    #[arg(long)]
    generative: bool,
    /// Convert given classical bounds (dB, comma separated) to generative bounds.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    from_classical: Vec<f64>,
    /// Write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RhoArgs {
    /// Explicit noise variances, comma separated and increasing.
    #[arg(long, value_delimiter = ',')]
    sigma2_grid: Vec<f64>,
    /// Log-spaced grid `lo,hi,n`, used when --sigma2-grid is absent.
    #[arg(long, value_delimiter = ',', default_value = "1e-4,10,25")]
    log_grid: Vec<f64>,
    /// Reference mutual information [default: Laplace/AWGN value for bounds.n_sources].
    #[arg(long)]
    mi_ref: Option<f64>,
    #[arg(long, default_value = "rho.csv")]
    out: PathBuf,
    /// Also write a gnuplot script plotting the CSV.
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override bench.n_instances.
    #[arg(long)]
    instances: Option<usize>,
    /// Override bench.n_sources.
    #[arg(long)]
    sources: Option<usize>,
    /// Override bench.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Combiner checkpoint for the learned strategy.
    #[arg(long, conflicts_with = "train")]
    params: Option<PathBuf>,
    /// Train a combiner on train_set instances first (saved as <out>/combiner.json).
    #[arg(long)]
    train: bool,
    /// Also calibrate the generative noise for MSE parity (writes parity.json).
    #[arg(long)]
    calibrate: bool,
    /// Write WAVs of the flagged instance into <out>/wav.
    #[arg(long)]
    dump_wavs: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (one subdirectory per example).
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Train on this many synthetic instances instead (train_set.seed onward).
    #[arg(long)]
    synthetic: Option<usize>,
    /// Checkpoint to continue from instead of a fresh initialization.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Per-epoch loss log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Reference source(s). With several, estimates are assigned by Hungarian matching.
    #[arg(long, required = true, num_args = 1..)]
    reference: Vec<PathBuf>,
    /// Estimates to score.
    #[arg(long, required = true, num_args = 1..)]
    estimate: Vec<PathBuf>,
    /// Mixture, for SI-SDR improvement.
    #[arg(long)]
    mixture: Option<PathBuf>,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    det: PathBuf,
    #[arg(long)]
    gen: PathBuf,
    /// Aligned generative estimate `istft(T * Vg)`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-frame delays (CSV).
    #[arg(long)]
    delays: Option<PathBuf>,
    /// Equal-weight fusion `istft(Vd + T * Vg)`.
    #[arg(long)]
    fused: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "float32")]
    format: Format,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => CliConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => Failure::Usage(e.to_string()),
            other => Failure::from(other),
        })?,
        None => CliConfig::default(),
    };
    match cli.command {
        Command::Fuse(a) => cmd_fuse(&cfg, a),
        Command::Bounds(a) => cmd_bounds(&cfg, a),
        Command::Rho(a) => cmd_rho(&cfg, a),
        Command::Bench(a) => cmd_bench(cfg, a),
        Command::Train(a) => cmd_train(cfg, a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Align(a) => cmd_align(&cfg, a),
        Command::Config => {
            println!("{}", cfg.to_json()?);
            Ok(())
        }
    }
}

/// Reads WAVs that must share one sample rate and length.
fn read_matching(paths: &[&Path]) -> CliResult<Vec<TimeSignal>> {
    let signals = paths.iter().map(read_wav).collect::<crate::Result<Vec<_>>>()?;
    let first = &signals[0];
    for (p, s) in paths.iter().zip(&signals).skip(1) {
        if s.sample_rate() != first.sample_rate() {
            return Err(Failure::Data(Error::InvalidInput(format!(
                "{} is {} Hz but {} is {} Hz",
                p.display(),
                s.sample_rate(),
                paths[0].display(),
                first.sample_rate()
            ))));
        }
        if s.len() != first.len() {
            return Err(Failure::Data(Error::shape(
                format!("{} samples", first.len()),
                format!("{} samples in {}", s.len(), p.display()),
            )));
        }
    }
    Ok(signals)
}

/// The configured transform at the files' sample rate.
fn spectral_at(cfg: &CliConfig, rate: u32) -> SpectralConfig {
    SpectralConfig {
        sample_rate: rate,
        ..cfg.spectral.clone()
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn cmd_fuse(cfg: &CliConfig, a: FuseArgs) -> CliResult<()> {
    match a.strategy {
        FuseStrategy::Oracle if a.reference.is_none() => return usage("strategy oracle requires --reference"),
        FuseStrategy::Learned if a.params.is_none() => return usage("strategy learned requires --params"),
        _ => {}
    }
    let mut paths = vec![a.det.as_path(), a.gen.as_path()];
    if let Some(r) = &a.reference {
        paths.push(r);
    }
    let signals = read_matching(&paths)?;
    let spc = spectral_at(cfg, signals[0].sample_rate());
    spc.validate()?;
    let vd = stft(&signals[0], &spc)?;
    let vg = stft(&signals[1], &spc)?;
    let (name, out) = match a.strategy {
        FuseStrategy::Xcorr => ("xcorr", xcorr_fuse(&vd, &vg)?),
        FuseStrategy::Oracle => {
            let vref = stft(&signals[2], &spc)?;
            ("oracle", apply_fusion(&vd, &vg, &oracle_weights(&vd, &vg, &vref, a.lambda)?)?)
        }
        FuseStrategy::Learned => {
            let params = load_checkpoint(a.params.as_ref().expect("checked above"))?;
            ("learned", learned_fuse(&params, &vd, &vg)?)
        }
    };
    write_wav(&a.out, &out, a.format.into())?;
    let mut report = json!({
        "strategy": name,
        "sample_rate": out.sample_rate(),
        "samples": out.len(),
    });
    if let Some(r) = signals.get(2) {
        report["si_sdr"] = json!(si_sdr(r, &out)?);
        report["sdr"] = json!(sdr(r, &out)?);
        report["si_sdr_det"] = json!(si_sdr(r, &signals[0])?);
        report["si_sdr_gen"] = json!(si_sdr(r, &signals[1])?);
    }
    let metrics = a.metrics.unwrap_or_else(|| a.out.with_extension("json"));
    write_json(&metrics, &report)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn reference_mi(cfg: &CliConfig, given: Option<f64>) -> CliResult<f64> {
    match given {
        Some(m) => Ok(m),
        None => Ok(default_mi_ref(cfg.bounds.n_sources, &cfg.bounds.quadrature)?),
    }
}

fn cmd_bounds(cfg: &CliConfig, a: BoundsArgs) -> CliResult<()> {
    if !a.from_classical.is_empty() {
        let rows: Vec<_> = a
            .from_classical
            .iter()
            .map(|c| {
                let g = c + GENERATIVE_GAIN_DB;
                println!("classical {c:.4} dB -> generative {g:.4} dB");
                json!({ "classical_db": c, "generative_db": g })
            })
            .collect();
        if let Some(p) = &a.json {
            write_json(p, &json!(rows))?;
        }
        return Ok(());
    }
    let (Some(signal_len), Some(segment_width)) = (a.signal_len, a.segment_width) else {
        return usage("bounds needs --signal-len and --segment-width (or --from-classical)");
    };
    let inputs = BoundInputs {
        signal_len,
        segment_width,
        var_v: a.var,
        mi_ref: reference_mi(cfg, a.mi_ref)?,
    };
    let report = BoundReport::new(inputs, Vec::new())?;
    if !a.generative {
        println!("classical {:.4} dB", report.classical_db);
    }
    if !a.classical {
        println!("generative {:.4} dB", report.generative_db);
    }
    if let Some(p) = &a.json {
        write_json(p, &serde_json::to_value(&report).map_err(Error::from)?)?;
    }
    Ok(())
}

fn cmd_rho(cfg: &CliConfig, a: RhoArgs) -> CliResult<()> {
    let grid = if a.sigma2_grid.is_empty() {
        let [lo, hi, n] = a.log_grid[..] else {
            return usage("--log-grid takes lo,hi,n");
        };
        if !(lo > 0.0 && hi >= lo && n >= 1.0 && n.fract() == 0.0) {
            return usage("--log-grid needs 0 < lo <= hi and an integer n >= 1");
        }
        let n = n as usize;
        (0..n)
            .map(|i| {
                let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                10f64.powf(lo.log10() + t * (hi.log10() - lo.log10()))
            })
            .collect()
    } else {
        a.sigma2_grid.clone()
    };
    let mi_ref = reference_mi(cfg, a.mi_ref)?;
    let points = rho_curve(&grid, mi_ref, &cfg.bounds.quadrature)?;
    let file = File::create(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_rho_csv(&points, file)?;
    if let Some(p) = &a.plot_script {
        let name = a.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        write_plot_script(p, &name)?;
    }
    for p in &points {
        println!("sigma2 {:.4e}  rho {:.6}", p.sigma2, p.rho);
    }
    Ok(())
}

fn save_log(outcome: &TrainOutcome, path: &Path) -> CliResult<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for l in &outcome.log {
        w.serialize(l).map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn cmd_bench(mut cfg: CliConfig, a: BenchArgs) -> CliResult<()> {
    if let Some(n) = a.instances {
        cfg.bench.n_instances = n;
    }
    if let Some(c) = a.sources {
        cfg.bench.n_sources = c;
    }
    if let Some(s) = a.seed {
        cfg.bench.seed = s;
    }
    cfg.bench.validate()?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let params: Option<CombinerParams> = if a.train {
        let data = make_training_set(&cfg.bench, cfg.train_set.instances, cfg.train_set.seed)?;
        let outcome = train_combiner(&data, &cfg.bench.spectral, &cfg.train)?;
        save_checkpoint(&outcome.params, a.out.join("combiner.json"))?;
        save_log(&outcome, &a.out.join("train_log.csv"))?;
        Some(outcome.params)
    } else {
        a.params.as_ref().map(load_checkpoint).transpose()?
    };
    let report = run_benchmark(&cfg.bench, params.as_ref())?;
    report.save(&a.out)?;
    for s in &report.summary {
        println!(
            "{:<14} median SI-SDRi {:7.3} dB  mean {:7.3} dB  (n = {})",
            s.strategy.name(),
            s.median_si_sdri,
            s.mean_si_sdri,
            s.n
        );
    }
    if a.calibrate {
        let parity = calibrate_parity(&cfg.bench, cfg.parity.instances, cfg.parity.tolerance)?;
        write_parity_json(&parity, a.out.join("parity.json"))?;
        println!(
            "parity: sigma2 {:.4e}, mean ratio {:.3}, W1 {:.4e} (threshold {:.4e})",
            parity.sigma2, parity.mean_ratio, parity.wasserstein, parity.threshold
        );
    }
    if a.dump_wavs {
        dump_instance_wavs(&cfg.bench, report.flagged_instance(), params.as_ref(), a.out.join("wav"))?;
    }
    Ok(())
}

fn cmd_train(mut cfg: CliConfig, a: TrainArgs) -> CliResult<()> {
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(lr) = a.learning_rate {
        cfg.train.learning_rate = lr;
    }
    cfg.train.validate()?;
    let data = match (&a.dataset, a.synthetic) {
        (Some(dir), _) => load_dataset(dir)?,
        (None, Some(n)) => make_training_set(&cfg.bench, n, cfg.train_set.seed)?,
        (None, None) => return usage("train needs --dataset or --synthetic"),
    };
    let rate = data.first().map(|d| d.mixture.sample_rate()).unwrap_or(cfg.spectral.sample_rate);
    let spc = spectral_at(&cfg, rate);
    let outcome = match &a.init {
        Some(p) => train_from(load_checkpoint(p)?, &data, &spc, &cfg.train)?,
        None => train_combiner(&data, &spc, &cfg.train)?,
    };
    save_checkpoint(&outcome.params, &a.out)?;
    if let Some(p) = &a.log {
        save_log(&outcome, p)?;
    }
    for l in &outcome.log {
        println!("epoch {:3}  loss {:9.4}  SI-SDR {:8.3} dB", l.epoch, l.mean_loss, l.mean_si_sdr);
    }
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> CliResult<()> {
    let mut paths: Vec<&Path> = a.reference.iter().map(PathBuf::as_path).collect();
    paths.extend(a.estimate.iter().map(PathBuf::as_path));
    if let Some(m) = &a.mixture {
        paths.push(m);
    }
    let signals = read_matching(&paths)?;
    let n_ref = a.reference.len();
    let refs = &signals[..n_ref];
    let ests = &signals[n_ref..n_ref + a.estimate.len()];
    let mixture = a.mixture.as_ref().map(|_| &signals[signals.len() - 1]);
    // estimate index scored against each reference
    let pairs: Vec<(usize, usize)> = if n_ref == 1 {
        (0..ests.len()).map(|j| (0, j)).collect()
    } else {
        if n_ref != ests.len() {
            return usage("with several references, give one estimate per reference");
        }
        let cost = refs
            .iter()
            .map(|r| ests.iter().map(|e| si_sdr(r, e).map(|v| -v)).collect::<crate::Result<Vec<_>>>())
            .collect::<crate::Result<Vec<_>>>()?;
        hungarian_assign(&cost)?.permutation.into_iter().enumerate().collect()
    };
    let mut rows = Vec::new();
    for (i, j) in pairs {
        let (r, e) = (&refs[i], &ests[j]);
        let mse = segment_mse(r, e, SEGMENT_SECONDS)?;
        let mut row = json!({
            "reference": a.reference[i].display().to_string(),
            "estimate": a.estimate[j].display().to_string(),
            "si_sdr": si_sdr(r, e)?,
            "sdr": sdr(r, e)?,
            "segment_mse_mean": mean(&mse),
            "segment_mse_median": median(&mse),
        });
        if let Some(m) = mixture {
            row["si_sdri"] = json!(si_sdr(r, e)? - si_sdr(r, m)?);
        }
        rows.push(row);
    }
    let report = json!({ "results": rows });
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn cmd_align(cfg: &CliConfig, a: AlignArgs) -> CliResult<()> {
    let signals = read_matching(&[a.det.as_path(), a.gen.as_path()])?;
    let spc = spectral_at(cfg, signals[0].sample_rate());
    spc.validate()?;
    let vd = stft(&signals[0], &spc)?;
    let vg = stft(&signals[1], &spc)?;
    let alignment = align(&vd, &vg)?;
    if let Some(p) = &a.out {
        write_wav(p, &istft(&apply_alignment(&vg, &alignment)?, &spc)?, a.format.into())?;
    }
    if let Some(p) = &a.fused {
        write_wav(p, &xcorr_fuse(&vd, &vg)?, a.format.into())?;
    }
    if let Some(p) = &a.delays {
        let file = File::create(p).map_err(|e| Error::io(p, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["frame", "delay_samples"]).map_err(Error::from)?;
        for (k, d) in alignment.delays.iter().enumerate() {
            w.write_record([k.to_string(), d.to_string()]).map_err(Error::from)?;
        }
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    let delays = &alignment.delays;
    let nonzero = delays.iter().filter(|d| **d != 0).count();
    println!(
        "{} frames, {} with nonzero delay, median delay {} samples",
        delays.len(),
        nonzero,
        median(&delays.iter().map(|d| *d as f64).collect::<Vec<_>>())
    );
    Ok(())
}
