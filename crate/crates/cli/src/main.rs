use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use odup_core::pipeline::{
    cmd_report, compress_model, load_data, parse_delimiter, records_to_csv, simulate, summary, synth_dataset,
    train_cloud, write_reports, ExperimentConfig, Run, TrainRecord,
};
use odup_core::recommender::{decode_checkpoint, encode_checkpoint};
use odup_core::sessiondata::write_cache;
use odup_core::wire::encode_model;
use odup_core::Error;

#[derive(Parser)]
#[command(name = "odup", version, about = "Compressed on-device model updates for session recommenders")]
struct Cli {
    /// Experiment config (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the run seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the event-log delimiter (`tab`, `comma` or one character)
    #[arg(long, global = true)]
    delimiter: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the cloud recommender on every slice and save checkpoints
    Train,
    /// Compress a checkpoint into a codes-plus-codebooks model file
    Compress {
        /// Checkpoint to compress; defaults to the last one under <out>/checkpoints
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the cloud/device update loop and write per-slice reports
    Simulate,
    /// Summarize run directories into comparison tables
    Report {
        /// Run directories, or directories containing runs
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Write the configured synthetic stream as an event log and dataset cache
    Synth,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Capacity { .. } | Error::EmptyDataset(_) => 2,
        Error::Data(_) | Error::Io(_) | Error::Json(_) | Error::IndexOutOfRange { .. } | Error::ShapeMismatch { .. } => 3,
        Error::TrainingDiverged { .. } => 4,
        Error::Divergence(_) | Error::StaleDelta { .. } | Error::Wire(_) => 5,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(d) = &cli.delimiter {
        cfg.delimiter = parse_delimiter(d)?;
    }
    Ok(cfg)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Data problems surface as data errors, except config and empty-input errors.
fn data_stage<T>(r: Result<T, Error>) -> Result<T, Error> {
    r.map_err(|e| match e {
        Error::Wire(w) => Error::Data(w.to_string()),
        Error::InvalidArgument(m) => Error::Data(m),
        other => other,
    })
}

fn checkpoint_path(out: &Path, slice: u32) -> PathBuf {
    out.join("checkpoints").join(format!("slice_{slice}.odck"))
}

fn cmd_train(cfg: &ExperimentConfig) -> Result<(), Error> {
    let (_, data) = data_stage(load_data(cfg))?;
    let rounds = train_cloud(cfg, &data)?;
    let mut records = Vec::new();
    for (round, slice) in rounds.iter().zip(&data.slices) {
        write(&checkpoint_path(&cfg.out, round.slice), &encode_checkpoint(&round.model)?)?;
        let rec = TrainRecord::from_round(round, slice.len());
        println!(
            "slice {}: {} pairs, loss {:.4}, Prec@10 {:.4}, NDCG@10 {:.4}",
            rec.slice, rec.pairs, rec.final_loss, rec.p10, rec.n10
        );
        records.push(rec);
    }
    write(&cfg.out.join("train.csv"), &records_to_csv(&records)?)?;
    Ok(())
}

fn cmd_compress(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(), Error> {
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => {
            let dir = cfg.out.join("checkpoints");
            let mut found: Vec<(u32, PathBuf)> = std::fs::read_dir(&dir)
                .map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter_map(|p| {
                    let stem = p.file_stem()?.to_str()?.strip_prefix("slice_")?.parse().ok()?;
                    Some((stem, p))
                })
                .collect();
            found.sort();
            found.pop().map(|(_, p)| p).ok_or_else(|| Error::Data(format!("no checkpoints in {}", dir.display())))?
        }
    };
    let bytes = std::fs::read(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let model = data_stage(decode_checkpoint(&bytes))?;
    let c = compress_model(cfg, &model)?;
    let encoded = encode_model(&c.store, &c.codes)?;
    let target = cfg.out.join("model.odcm");
    write(&target, &encoded)?;
    println!(
        "{}: |V|={} d={} -> {} ({} bytes), relative MSE {:.4}, CR {:.2}",
        path.display(),
        model.vocab(),
        model.d(),
        target.display(),
        encoded.len(),
        c.relative_mse,
        c.model_cr
    );
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<(), Error> {
    let (_, data) = data_stage(load_data(cfg))?;
    let sim = simulate(cfg, &data)?;
    write_reports(&cfg.out, &sim.reports)?;
    for (report, frame) in sim.reports.iter().zip(&sim.frames) {
        if let Some(bytes) = frame {
            write(&cfg.out.join("frames").join(format!("slice_{}.odup", report.slice)), bytes)?;
        }
    }
    write(&cfg.out.join("config.txt"), cfg.to_text().as_bytes())?;
    let run = Run {
        name: cfg.out.file_name().map_or("run".into(), |n| n.to_string_lossy().into_owned()),
        reports: sim.reports,
    };
    print!("{}", summary(&[run]));
    Ok(())
}

fn cmd_synth(cfg: &ExperimentConfig) -> Result<(), Error> {
    let (log, vocab, data) = synth_dataset(cfg)?;
    let mut events = Vec::new();
    log.write(&mut events, cfg.delimiter)?;
    write(&cfg.out.join("events.tsv"), &events)?;
    write(&cfg.out.join("dataset.odds"), &write_cache(&vocab, &data)?)?;
    println!(
        "{} events, {} slices, {} test pairs -> {}",
        log.len(),
        data.slices.len(),
        data.test.len(),
        cfg.out.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Compress { checkpoint } => cmd_compress(&cfg, checkpoint.as_deref()),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Report { runs } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("summary"));
            print!("{}", data_stage(cmd_report(runs, &out))?);
            Ok(())
        }
        Command::Synth => cmd_synth(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("odup: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
