use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spcnn::bootstrap::parse_prediction_csv;
use spcnn::network::load_checkpoint;
use spcnn::pipeline::{self, EvalReport, PipelineConfig};
use spcnn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "spcnn",
    version,
    about = "Self-paced CNN training with bootstrap virtual-sample selection"
)]
struct Cli {
    /// Config file (flat key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset as patch files.
    GenData,
    /// Train and evaluate the raw CNN on manual samples only.
    TrainBaseline,
    /// Train the bootstrap ensemble and score the pool.
    Bootstrap {
        #[arg(long, default_value_t = 1)]
        round: usize,
    },
    /// Select virtual samples from a round's predictions.
    Select {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1)]
        round: usize,
    },
    /// Retrain a fresh CNN on manual plus selected virtual samples.
    Retrain {
        #[arg(long, default_value_t = 1)]
        round: usize,
    },
    /// Evaluate a checkpoint on the benchmark set.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run baseline plus the given number of rounds.
    Pipeline {
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Time ensemble training for each worker count.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        workers: Vec<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_report(r: &EvalReport) {
    print!("{}", r.to_text());
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::GenData => {
            pipeline::write_synthetic(&cfg, &cfg.out_dir)?;
            println!("wrote dataset to {}", cfg.out_dir.display());
        }
        Command::TrainBaseline => {
            let data = pipeline::load_data(&cfg)?;
            let (_, report) = pipeline::run_baseline(&cfg, &data)?;
            print_report(&report);
        }
        Command::Bootstrap { round } => {
            let data = pipeline::load_data(&cfg)?;
            let state = pipeline::state_for_round(&cfg, &data, round)?;
            let m = pipeline::bootstrap_stage(&cfg, &state)?;
            println!(
                "scored {} pool patches -> {}",
                m.len(),
                pipeline::predictions_path(&cfg.out_dir, round).display()
            );
        }
        Command::Select { alpha, round } => {
            let alpha = alpha.unwrap_or_else(|| cfg.alpha_for(round));
            let data = pipeline::load_data(&cfg)?;
            let state = pipeline::state_for_round(&cfg, &data, round)?;
            let path = pipeline::predictions_path(&cfg.out_dir, round);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Io(e).context(format!("reading {}", path.display())))?;
            let matrices = parse_prediction_csv(&text)?;
            let report = pipeline::select_stage(&cfg, &state, &matrices, alpha)?;
            println!(
                "alpha = {alpha}: selected {} of {} pool patches",
                report.n_selected,
                matrices.len()
            );
            if let Some(t) = &data.pool_truth {
                if let Some(p) = pipeline::selection_precision(&report, t)? {
                    println!("selection precision = {p:.6}");
                }
            }
        }
        Command::Retrain { round } => {
            let data = pipeline::load_data(&cfg)?;
            let next = pipeline::state_for_round(&cfg, &data, round + 1)?;
            let (_, mut report) = pipeline::retrain_stage(&cfg, &data, round, &next)?;
            report.n_virtual_selected =
                next.train.len() - pipeline::state_for_round(&cfg, &data, round)?.train.len();
            let path = pipeline::report_path(&cfg.out_dir, round);
            std::fs::write(&path, report.to_text())
                .map_err(|e| Error::Io(e).context(format!("writing {}", path.display())))?;
            print_report(&report);
        }
        Command::Evaluate { checkpoint } => {
            let data = pipeline::load_data(&cfg)?;
            let model = load_checkpoint(&checkpoint)?;
            let confusion = pipeline::confusion_matrix(&model, &data.benchmark)?;
            let (accuracy, precision, recall) = pipeline::metrics_from_confusion(&confusion);
            println!("benchmark_accuracy = {accuracy:.6}");
            for c in 0..spcnn::NUM_CLASSES {
                println!(
                    "class {c}: precision = {:.6} recall = {:.6}",
                    precision[c], recall[c]
                );
            }
            println!("confusion = {confusion:?}");
        }
        Command::Pipeline { rounds } => {
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            let reports = pipeline::run_pipeline(&cfg)?;
            print!("{}", pipeline::summary_csv(&reports));
        }
        Command::Bench { workers } => {
            cfg.validate()?;
            let data = pipeline::load_data(&cfg)?;
            let rows = pipeline::benchmark_parallel(&cfg, &data.train, &workers)?;
            print!("{}", pipeline::bench_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
