mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use funssl_core::network::BlockKind;

#[derive(Parser)]
#[command(name = "funssl", version, about = "Microphone-array sound source localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (JSON); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model; with --resume, continue the run in --out
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        data: PathBuf,
        /// Validation dataset used for the best checkpoint
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: bool,
        /// Seed for parameter initialization
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Decode a dataset and write metrics
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, required_unless_present = "oracle_targets")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, conflicts_with = "calibrate")]
        threshold: Option<f64>,
        /// Pick the threshold where MDR equals FAR on --calib-data
        #[arg(long)]
        calibrate: bool,
        /// Calibration split; defaults to --data
        #[arg(long, requires = "calibrate")]
        calib_data: Option<PathBuf>,
        /// Decode the ground-truth targets instead of model outputs
        #[arg(long, conflicts_with = "checkpoint")]
        oracle_targets: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find the threshold where MDR equals FAR
    Calibrate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the full threshold sweep as CSV
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Localize the sources of one multichannel WAV file
    Infer {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// CSV destination; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic parameter and FLOP counts
    Complexity {
        #[command(flatten)]
        config: ConfigArg,
        /// Block counts to report, e.g. 1,2,3
        #[arg(long, value_delimiter = ',')]
        blocks: Vec<usize>,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<BlockKind>,
        #[arg(long)]
        c1: Option<usize>,
        /// Print CSV instead of a table
        #[arg(long)]
        csv: bool,
    },
    /// Print the effective configuration
    Config {
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn parse_kind(s: &str) -> Result<BlockKind, String> {
    match s {
        "fun" => Ok(BlockKind::Fun),
        "fn" => Ok(BlockKind::Fn),
        _ => Err(format!("unknown block kind {s:?} (fun or fn)")),
    }
}

fn set_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FUNSSL_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow::anyhow!("FUNSSL_THREADS={v:?} is not a positive integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    set_threads()?;
    use commands::*;
    match cli.command {
        Command::Simulate { config, out, count, seed } => simulate(config.config.as_deref(), &out, count, seed),
        Command::Train { config, data, val, out, resume, seed, epochs } => train(TrainArgs {
            config: config.config,
            data,
            val,
            out,
            resume,
            seed,
            epochs,
        }),
        Command::Eval {
            config,
            checkpoint,
            data,
            threshold,
            calibrate,
            calib_data,
            oracle_targets: _,
            out,
        } => eval(EvalArgs {
            config: config.config,
            checkpoint,
            data,
            threshold,
            calibrate,
            calib_data,
            out,
        }),
        Command::Calibrate { config, checkpoint, data, sweep } => {
            calibrate(config.config.as_deref(), &checkpoint, &data, sweep.as_deref())
        }
        Command::Infer { config, checkpoint, wav, threshold, out } => {
            infer(config.config.as_deref(), &checkpoint, &wav, threshold, out.as_deref())
        }
        Command::Complexity { config, blocks, kind, c1, csv } => {
            complexity(config.config.as_deref(), &blocks, kind, c1, csv)
        }
        Command::Config { config } => {
            println!("{}", config::RunConfig::load(config.config.as_deref())?.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<funssl_core::Error>(), Some(funssl_core::Error::Numerical(_))));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}
