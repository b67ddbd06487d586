use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kbc_cli::commands::{self, EvalArgs, EvalSplit, LoadedModel, TrainArgs};
use kbc_cli::CliError;

/// Train and inspect knowledge-base completion models.
#[derive(Parser)]
#[command(name = "kbc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes config, checkpoints and reports to the run directory.
    Train {
        config: PathBuf,
        /// Run directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        /// Override any config value, e.g. `--set sampler.kind=rns`.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Filtered MRR / Hits@k of a checkpoint.
    Eval {
        /// Run configuration (e.g. the config.toml written by `train`).
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Also write `key = value` metrics here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Most cosine-similar entities.
    Neighbors {
        checkpoint: PathBuf,
        entity: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// Entity dictionary (default: entities.dict beside the checkpoint).
        #[arg(long)]
        dict: Option<PathBuf>,
    },
    /// Sampling weight of a candidate relative to uniform sampling.
    ProbeOdds {
        checkpoint: PathBuf,
        query: String,
        candidate: String,
        #[arg(long)]
        dict: Option<PathBuf>,
    },
    /// Merge epoch reports into a CSV of validation curves.
    Curves {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// One label per report (default: the run directory name).
        #[arg(long = "label")]
        labels: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entity embeddings as `name<TAB>v1 v2 ...` text.
    Export {
        checkpoint: PathBuf,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Valid,
    Test,
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train {
            config,
            out,
            seed,
            max_epochs,
            threads,
            set,
        } => {
            let s = commands::train(&TrainArgs {
                config,
                out,
                seed,
                max_epochs,
                threads,
                set,
            })?;
            println!("run directory: {}", s.run_dir.display());
            println!("epochs: {} (best {})", s.epochs, s.best_epoch);
            if let Some(m) = s.best_valid_mrr {
                println!("best valid MRR: {:.1}", 100.0 * m);
            }
            if let Some(t) = &s.test {
                print!("{}", t.to_table());
            }
            Ok(())
        }
        Command::Eval {
            config,
            checkpoint,
            split,
            out,
            set,
        } => {
            let split = match split {
                SplitArg::Valid => EvalSplit::Valid,
                SplitArg::Test => EvalSplit::Test,
            };
            let report = commands::eval(&EvalArgs {
                config,
                checkpoint,
                split,
                out,
                set,
            })?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Neighbors {
            checkpoint,
            entity,
            k,
            dict,
        } => {
            let m = LoadedModel::open(&checkpoint, dict.as_deref())?;
            print!("{}", commands::render_neighbors(&m.neighbors(&entity, k)?));
            Ok(())
        }
        Command::ProbeOdds {
            checkpoint,
            query,
            candidate,
            dict,
        } => {
            let m = LoadedModel::open(&checkpoint, dict.as_deref())?;
            print!("{}", m.probe_odds(&query, &candidate)?.render());
            Ok(())
        }
        Command::Curves {
            reports,
            labels,
            out,
        } => emit(out.as_ref(), &commands::curves(&reports, &labels)?),
        Command::Export {
            checkpoint,
            dict,
            out,
        } => {
            let m = LoadedModel::open(&checkpoint, dict.as_deref())?;
            let mut buf = Vec::new();
            commands::export(&m, &mut buf)?;
            match out {
                Some(p) => std::fs::write(&p, &buf)
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
                None => std::io::stdout()
                    .write_all(&buf)
                    .map_err(|e| CliError::Data(e.to_string())),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
