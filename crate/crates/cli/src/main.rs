use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dynpricer", version, about = "Posted-price welfare experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trace.csv and summary.json
    Run {
        config: PathBuf,
        /// Exit with status 2 when the welfare gap misses its tolerance
        #[arg(long)]
        assert_gap: bool,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `output`, else `out`)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the resolved hyperparameters of a config
    Describe { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(dynpricer_cli::EXIT_ERROR as u8)
        }
    }
}

fn execute(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Describe { config } => {
            let cfg = dynpricer_cli::load(&config, None)?;
            print!("{}", dynpricer_cli::describe(&cfg)?.render());
            Ok(0)
        }
        Command::Run {
            config,
            assert_gap,
            seed,
            out,
        } => {
            if assert_gap {
                // Fail before spending the run when the gap cannot be judged.
                let cfg = dynpricer_cli::load(&config, seed)?;
                anyhow::ensure!(cfg.oracle, "--assert-gap needs the ground-truth oracle (set \"oracle\": true)");
            }
            let (record, dir) = dynpricer_cli::run_to_dir(&config, seed, out.as_deref())?;
            let s = &record.summary;
            let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
            println!(
                "{} seed {}: benchmark {} achieved {} gap {} (tolerance {}), {} queries, {:.2}s -> {}",
                s.algorithm,
                s.seed,
                show(s.benchmark),
                show(s.achieved),
                show(s.gap),
                show(s.tolerance),
                s.query_count,
                s.runtime_seconds,
                dir.display()
            );
            if assert_gap {
                match s.passed {
                    Some(true) => Ok(0),
                    Some(false) => {
                        eprintln!("gap check failed");
                        Ok(dynpricer_cli::EXIT_GAP)
                    }
                    None => anyhow::bail!("gap could not be evaluated"),
                }
            } else {
                Ok(0)
            }
        }
    }
}
