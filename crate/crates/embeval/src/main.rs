//! `embeval` command line: `run` executes a configured evaluation and
//! writes reports; `validate` parses the config and checks referenced
//! files without running anything.
//!
//! Exit codes: 0 success, 1 config error, 2 data/format error, 3 runtime
//! numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use embeval::config::parse_config;
use embeval::report::run_evaluation;

#[derive(Parser)]
#[command(name = "embeval", version, about = "Data-efficiency evaluation for word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured evaluation and write reports.
    Run {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker count (overrides the config).
        #[arg(long)]
        jobs: Option<usize>,
        /// Random seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse a config and check referenced files, without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output,
            jobs,
            seed,
        } => (|| {
            let mut config = parse_config(&config)?;
            if let Some(output) = output {
                config.output_dir = output;
            }
            if let Some(jobs) = jobs {
                if jobs == 0 {
                    return Err(embeval::Error::Config("jobs must be positive".into()));
                }
                config.jobs = jobs;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let (report, summary_path) = run_evaluation(&config)?;
            println!("wrote {}", summary_path.display());
            for row in &report.rank_table {
                println!(
                    "{}: rank_start {:.2} +- {:.2}, rank_end {:.2} +- {:.2}, auc_rank {:.2} +- {:.2}",
                    row.embedding,
                    row.rank_start.mean,
                    row.rank_start.std,
                    row.rank_end.mean,
                    row.rank_end.std,
                    row.auc_rank.mean,
                    row.auc_rank.std,
                );
            }
            Ok(())
        })(),
        Command::Validate { config } => parse_config(&config).map(|config| {
            println!(
                "ok: {} embedding(s), {} task(s)",
                config.embeddings.len(),
                config.tasks.len()
            );
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
