use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otreweight::experiment::{run, Command, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "otreweight", version, about = "W2-constrained maximum-entropy reweighting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// overrides the seed in the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker threads
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Monte Carlo table for MLE, PMLE and BDCM under informative selection
    Survey,
    /// fair regression: group CDFs and W2 for three fitting schemes
    Fairness,
    /// mean-variance and entropy-W2 portfolio sweeps
    Portfolio,
    /// reweight atoms toward a parametric target
    Reweight,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Survey => Command::Survey,
        Cmd::Fairness => Command::Fairness,
        Cmd::Portfolio => Command::Portfolio,
        Cmd::Reweight => Command::Reweight,
    };
    let result = cli
        .config
        .as_deref()
        .map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
        .and_then(|cfg| {
            run(
                command,
                cfg,
                cli.seed,
                &RunOptions {
                    out: cli.out.clone(),
                    jobs: cli.jobs,
                },
            )
        });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", cli.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
