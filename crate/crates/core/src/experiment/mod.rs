//! Experiment driver behind the command-line tool: a JSON run
//! configuration, one runner per subcommand, CSV tables and a JSON report
//! written to an output directory.
//!
//! Every stochastic piece is seeded from the run seed through named
//! streams, so the files do not depend on the thread count.

pub mod io;
mod fairness;
mod portfolio;
mod reweight;
mod survey;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fairness::FairnessExperiment;
pub use io::{read_table, Table};
pub use portfolio::PortfolioExperiment;
pub use reweight::ReweightExperiment;
pub use survey::{SurveyCell, SurveyExperiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Survey,
    Fairness,
    Portfolio,
    Reweight,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Survey => "survey",
            Command::Fairness => "fairness",
            Command::Portfolio => "portfolio",
            Command::Reweight => "reweight",
        }
    }
}

/// The configuration file. At most one block may be present and it must
/// belong to the subcommand being run; an absent block means all defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub survey: Option<SurveyExperiment>,
    pub fairness: Option<FairnessExperiment>,
    pub portfolio: Option<PortfolioExperiment>,
    pub reweight: Option<ReweightExperiment>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn present(&self) -> Vec<Command> {
        let mut out = Vec::new();
        if self.survey.is_some() {
            out.push(Command::Survey);
        }
        if self.fairness.is_some() {
            out.push(Command::Fairness);
        }
        if self.portfolio.is_some() {
            out.push(Command::Portfolio);
        }
        if self.reweight.is_some() {
            out.push(Command::Reweight);
        }
        out
    }
}

/// Where and how to run. Not part of the report: neither affects the
/// numbers.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub jobs: usize,
}

/// What every runner writes into `report.json`.
#[derive(Debug, Serialize)]
struct Report<C: Serialize, R: Serialize> {
    command: Command,
    seed: u64,
    config: C,
    results: R,
    files: Vec<String>,
}

/// Resolves the configuration for `command`, runs it on a pool of
/// `opts.jobs` threads and writes the outputs. Returns the file names
/// written, `report.json` last.
pub fn run(command: Command, cfg: RunConfig, seed_flag: Option<u64>, opts: &RunOptions) -> Result<Vec<String>> {
    let present = cfg.present();
    if present.len() > 1 {
        let names: Vec<&str> = present.iter().map(|c| c.name()).collect();
        return Err(Error::Config(format!("config has blocks for {}; expected one", names.join(", "))));
    }
    if let Some(&other) = present.first() {
        if other != command {
            return Err(Error::Config(format!(
                "config block is for `{}` but the subcommand is `{}`",
                other.name(),
                command.name()
            )));
        }
    }
    let seed = seed_flag
        .or(cfg.seed)
        .ok_or_else(|| Error::Config("a seed is required (--seed or \"seed\" in the config)".into()))?;
    if opts.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    std::fs::create_dir_all(&opts.out)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", opts.out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", opts.jobs)))?;
    let out = opts.out.as_path();
    pool.install(|| match command {
        Command::Survey => {
            let (config, results, files) = survey::run(cfg.survey.unwrap_or_default(), seed, out)?;
            finish(command, seed, config, results, files, out)
        }
        Command::Fairness => {
            let (config, results, files) = fairness::run(cfg.fairness.unwrap_or_default(), seed, out)?;
            finish(command, seed, config, results, files, out)
        }
        Command::Portfolio => {
            let (config, results, files) = portfolio::run(cfg.portfolio.unwrap_or_default(), seed, out)?;
            finish(command, seed, config, results, files, out)
        }
        Command::Reweight => {
            let block = cfg
                .reweight
                .ok_or_else(|| Error::Config("reweight needs a `reweight` block with atoms and a target".into()))?;
            let (config, results, files) = reweight::run(block, seed, out)?;
            finish(command, seed, config, results, files, out)
        }
    })
}

fn finish<C: Serialize, R: Serialize>(
    command: Command,
    seed: u64,
    config: C,
    results: R,
    mut files: Vec<String>,
    out: &Path,
) -> Result<Vec<String>> {
    files.push("report.json".into());
    let report = Report {
        command,
        seed,
        config,
        results,
        files: files.clone(),
    };
    io::write_json(&out.join("report.json"), &report)?;
    Ok(files)
}

/// `{lo, lo + step, …, hi}` without accumulating rounding error.
pub(crate) fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| {
            if i == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / steps as f64
            }
        })
        .collect()
}

pub(crate) fn check_grid(name: &str, g: &[f64], lo: f64, hi: f64) -> Result<()> {
    if g.is_empty() {
        return Err(Error::Config(format!("{name} is empty")));
    }
    if let Some(v) = g.iter().find(|v| !(**v >= lo && **v <= hi)) {
        return Err(Error::Config(format!("{name} value {v} is outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Configuration-time validation failures are configuration errors, not
/// invalid arguments to the numerics.
pub(crate) fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        Error::Domain { what, value, domain } => Error::Config(format!("{what} = {value} is outside {domain}")),
        other => other,
    }
}
