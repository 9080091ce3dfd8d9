use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{fmt_f64, fmt_opt, numeric_columns, read_input, Table};
use super::{as_config, check_grid, grid};
use crate::distributions::ParametricFamily;
use crate::error::{Error, Result};
use crate::portfolio::{
    mv_sweep, sweep_lambda, synth_returns, target_from_mv, MvPortfolio, PortfolioConfig, ReturnMatrix,
    ReturnSynthConfig,
};

/// MV sweep over `mv_grid`, a skew-normal target moment-matched to the MV
/// portfolio at `mv_lambda`, and the entropic sweep over `lambda_star_grid`.
/// Returns come from `synth` or from a file with a `period` column followed
/// by one column per asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioExperiment {
    pub synth: ReturnSynthConfig,
    pub data: Option<PathBuf>,
    pub mv_lambda: f64,
    pub mv_grid: Vec<f64>,
    pub lambda_star_grid: Vec<f64>,
    /// Pull an out-of-range MV skewness to ±0.95 instead of failing.
    pub clip_skewness: bool,
    pub solver: PortfolioConfig,
}

impl Default for PortfolioExperiment {
    fn default() -> Self {
        Self {
            synth: ReturnSynthConfig::default(),
            data: None,
            mv_lambda: 1.0,
            mv_grid: grid(0.0, 10.0, 20),
            lambda_star_grid: grid(0.0, 1.0, 10),
            clip_skewness: false,
            solver: PortfolioConfig::default(),
        }
    }
}

#[derive(Debug, Serialize)]
struct PortfolioResults {
    assets: Vec<String>,
    periods: usize,
    mv: MvPortfolio,
    target: ParametricFamily,
    entropy_monotone: bool,
    w2sq_monotone: bool,
}

pub(super) fn run(
    mut cfg: PortfolioExperiment,
    seed: u64,
    out: &Path,
) -> Result<(PortfolioExperiment, impl Serialize, Vec<String>)> {
    cfg.synth.seed = seed;
    cfg.solver.seed = seed;
    if !(cfg.mv_lambda >= 0.0 && cfg.mv_lambda.is_finite()) {
        return Err(Error::Config(format!("mv_lambda = {} must be finite and nonnegative", cfg.mv_lambda)));
    }
    check_grid("mv_grid", &cfg.mv_grid, 0.0, f64::MAX)?;
    check_grid("lambda_star_grid", &cfg.lambda_star_grid, 0.0, 1.0)?;
    cfg.solver.solver.validate().map_err(as_config)?;
    let r = match &cfg.data {
        Some(path) => read_returns(path)?,
        None => synth_returns(&cfg.synth).map_err(as_config)?,
    };
    let d = r.assets();
    let wcols = (1..=d).map(|j| format!("w{j}"));

    let mut mv_t = Table::new(
        ["lambda", "skewness", "excess_kurtosis", "zero_count"]
            .map(String::from)
            .into_iter()
            .chain(wcols.clone()),
    );
    for p in mv_sweep(&r, &cfg.mv_grid)? {
        let mut row = vec![
            fmt_f64(p.lambda),
            fmt_opt(p.skewness),
            fmt_opt(p.excess_kurtosis),
            p.zero_count.to_string(),
        ];
        row.extend(p.weights.iter().map(|w| fmt_f64(*w)));
        mv_t.push(row);
    }
    mv_t.write(&out.join("mv_sweep.csv"))?;

    let (target, mv) = target_from_mv(&r, cfg.mv_lambda, cfg.clip_skewness)?;
    let rows = sweep_lambda(&r, &target, &cfg.lambda_star_grid, &cfg.solver)?;
    let mut sw = Table::new(
        ["lambda_star", "entropy", "bd_entropy", "w2sq", "objective"]
            .map(String::from)
            .into_iter()
            .chain(wcols),
    );
    for p in &rows {
        let mut row = vec![
            fmt_f64(p.lambda_star),
            fmt_f64(p.portfolio.entropy),
            fmt_f64(p.portfolio.bd_entropy),
            fmt_f64(p.w2sq),
            fmt_f64(p.objective),
        ];
        row.extend(p.portfolio.weights.iter().map(|w| fmt_f64(*w)));
        sw.push(row);
    }
    sw.write(&out.join("sweep.csv"))?;

    let mut by_lambda: Vec<_> = rows.iter().collect();
    by_lambda.sort_by(|a, b| a.lambda_star.total_cmp(&b.lambda_star));
    let entropy_monotone = by_lambda
        .windows(2)
        .all(|p| p[1].portfolio.entropy >= p[0].portfolio.entropy);
    let w2sq_monotone = by_lambda.windows(2).all(|p| p[1].w2sq >= p[0].w2sq);
    let results = PortfolioResults {
        assets: r.labels().to_vec(),
        periods: r.periods(),
        mv,
        target,
        entropy_monotone,
        w2sq_monotone,
    };
    let files = vec!["mv_sweep.csv".to_string(), "sweep.csv".to_string()];
    if !(entropy_monotone && w2sq_monotone) {
        // leave the tables and report behind for inspection, then fail
        super::finish(super::Command::Portfolio, seed, &cfg, &results, files, out)?;
        return Err(Error::numerical(
            "sweep_lambda",
            0,
            "entropy or W2^2 trace is not nondecreasing in lambda*",
        ));
    }
    Ok((cfg, results, files))
}

fn read_returns(path: &Path) -> Result<ReturnMatrix> {
    let t = read_input(path)?;
    if t.header.first().map(String::as_str) != Some("period") || t.header.len() < 2 {
        return Err(Error::Config(format!(
            "{}: expected a period column followed by asset columns",
            path.display()
        )));
    }
    let labels: Vec<String> = t.header[1..].to_vec();
    let cols = numeric_columns(&t, &labels, path)?;
    let rows = (0..t.rows.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    ReturnMatrix::new(rows, labels).map_err(as_config)
}
