use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{fmt_f64, fmt_opt, numeric_columns, read_input, Table};
use super::as_config;
use crate::error::{Error, Result};
use crate::survey::simulation::{run_simulation, Method, SummaryRow};
use crate::survey::{
    bdcm_fit, mle_fit, pmle_fit, BdcmConfig, EstimatingFunction, MeatEstimator, SimulationConfig, SurveyModel,
    SurveySample,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyCell {
    pub n: usize,
    pub rho: f64,
}

/// Monte Carlo table over `(n, ρ)` cells, or, with `data`, one fit of
/// `(μ, σ²)` for the first column of a survey file with columns
/// `x1..xd,pi`.
///
/// Each cell overrides `sample_size` and `rho` of `simulation`. The BDCM
/// pseudo-population size and bootstrap count always come from
/// `simulation.population_size` and `simulation.bootstrap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurveyExperiment {
    pub cells: Vec<SurveyCell>,
    pub simulation: SimulationConfig,
    pub methods: Vec<Method>,
    pub meat: MeatEstimator,
    pub bdcm: BdcmConfig,
    pub data: Option<PathBuf>,
}

impl Default for SurveyExperiment {
    fn default() -> Self {
        Self {
            cells: vec![SurveyCell { n: 500, rho: 0.5 }],
            simulation: SimulationConfig::default(),
            methods: Method::ALL.to_vec(),
            meat: MeatEstimator::default(),
            bdcm: BdcmConfig::default(),
            data: None,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum SurveyResults {
    Table { summary: Vec<SummaryRow> },
    Data { n: usize, fits: Vec<DataFit> },
}

#[derive(Debug, Serialize)]
struct DataFit {
    method: Method,
    theta: Vec<f64>,
    ci: Vec<(f64, f64)>,
}

pub(super) fn run(
    mut cfg: SurveyExperiment,
    seed: u64,
    out: &Path,
) -> Result<(SurveyExperiment, impl Serialize, Vec<String>)> {
    if cfg.methods.is_empty() {
        return Err(Error::Config("methods is empty".into()));
    }
    cfg.simulation.seed = seed;
    cfg.bdcm.population_size = cfg.simulation.population_size;
    cfg.bdcm.replicates = cfg.simulation.bootstrap.max(2);
    cfg.bdcm.solver.validate().map_err(as_config)?;

    if let Some(path) = cfg.data.clone() {
        let (n, fits, files) = run_data(&cfg, &path, seed, out)?;
        return Ok((cfg, SurveyResults::Data { n, fits }, files));
    }
    if cfg.cells.is_empty() {
        return Err(Error::Config("cells is empty".into()));
    }
    let mut summary_t = Table::new(["n", "rho", "method", "bias", "coverage", "bias_sd_scale", "failures"]);
    let mut reps_t = Table::new(["n", "rho", "replicate", "method", "mu", "sigma2", "covered"]);
    let mut summary = Vec::new();
    for cell in &cfg.cells {
        let sim = SimulationConfig {
            sample_size: cell.n,
            rho: cell.rho,
            ..cfg.simulation.clone()
        };
        sim.validate()?;
        let report = run_simulation(&sim, &cfg.methods, &cfg.bdcm, cfg.meat)?;
        for row in &report.summary {
            summary_t.push(vec![
                row.n.to_string(),
                fmt_f64(row.rho),
                row.method.name().into(),
                fmt_f64(row.bias),
                fmt_f64(row.coverage),
                fmt_f64(row.bias_sd_scale),
                row.failures.to_string(),
            ]);
        }
        for r in &report.replicates {
            reps_t.push(vec![
                cell.n.to_string(),
                fmt_f64(cell.rho),
                r.replicate.to_string(),
                r.method.name().into(),
                fmt_opt(r.estimate.map(|e| e[0])),
                fmt_opt(r.estimate.map(|e| e[1])),
                (r.covered as u8).to_string(),
            ]);
        }
        summary.extend(report.summary);
    }
    summary_t.write(&out.join("summary.csv"))?;
    reps_t.write(&out.join("replicates.csv"))?;
    Ok((
        cfg,
        SurveyResults::Table { summary },
        vec!["summary.csv".into(), "replicates.csv".into()],
    ))
}

fn run_data(cfg: &SurveyExperiment, path: &Path, seed: u64, out: &Path) -> Result<(usize, Vec<DataFit>, Vec<String>)> {
    let t = read_input(path)?;
    let mut xs: Vec<(usize, String)> = t
        .header
        .iter()
        .filter_map(|h| h.strip_prefix('x').and_then(|k| k.parse().ok()).map(|k: usize| (k, h.clone())))
        .collect();
    xs.sort();
    if xs.is_empty() || t.column("pi").is_none() {
        return Err(Error::Config(format!("{}: expected columns x1..xd and pi", path.display())));
    }
    let mut names: Vec<String> = xs.into_iter().map(|(_, h)| h).collect();
    names.push("pi".into());
    let mut cols = numeric_columns(&t, &names, path)?;
    let pi = cols.pop().expect("pi column");
    let x: Vec<Vec<f64>> = (0..t.rows.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let sample = SurveySample::new(x, pi).map_err(as_config)?;

    let mut table = Table::new(["method", "parameter", "estimate", "ci_low", "ci_high"]);
    let mut fits = Vec::new();
    for &method in &cfg.methods {
        let (theta, ci) = match method {
            Method::Mle => {
                let f = mle_fit(&sample, SurveyModel::Normal)?;
                (f.theta, f.ci)
            }
            Method::Pmle => {
                let f = pmle_fit(&sample, SurveyModel::Normal, cfg.meat)?;
                (f.theta, f.ci)
            }
            Method::Bdcm => {
                let f = bdcm_fit(&sample, &EstimatingFunction::MeanVariance, &cfg.bdcm, seed)?;
                (f.theta, f.ci)
            }
        };
        for (k, name) in ["mu", "sigma2"].iter().enumerate() {
            table.push(vec![
                method.name().into(),
                (*name).into(),
                fmt_f64(theta[k]),
                fmt_f64(ci[k].0),
                fmt_f64(ci[k].1),
            ]);
        }
        fits.push(DataFit { method, theta, ci });
    }
    table.write(&out.join("fits.csv"))?;
    Ok((sample.len(), fits, vec!["fits.csv".into()]))
}
