use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{fmt_f64, numeric_columns, read_input, Table};
use super::{as_config, check_grid, grid};
use crate::error::{Error, Result};
use crate::fairness::{
    fairness_sweep, fit_in_model, fit_two_step, fit_unconstrained, synth_fair_data, FairConfig, FairDataset, FairFit,
    FairSynthConfig, Group, Scheme,
};

/// Unconstrained, two-step and in-model fits at `lambda_star`, plus the
/// two fair schemes over `lambda_grid`. Data come from `synth` (seeded by
/// the run seed) or from a file with columns `y,a,x1..xp`, `a` being the
/// group label `S` or `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessExperiment {
    pub synth: FairSynthConfig,
    pub data: Option<PathBuf>,
    pub lambda_star: f64,
    pub lambda_grid: Vec<f64>,
    pub fit: FairConfig,
}

impl Default for FairnessExperiment {
    fn default() -> Self {
        Self {
            synth: FairSynthConfig::default(),
            data: None,
            lambda_star: 0.0,
            lambda_grid: grid(0.0, 1.0, 10),
            fit: FairConfig::default(),
        }
    }
}

#[derive(Debug, Serialize)]
struct FitSummary {
    scheme: Scheme,
    w2: f64,
    w2sq: f64,
    entropy: f64,
    objective: f64,
    iterations: usize,
}

impl From<&FairFit> for FitSummary {
    fn from(f: &FairFit) -> Self {
        Self {
            scheme: f.scheme,
            w2: f.w2(),
            w2sq: f.w2sq,
            entropy: f.entropy,
            objective: f.objective,
            iterations: f.iterations,
        }
    }
}

#[derive(Debug, Serialize)]
struct FairnessResults {
    n_s: usize,
    n_t: usize,
    sigma2: f64,
    lambda_star: f64,
    fits: Vec<FitSummary>,
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Unconstrained => "unconstrained",
        Scheme::TwoStep => "two_step",
        Scheme::InModel => "in_model",
    }
}

fn group_name(g: Group) -> &'static str {
    match g {
        Group::S => "S",
        Group::T => "T",
    }
}

pub(super) fn run(
    mut cfg: FairnessExperiment,
    seed: u64,
    out: &Path,
) -> Result<(FairnessExperiment, impl Serialize, Vec<String>)> {
    cfg.synth.seed = seed;
    if !(0.0..=1.0).contains(&cfg.lambda_star) {
        return Err(Error::Config(format!("lambda_star = {} is outside [0, 1]", cfg.lambda_star)));
    }
    check_grid("lambda_grid", &cfg.lambda_grid, 0.0, 1.0)?;
    cfg.fit.validate().map_err(as_config)?;
    let data = match &cfg.data {
        Some(path) => read_data(path)?,
        None => synth_fair_data(&cfg.synth).map_err(as_config)?,
    };

    let fits = [
        fit_unconstrained(&data)?,
        fit_two_step(&data, cfg.lambda_star, &cfg.fit)?,
        fit_in_model(&data, cfg.lambda_star, &cfg.fit)?,
    ];

    let mut cdf = Table::new(["scheme", "group", "value", "weight", "cdf"]);
    let mut weights = Table::new(["scheme", "index", "weight"]);
    let mut coef = Table::new(["scheme", "group", "term", "value"]);
    let terms: Vec<String> = std::iter::once("intercept".to_string())
        .chain((1..=data.dim()).map(|j| format!("x{j}")))
        .collect();
    for fit in &fits {
        let name = scheme_name(fit.scheme);
        for g in [Group::S, Group::T] {
            let values = fit.fitted(&data, g);
            let w: Vec<f64> = match g {
                Group::S => vec![1.0 / values.len() as f64; values.len()],
                Group::T => fit.weights.clone(),
            };
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            let mut cum = 0.0;
            for i in order {
                cum += w[i];
                cdf.push(vec![
                    name.into(),
                    group_name(g).into(),
                    fmt_f64(values[i]),
                    fmt_f64(w[i]),
                    fmt_f64(cum.min(1.0)),
                ]);
            }
            let theta = match g {
                Group::S => &fit.theta_s,
                Group::T => &fit.theta_t,
            };
            for (term, v) in terms.iter().zip(theta) {
                coef.push(vec![name.into(), group_name(g).into(), term.clone(), fmt_f64(*v)]);
            }
        }
        for (i, w) in fit.weights.iter().enumerate() {
            weights.push(vec![name.into(), i.to_string(), fmt_f64(*w)]);
        }
    }

    let mut sweep = Table::new(["lambda_star", "scheme", "w2", "w2sq", "entropy", "objective", "iterations"]);
    for point in fairness_sweep(&data, &cfg.lambda_grid, &cfg.fit)? {
        for fit in [&point.two_step, &point.in_model] {
            sweep.push(vec![
                fmt_f64(point.lambda),
                scheme_name(fit.scheme).into(),
                fmt_f64(fit.w2()),
                fmt_f64(fit.w2sq),
                fmt_f64(fit.entropy),
                fmt_f64(fit.objective),
                fit.iterations.to_string(),
            ]);
        }
    }

    cdf.write(&out.join("cdf.csv"))?;
    weights.write(&out.join("weights.csv"))?;
    coef.write(&out.join("coefficients.csv"))?;
    sweep.write(&out.join("sweep.csv"))?;
    let results = FairnessResults {
        n_s: data.n_s(),
        n_t: data.n_t(),
        sigma2: fits[0].sigma2,
        lambda_star: cfg.lambda_star,
        fits: fits.iter().map(FitSummary::from).collect(),
    };
    let files = ["cdf.csv", "weights.csv", "coefficients.csv", "sweep.csv"]
        .map(String::from)
        .to_vec();
    Ok((cfg, results, files))
}

fn read_data(path: &Path) -> Result<FairDataset> {
    let t = read_input(path)?;
    let a = t
        .column("a")
        .ok_or_else(|| Error::Config(format!("{}: missing group column a", path.display())))?;
    let mut xs: Vec<(usize, String)> = t
        .header
        .iter()
        .filter_map(|h| h.strip_prefix('x').and_then(|k| k.parse().ok()).map(|k: usize| (k, h.clone())))
        .collect();
    xs.sort();
    let mut names = vec!["y".to_string()];
    names.extend(xs.into_iter().map(|(_, h)| h));
    let cols = numeric_columns(&t, &names, path)?;
    let groups = t
        .rows
        .iter()
        .map(|row| row[a].parse::<Group>())
        .collect::<Result<Vec<_>>>()
        .map_err(as_config)?;
    let x: Vec<Vec<f64>> = (0..t.rows.len()).map(|i| cols[1..].iter().map(|c| c[i]).collect()).collect();
    FairDataset::new(x, cols[0].clone(), &groups).map_err(as_config)
}
