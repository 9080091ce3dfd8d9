use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::as_config;
use super::io::{fmt_f64, numeric_columns, read_input, Table};
use crate::distributions::ParametricFamily;
use crate::error::{Error, Result};
use crate::reweight::{solve_dual, solve_primal, SolverConfig};

/// Direct call to the reweighting solvers. Atoms are given inline or as the
/// `x` column of a CSV file; set exactly one of `lambda` (penalized form)
/// and `epsilon` (constrained form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReweightExperiment {
    #[serde(default)]
    pub atoms: Option<Vec<f64>>,
    #[serde(default)]
    pub data: Option<PathBuf>,
    pub target: ParametricFamily,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Serialize)]
struct ReweightResults {
    m: usize,
    lambda: f64,
    w2sq: f64,
    entropy: f64,
    objective: f64,
    iterations: usize,
    converged: bool,
}

pub(super) fn run(
    cfg: ReweightExperiment,
    _seed: u64,
    out: &Path,
) -> Result<(ReweightExperiment, impl Serialize, Vec<String>)> {
    let atoms = match (&cfg.atoms, &cfg.data) {
        (Some(a), None) => a.clone(),
        (None, Some(path)) => {
            let t = read_input(path)?;
            numeric_columns(&t, &["x".to_string()], path)?.remove(0)
        }
        _ => return Err(Error::Config("set exactly one of atoms and data".into())),
    };
    cfg.target.validate().map_err(as_config)?;
    cfg.solver.validate().map_err(as_config)?;
    if atoms.is_empty() || atoms.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config("atoms must be a nonempty list of finite numbers".into()));
    }
    let sol = match (cfg.lambda, cfg.epsilon) {
        (Some(l), None) => {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda = {l} must be finite and nonnegative")));
            }
            solve_dual(&atoms, &cfg.target, l, &cfg.solver)?
        }
        (None, Some(e)) => {
            if !(e > 0.0) {
                return Err(Error::Config(format!("epsilon = {e} must be positive")));
            }
            solve_primal(&atoms, &cfg.target, e, &cfg.solver)?
        }
        _ => return Err(Error::Config("set exactly one of lambda and epsilon".into())),
    };
    let mut t = Table::new(["index", "atom", "weight"]);
    for (i, (a, w)) in atoms.iter().zip(sol.weights.as_slice()).enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*a), fmt_f64(*w)]);
    }
    t.write(&out.join("weights.csv"))?;
    let results = ReweightResults {
        m: atoms.len(),
        lambda: sol.lambda,
        w2sq: sol.w2sq,
        entropy: sol.entropy,
        objective: sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
    };
    Ok((cfg, results, vec!["weights.csv".into()]))
}
