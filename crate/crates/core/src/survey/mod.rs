//! Survey inference: pseudo maximum likelihood, exponentially tilted
//! empirical likelihood, the weighted finite-population Bayesian bootstrap
//! and the bootstrapped W2-constrained estimator built from them.

mod bdcm;
mod etel;
mod pmle;
mod population;
pub mod simulation;
mod wfpbb;

pub use bdcm::{bdcm_fit, bdcm_loglik, normal_family, BdcmConfig, BdcmFit};
pub use etel::{etel, EtelResult};
pub use pmle::{mle_fit, pmle_fit, MeatEstimator, PmleFit, SurveyModel};
pub use population::{simulate_population, Population, SimulationConfig};
pub use wfpbb::wfpbb_resample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observations `x_i ∈ R^d` with survey weights scaled to sum to `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveySample {
    x: Vec<Vec<f64>>,
    pi: Vec<f64>,
}

impl SurveySample {
    /// Validates the shape and rescales `pi` to sum to `n`.
    pub fn new(x: Vec<Vec<f64>>, pi: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(Error::InvalidArgument("a survey sample needs at least two observations".into()));
        }
        if pi.len() != n {
            return Err(Error::InvalidArgument(format!("{n} observations but {} weights", pi.len())));
        }
        let d = x[0].len();
        if d == 0 || x.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("observations must share a positive dimension".into()));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("observations must be finite".into()));
        }
        if let Some(i) = pi.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidArgument(format!("survey weight {i} = {} is not in (0, inf)", pi[i])));
        }
        let total: f64 = pi.iter().sum();
        let scale = n as f64 / total;
        let pi = pi.into_iter().map(|p| p * scale).collect();
        Ok(Self { x, pi })
    }

    /// Scalar observations.
    pub fn univariate(x: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        Self::new(x.into_iter().map(|v| vec![v]).collect(), pi)
    }

    /// Equal weights.
    pub fn unweighted(x: Vec<Vec<f64>>) -> Result<Self> {
        let n = x.len();
        Self::new(x, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.pi
    }

    /// First coordinate of every observation.
    pub fn first_column(&self) -> Vec<f64> {
        self.x.iter().map(|r| r[0]).collect()
    }

    /// Kish effective sample size `(Σπ)² / Σπ²`.
    pub fn effective_size(&self) -> f64 {
        let s: f64 = self.pi.iter().sum();
        let s2: f64 = self.pi.iter().map(|p| p * p).sum();
        s * s / s2
    }
}

/// Moment functions `g(x, θ)` with `E g = 0` at the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatingFunction {
    /// `g = x_0 − θ_0`.
    MeanDeviation,
    /// `g = (x_0 − θ_0, (x_0 − θ_0)² − θ_1)`.
    MeanVariance,
    /// Logistic-regression score `z (y − expit(zᵀβ))`, `z = (1, x_0..x_{d−2})`,
    /// `y = x_{d−1}`; `predictors` is `d − 1`.
    LogisticScore { predictors: usize },
}

impl EstimatingFunction {
    /// Number of moment conditions.
    pub fn dim(&self) -> usize {
        match self {
            EstimatingFunction::MeanDeviation => 1,
            EstimatingFunction::MeanVariance => 2,
            EstimatingFunction::LogisticScore { predictors } => predictors + 1,
        }
    }

    pub fn eval(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        match self {
            EstimatingFunction::MeanDeviation => out[0] = x[0] - theta[0],
            EstimatingFunction::MeanVariance => {
                let d = x[0] - theta[0];
                out[0] = d;
                out[1] = d * d - theta[1];
            }
            EstimatingFunction::LogisticScore { predictors } => {
                let p = *predictors;
                let y = x[p];
                let mut eta = theta[0];
                for j in 0..p {
                    eta += theta[j + 1] * x[j];
                }
                let resid = y - expit(eta);
                out[0] = resid;
                for j in 0..p {
                    out[j + 1] = x[j] * resid;
                }
            }
        }
    }

    /// `g(x_i, θ)` for every row, flattened row-major (`n × r`).
    pub(crate) fn eval_all(&self, xs: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
        let r = self.dim();
        let mut out = vec![0.0; xs.len() * r];
        for (i, x) in xs.iter().enumerate() {
            self.eval(x, theta, &mut out[i * r..(i + 1) * r]);
        }
        out
    }
}

pub(crate) fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_rescaled_to_n() {
        let s = SurveySample::univariate(vec![1.0, 2.0, 3.0, 4.0], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let total: f64 = s.weights().iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
        assert!((s.weights()[3] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn invalid_samples() {
        assert!(SurveySample::univariate(vec![1.0], vec![1.0]).is_err());
        assert!(SurveySample::univariate(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(SurveySample::new(vec![vec![1.0], vec![1.0, 2.0]], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn logistic_score_layout() {
        let g = EstimatingFunction::LogisticScore { predictors: 2 };
        let mut out = [0.0; 3];
        g.eval(&[0.5, -1.0, 1.0], &[0.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [0.5, 0.25, -0.5]);
    }
}
