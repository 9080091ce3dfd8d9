use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{expit, SurveySample};
use crate::error::{Error, Result};

const Z95: f64 = 1.959_963_984_540_054;

/// Parametric model fitted by (pseudo) maximum likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurveyModel {
    /// `θ = (μ, σ²)` for the first coordinate.
    Normal,
    /// `θ = (β_0, …, β_p)`; the last coordinate is the 0/1 response.
    Logistic { predictors: usize },
}

/// How the middle of the sandwich is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeatEstimator {
    /// `V̂ = (1/n) Σ π_i s_i s_iᵀ`.
    #[default]
    SingleWeight,
    /// `V̂ = (1/n) Σ π_i² s_i s_iᵀ`, the design-based form.
    SquaredWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmleFit {
    pub theta: Vec<f64>,
    /// `Ĥ = (1/n) Σ π_i ∂² log f(x_i)` at `θ̂`.
    pub hessian: Vec<Vec<f64>>,
    /// `V̂`, see [`MeatEstimator`].
    pub meat: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    /// 95% normal intervals per coordinate.
    pub ci: Vec<(f64, f64)>,
    pub n: usize,
}

impl PmleFit {
    pub fn covers(&self, truth: &[f64]) -> bool {
        self.ci.iter().zip(truth).all(|(&(lo, hi), &t)| lo <= t && t <= hi)
    }
}

/// Maximizes `Σ π_i log f_θ(x_i)` and attaches the sandwich covariance
/// `Ĥ⁻¹ V̂ Ĥ⁻¹ / n`.
pub fn pmle_fit(sample: &SurveySample, model: SurveyModel, meat: MeatEstimator) -> Result<PmleFit> {
    let theta = solve(sample, model)?;
    let (h, v) = hessian_and_meat(sample, model, &theta, meat);
    let n = sample.len();
    let hinv = h
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular pseudo-likelihood Hessian".into()))?;
    let cov = &hinv * &v * &hinv / n as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    finish(theta, h, v, cov, n)
}

/// Ordinary MLE (weights ignored) with observed-information intervals.
pub fn mle_fit(sample: &SurveySample, model: SurveyModel) -> Result<PmleFit> {
    let flat = SurveySample::unweighted(sample.observations().to_vec())?;
    let theta = solve(&flat, model)?;
    let (h, v) = hessian_and_meat(&flat, model, &theta, MeatEstimator::SingleWeight);
    let n = flat.len();
    let info = -&h * n as f64;
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular observed information".into()))?;
    let cov = (&cov + cov.transpose()) * 0.5;
    finish(theta, h, v, cov, n)
}

fn finish(theta: Vec<f64>, h: DMatrix<f64>, v: DMatrix<f64>, cov: DMatrix<f64>, n: usize) -> Result<PmleFit> {
    let p = theta.len();
    let mut ci = Vec::with_capacity(p);
    for j in 0..p {
        let var = cov[(j, j)];
        if !(var >= 0.0 && var.is_finite()) {
            return Err(Error::Fit(format!("negative or non-finite variance for coordinate {j}")));
        }
        let half = Z95 * var.sqrt();
        ci.push((theta[j] - half, theta[j] + half));
    }
    Ok(PmleFit {
        theta,
        hessian: rows(&h),
        meat: rows(&v),
        covariance: rows(&cov),
        ci,
        n,
    })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn solve(sample: &SurveySample, model: SurveyModel) -> Result<Vec<f64>> {
    let n = sample.len() as f64;
    let pi = sample.weights();
    let xs = sample.observations();
    match model {
        SurveyModel::Normal => {
            let mu = xs.iter().zip(pi).map(|(x, p)| p * x[0]).sum::<f64>() / n;
            let var = xs.iter().zip(pi).map(|(x, p)| p * (x[0] - mu).powi(2)).sum::<f64>() / n;
            if !(var > 0.0) {
                return Err(Error::Fit("weighted variance is zero".into()));
            }
            Ok(vec![mu, var])
        }
        SurveyModel::Logistic { predictors } => {
            check_logistic(sample, predictors)?;
            let p = predictors + 1;
            let mut beta = DVector::zeros(p);
            for _ in 0..100 {
                let mut grad = DVector::zeros(p);
                let mut info = DMatrix::zeros(p, p);
                for (x, &w) in xs.iter().zip(pi) {
                    let z = design_row(x, predictors);
                    let mu = expit(z.dot(&beta));
                    grad += &z * (w * (x[predictors] - mu));
                    info += &z * z.transpose() * (w * mu * (1.0 - mu));
                }
                let step = info
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| Error::Fit("singular logistic information".into()))?;
                beta += &step;
                if !beta.iter().all(|b: &f64| b.is_finite()) || beta.norm() > 1e6 {
                    return Err(Error::Fit("logistic fit diverged (separated data?)".into()));
                }
                if step.norm() <= 1e-10 * (1.0 + beta.norm()) {
                    return Ok(beta.iter().copied().collect());
                }
            }
            Err(Error::Fit("logistic Newton iteration did not converge".into()))
        }
    }
}

fn check_logistic(sample: &SurveySample, predictors: usize) -> Result<()> {
    if sample.dim() != predictors + 1 {
        return Err(Error::InvalidArgument(format!(
            "logistic model with {predictors} predictors needs {} columns, got {}",
            predictors + 1,
            sample.dim()
        )));
    }
    if sample
        .observations()
        .iter()
        .any(|x| x[predictors] != 0.0 && x[predictors] != 1.0)
    {
        return Err(Error::InvalidArgument("logistic response must be 0 or 1".into()));
    }
    Ok(())
}

fn design_row(x: &[f64], predictors: usize) -> DVector<f64> {
    let mut z = DVector::zeros(predictors + 1);
    z[0] = 1.0;
    for j in 0..predictors {
        z[j + 1] = x[j];
    }
    z
}

/// `Ĥ` and `V̂` at `θ` (both averaged with `1/n`).
fn hessian_and_meat(
    sample: &SurveySample,
    model: SurveyModel,
    theta: &[f64],
    meat: MeatEstimator,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = sample.len() as f64;
    let p = theta.len();
    let mut h = DMatrix::zeros(p, p);
    let mut v = DMatrix::zeros(p, p);
    for (x, &w) in sample.observations().iter().zip(sample.weights()) {
        let mw = match meat {
            MeatEstimator::SingleWeight => w,
            MeatEstimator::SquaredWeight => w * w,
        };
        match model {
            SurveyModel::Normal => {
                let (mu, s2) = (theta[0], theta[1]);
                let d = x[0] - mu;
                let score = [d / s2, -0.5 / s2 + 0.5 * d * d / (s2 * s2)];
                let second = [
                    [-1.0 / s2, -d / (s2 * s2)],
                    [-d / (s2 * s2), 0.5 / (s2 * s2) - d * d / (s2 * s2 * s2)],
                ];
                for a in 0..2 {
                    for b in 0..2 {
                        h[(a, b)] += w * second[a][b];
                        v[(a, b)] += mw * score[a] * score[b];
                    }
                }
            }
            SurveyModel::Logistic { predictors } => {
                let z = design_row(x, predictors);
                let beta = DVector::from_column_slice(theta);
                let mu = expit(z.dot(&beta));
                let s = &z * (x[predictors] - mu);
                h -= &z * z.transpose() * (w * mu * (1.0 - mu));
                v += &s * s.transpose() * mw;
            }
        }
    }
    (h / n, v / n)
}
