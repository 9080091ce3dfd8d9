use serde::{Deserialize, Serialize};

use super::etel::etel_from_moments;
use super::{wfpbb_resample, EstimatingFunction, SurveySample};
use crate::distributions::ParametricFamily;
use crate::error::{Error, Result};
use crate::optimize::nelder_mead;
use crate::reweight::{entropy, mirror_ascent, SolverConfig};
use crate::transport::{w2sq_discrete_continuous, w2sq_with_grad, WeightedSample};

const Z95: f64 = 1.959_963_984_540_054;

/// `Normal(θ_0, θ_1)`; the parameterization used for `θ = (μ, σ²)`.
pub fn normal_family(theta: &[f64]) -> Result<ParametricFamily> {
    ParametricFamily::normal(theta[0], theta[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BdcmConfig {
    /// Pseudo-population size `N` for the bootstrap.
    pub population_size: usize,
    /// Number of pseudo-samples `M`.
    pub replicates: usize,
    pub solver: SolverConfig,
    /// Ceiling for the penalty parameters.
    pub penalty_cap: f64,
    /// Required `‖Σ w_i g_i‖`.
    pub moment_tol: f64,
    pub xtol: f64,
    pub ftol: f64,
    pub max_evals: usize,
}

impl Default for BdcmConfig {
    fn default() -> Self {
        Self {
            population_size: 100_000,
            replicates: 50,
            solver: SolverConfig::default(),
            penalty_cap: 1e10,
            moment_tol: 1e-6,
            xtol: 1e-6,
            ftol: 1e-8,
            max_evals: 400,
        }
    }
}

/// Log of the constrained empirical likelihood on a pseudo-sample:
/// `Σ log w_i` at the entropy maximizer subject to `Σ w_i g(x_i, θ) = 0`
/// and `W2²(Σ w_i δ_{x_i}, target) ≤ ε`; `−∞` if no such `w` exists.
///
/// If the tilted ETEL weights already meet the transport budget they are
/// the answer. Otherwise the problem (concave objective, linear and convex
/// constraints) is solved by an augmented-Lagrangian loop around
/// exponentiated-gradient ascent, warm-started at the ETEL solution. The
/// penalty parameters double from 1 whenever a constraint violation fails
/// to shrink by 4×, up to `penalty_cap`.
pub fn bdcm_loglik(
    theta: &[f64],
    pseudo_sample: &[f64],
    g: &EstimatingFunction,
    target: &ParametricFamily,
    epsilon: f64,
    cfg: &BdcmConfig,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
            domain: "(0, inf]",
        });
    }
    let n = pseudo_sample.len();
    let xs: Vec<Vec<f64>> = pseudo_sample.iter().map(|&x| vec![x]).collect();
    let r = g.dim();
    let gm = g.eval_all(&xs, theta);
    if gm.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("estimating function is not finite at theta".into()));
    }
    let tilted = etel_from_moments(&gm, r, &vec![1.0; n]);
    let Some(w0) = tilted.weights else {
        return Ok(f64::NEG_INFINITY);
    };
    let base = WeightedSample::uniform(pseudo_sample.to_vec())?;
    if epsilon.is_infinite() || w2sq_discrete_continuous(&base.with_weights(w0.clone())?, target) <= epsilon {
        return Ok(tilted.loglik);
    }

    let moments = |w: &[f64]| -> Vec<f64> {
        let mut m = vec![0.0; r];
        for i in 0..n {
            for k in 0..r {
                m[k] += w[i] * gm[i * r + k];
            }
        }
        m
    };
    let w2_tol = 1e-7 * epsilon.max(1.0);
    let mut nu = tilted.eta.clone();
    let mut xi = 0.0_f64;
    let (mut kappa, mut rho) = (1.0_f64, 1.0_f64);
    let mut w = w0;
    let mut prev_moment = f64::INFINITY;
    let mut prev_excess = f64::INFINITY;
    let mut stalled = 0;
    for _outer in 0..400 {
        let (nu_k, xi_k, kappa_k, rho_k) = (nu.clone(), xi, kappa, rho);
        let ascent = mirror_ascent("bdcm_loglik", w.clone(), &cfg.solver, |w| {
            let sample = match base.with_weights(w.to_vec()) {
                Ok(s) => s,
                Err(_) => return (f64::NAN, vec![f64::NAN; w.len()]),
            };
            let (d, dg) = w2sq_with_grad(&sample, target);
            let m = moments(w);
            let shifted = (xi_k + rho_k * (d - epsilon)).max(0.0);
            let mut value = entropy(w) - (shifted * shifted - xi_k * xi_k) / (2.0 * rho_k);
            let mut coef = vec![0.0; r];
            for k in 0..r {
                value += nu_k[k] * m[k] - 0.5 * kappa_k * m[k] * m[k];
                coef[k] = nu_k[k] - kappa_k * m[k];
            }
            let grad = (0..w.len())
                .map(|i| {
                    let gi: f64 = (0..r).map(|k| coef[k] * gm[i * r + k]).sum();
                    -(1.0 + w[i].ln()) + gi - shifted * dg[i]
                })
                .collect();
            (value, grad)
        })?;
        w = ascent.w;
        let m = moments(&w);
        let d = w2sq_discrete_continuous(&base.with_weights(w.clone())?, target);
        let moment_norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let excess = (d - epsilon).max(0.0);
        if moment_norm <= cfg.moment_tol && excess <= w2_tol {
            let ll: f64 = w.iter().map(|v| v.ln()).sum();
            return Ok(ll.min(tilted.loglik));
        }
        for k in 0..r {
            nu[k] -= kappa * m[k];
        }
        xi = (xi + rho * (d - epsilon)).max(0.0);
        if moment_norm > 0.25 * prev_moment {
            kappa = (kappa * 2.0).min(cfg.penalty_cap);
        }
        if excess > 0.25 * prev_excess {
            rho = (rho * 2.0).min(cfg.penalty_cap);
        }
        if xi > cfg.penalty_cap || nu.iter().any(|v| v.abs() > cfg.penalty_cap) {
            return Ok(f64::NEG_INFINITY);
        }
        if kappa >= cfg.penalty_cap && rho >= cfg.penalty_cap {
            stalled += 1;
            if stalled > 20 {
                return Ok(f64::NEG_INFINITY);
            }
        }
        prev_moment = moment_norm;
        prev_excess = excess;
    }
    Err(Error::numerical(
        "bdcm_loglik",
        400,
        "augmented Lagrangian did not reach the constraint tolerances",
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdcmFit {
    /// Mean of the per-replicate estimates.
    pub theta: Vec<f64>,
    /// Between-replicate covariance times `1 + 1/M`.
    pub covariance: Vec<Vec<f64>>,
    pub ci: Vec<(f64, f64)>,
    /// Successful per-replicate estimates.
    pub replicate_estimates: Vec<Vec<f64>>,
    pub failures: usize,
}

impl BdcmFit {
    pub fn covers(&self, truth: &[f64]) -> bool {
        self.ci.iter().zip(truth).all(|(&(lo, hi), &t)| lo <= t && t <= hi)
    }
}

/// Bootstrapped W2-constrained estimate of `θ = (μ, σ²)` for a Normal model.
///
/// Each of the `M` pseudo-samples `x*` is maximized over θ by Nelder–Mead,
/// started at the pseudo-sample's own MLE `θ₀`, with the transport budget
/// `ε = W2²(uniform on x*, Normal(θ₀))`. At `θ₀` the uniform weights are
/// feasible, and `Σ log w ≤ −n log n` for every `w` on the simplex, so when
/// the start attains that bound it is a global maximizer and the search is
/// skipped.
pub fn bdcm_fit(sample: &SurveySample, g: &EstimatingFunction, cfg: &BdcmConfig, seed: u64) -> Result<BdcmFit> {
    if cfg.replicates < 2 {
        return Err(Error::InvalidArgument("BDCM needs at least two pseudo-samples".into()));
    }
    let draws = wfpbb_resample(sample, cfg.population_size, cfg.replicates, seed)?;
    let x = sample.first_column();
    let mut estimates = Vec::with_capacity(draws.len());
    let mut failures = 0;
    for idx in &draws {
        let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        match fit_one(&xs, g, cfg) {
            Ok(Some(theta)) => estimates.push(theta),
            Ok(None) => failures += 1,
            Err(e) if e.is_numerical() => failures += 1,
            Err(e) => return Err(e),
        }
    }
    if 2 * failures > cfg.replicates {
        return Err(Error::Fit(format!(
            "{failures} of {} pseudo-sample optimizations failed",
            cfg.replicates
        )));
    }
    let (theta, covariance) = combine(&estimates);
    let ci = (0..theta.len())
        .map(|j| {
            let half = Z95 * covariance[j][j].max(0.0).sqrt();
            (theta[j] - half, theta[j] + half)
        })
        .collect();
    Ok(BdcmFit {
        theta,
        covariance,
        ci,
        replicate_estimates: estimates,
        failures,
    })
}

fn fit_one(xs: &[f64], g: &EstimatingFunction, cfg: &BdcmConfig) -> Result<Option<Vec<f64>>> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Ok(None);
    }
    let start = vec![mean, var];
    let base = WeightedSample::uniform(xs.to_vec())?;
    let epsilon = w2sq_discrete_continuous(&base, &normal_family(&start)?);
    let objective = |theta: &[f64]| -> Result<f64> {
        if !(theta[1] > 0.0) || !theta[0].is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        bdcm_loglik(theta, xs, g, &normal_family(theta)?, epsilon, cfg)
    };
    let at_start = objective(&start)?;
    let bound = -n * n.ln();
    if at_start >= bound - 1e-9 * n {
        return Ok(Some(start));
    }
    let mut failure = None;
    let result = nelder_mead(&start, cfg.xtol, cfg.ftol, cfg.max_evals, |t| match objective(t) {
        Ok(v) => -v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::INFINITY
        }
    });
    if let Some(e) = failure {
        if !e.is_numerical() {
            return Err(e);
        }
    }
    Ok(result.value.is_finite().then_some(result.x))
}

/// Mean and `(1 + 1/M)`-inflated between-replicate covariance.
pub(crate) fn combine(estimates: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = estimates.len();
    let p = estimates[0].len();
    let mut mean = vec![0.0; p];
    for e in estimates {
        for j in 0..p {
            mean[j] += e[j] / m as f64;
        }
    }
    let mut cov = vec![vec![0.0; p]; p];
    if m > 1 {
        let factor = (1.0 + 1.0 / m as f64) / (m - 1) as f64;
        for e in estimates {
            for a in 0..p {
                for b in 0..p {
                    cov[a][b] += (e[a] - mean[a]) * (e[b] - mean[b]) * factor;
                }
            }
        }
    }
    (mean, cov)
}
