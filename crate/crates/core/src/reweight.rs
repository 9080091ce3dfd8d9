//! Maximum-entropy reweighting under a W2 constraint.
//!
//! `solve_dual` maximizes `H(w) − λ·W2²(Σ w_i δ_{s_i}, f)` over the simplex;
//! `solve_primal` maximizes `H(w)` subject to `W2² ≤ ε` by bisecting on λ.
//! Both run on [`mirror_ascent`], an exponentiated-gradient method with a
//! Bregman backtracking test that is reused by the application modules.

use serde::{Deserialize, Serialize};

use crate::distributions::ParametricFamily;
use crate::error::{Error, Result};
use crate::transport::{w2sq_discrete_continuous, w2sq_with_grad, WeightedSample};

/// Smallest weight kept by the multiplicative update; keeps logs finite.
pub(crate) const WEIGHT_FLOOR: f64 = 1e-300;

pub const LAMBDA_MAX: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("weight {i} = {} is negative or not finite", weights[i])));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }
}

/// `−Σ w log w` with `0 log 0 = 0`.
pub fn entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub initial_step: f64,
    pub backtrack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-9,
            initial_step: 1.0,
            backtrack: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if !(self.tol > 0.0 && self.initial_step > 0.0) {
            return Err(Error::InvalidArgument("tolerance and step size must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Domain {
                what: "backtracking factor",
                value: self.backtrack,
                domain: "(0, 1)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Ascent {
    pub w: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Exponentiated-gradient ascent of a concave-ish `f` on the simplex.
///
/// A step `w⁺ ∝ w·exp(η g)` is accepted when
/// `f(w⁺) ≥ f(w) + ⟨g, w⁺ − w⟩ − KL(w⁺‖w)/η`, which implies `f(w⁺) ≥ f(w)`.
/// Otherwise η shrinks by `cfg.backtrack`; after an accepted step it grows
/// back by the same factor.
pub(crate) fn mirror_ascent(
    context: &'static str,
    init: Vec<f64>,
    cfg: &SolverConfig,
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
) -> Result<Ascent> {
    let m = init.len();
    let mut w = init;
    let (mut value, mut grad) = f(&w);
    check_finite(context, 0, value, &grad, &w)?;
    if m == 1 {
        return Ok(Ascent {
            w,
            iterations: 0,
            converged: true,
        });
    }
    let mut eta = cfg.initial_step;
    let mut logw: Vec<f64> = w.iter().map(|x| x.ln()).collect();
    let mut next = vec![0.0; m];
    let mut next_log = vec![0.0; m];

    for it in 1..=cfg.max_iter {
        let mut accepted = false;
        let mut new_value = value;
        let mut new_grad = Vec::new();
        while eta > 1e-18 {
            let top = (0..m).map(|i| logw[i] + eta * grad[i]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for i in 0..m {
                next[i] = (logw[i] + eta * grad[i] - top).exp();
                z += next[i];
            }
            let mut renorm = 0.0;
            for x in next.iter_mut() {
                *x = (*x / z).max(WEIGHT_FLOOR);
                renorm += *x;
            }
            let mut linear = 0.0;
            let mut kl = 0.0;
            for i in 0..m {
                next[i] /= renorm;
                next_log[i] = next[i].ln();
                linear += grad[i] * (next[i] - w[i]);
                kl += next[i] * (next_log[i] - logw[i]);
            }
            let (v, g) = f(&next);
            if v.is_finite() && g.iter().all(|x| x.is_finite()) {
                let model = value + linear - kl.max(0.0) / eta;
                if v >= model - 1e-12 * value.abs().max(1.0) && v >= value - 1e-14 * value.abs().max(1.0) {
                    accepted = true;
                    new_value = v;
                    new_grad = g;
                    break;
                }
            }
            eta *= cfg.backtrack;
        }
        if !accepted {
            // no ascent step exists at machine precision: stationary
            return Ok(Ascent {
                w,
                iterations: it,
                converged: true,
            });
        }
        let change = (new_value - value).abs();
        std::mem::swap(&mut w, &mut next);
        std::mem::swap(&mut logw, &mut next_log);
        value = new_value;
        grad = new_grad;
        check_finite(context, it, value, &grad, &w)?;
        eta = (eta / cfg.backtrack).min(1e12);
        if change <= cfg.tol * (1.0 + value.abs()) {
            return Ok(Ascent {
                w,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(Ascent {
        w,
        iterations: cfg.max_iter,
        converged: false,
    })
}

fn check_finite(context: &'static str, it: usize, value: f64, grad: &[f64], w: &[f64]) -> Result<()> {
    if value.is_finite() && grad.iter().all(|g| g.is_finite()) {
        return Ok(());
    }
    let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
    let wmax = w.iter().copied().fold(0.0, f64::max);
    Err(Error::numerical(
        context,
        it,
        format!("objective {value}, weights in [{wmin:e}, {wmax:e}]"),
    ))
}

/// Result of a reweighting solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweightSolution {
    pub weights: SimplexWeights,
    /// Penalty weight the weights were computed at.
    pub lambda: f64,
    pub w2sq: f64,
    pub entropy: f64,
    /// `H(w) − λ·W2²`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `H(w) − λ·W2²(Σ w_i δ_{s_i}, target)` from uniform weights.
pub fn solve_dual(atoms: &[f64], target: &ParametricFamily, lambda: f64, cfg: &SolverConfig) -> Result<ReweightSolution> {
    cfg.validate()?;
    target.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            what: "lambda",
            value: lambda,
            domain: "[0, inf)",
        });
    }
    let base = WeightedSample::uniform(atoms.to_vec())?;
    let m = atoms.len();
    let init = vec![1.0 / m as f64; m];
    let ascent = if lambda == 0.0 {
        Ascent {
            w: init,
            iterations: 0,
            converged: true,
        }
    } else {
        let order = base.clone();
        mirror_ascent("solve_dual", init, cfg, |w| {
            let sample = match order.with_weights(w.to_vec()) {
                Ok(s) => s,
                Err(_) => return (f64::NAN, vec![f64::NAN; w.len()]),
            };
            let (d, dg) = w2sq_with_grad(&sample, target);
            let value = entropy(w) - lambda * d;
            let grad = w.iter().zip(&dg).map(|(&x, &g)| -(1.0 + x.ln()) - lambda * g).collect();
            (value, grad)
        })?
    };
    finish(&base, target, lambda, ascent)
}

fn finish(base: &WeightedSample, target: &ParametricFamily, lambda: f64, ascent: Ascent) -> Result<ReweightSolution> {
    let total: f64 = ascent.w.iter().sum();
    let w: Vec<f64> = ascent.w.iter().map(|x| x / total).collect();
    let sample = base.with_weights(w.clone())?;
    let w2sq = w2sq_discrete_continuous(&sample, target);
    let h = entropy(&w);
    Ok(ReweightSolution {
        weights: SimplexWeights(w),
        lambda,
        w2sq,
        entropy: h,
        objective: h - lambda * w2sq,
        iterations: ascent.iterations,
        converged: ascent.converged,
    })
}

/// Maximizes `H(w)` subject to `W2² ≤ ε` by log-scale bisection on λ.
///
/// Returns uniform weights when they already satisfy the budget. Among the
/// feasible dual solutions met during the bisection the one with the
/// smallest λ (largest entropy) is returned.
pub fn solve_primal(atoms: &[f64], target: &ParametricFamily, epsilon: f64, cfg: &SolverConfig) -> Result<ReweightSolution> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
            domain: "(0, inf]",
        });
    }
    let uniform = solve_dual(atoms, target, 0.0, cfg)?;
    if uniform.w2sq <= epsilon {
        return Ok(uniform);
    }
    let slack = 1e-6 * epsilon.max(1.0);
    let hard = solve_dual(atoms, target, LAMBDA_MAX, cfg)?;
    if hard.w2sq > epsilon + slack {
        return Err(Error::InfeasibleBudget {
            epsilon,
            min_w2sq: hard.w2sq,
        });
    }
    if (hard.w2sq - epsilon).abs() <= slack && hard.w2sq <= epsilon {
        return Ok(hard);
    }

    let mut lo = 1e-10_f64;
    let mut hi = LAMBDA_MAX;
    let mut best = hard;
    while hi - lo > 1e-10 * hi {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        let sol = solve_dual(atoms, target, mid, cfg)?;
        if (sol.w2sq - epsilon).abs() <= slack {
            return Ok(sol);
        }
        if sol.w2sq <= epsilon {
            hi = mid;
            best = sol;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}
