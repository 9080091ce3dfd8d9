use nalgebra::{DMatrix, DVector};

use super::EstimatingFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EtelResult {
    /// Tilted weights; `None` when the convex-hull condition fails.
    pub weights: Option<Vec<f64>>,
    /// `Σ log w_i`, or `−∞` on convex-hull failure.
    pub loglik: f64,
    /// Tilting parameter `λ(θ)`.
    pub eta: Vec<f64>,
    pub iterations: usize,
}

impl EtelResult {
    fn failed(r: usize, iterations: usize) -> Self {
        Self {
            weights: None,
            loglik: f64::NEG_INFINITY,
            eta: vec![f64::NAN; r],
            iterations,
        }
    }
}

/// Exponentially tilted empirical likelihood at `θ`.
///
/// `λ(θ) = argmin_η (1/n) Σ exp(π_i ηᵀ g_i)` is found by damped Newton,
/// and `w_i ∝ exp(π_i λᵀ g_i)`. When the origin is not strictly inside the
/// convex hull of the `g_i` the minimum is not attained and the
/// log-likelihood is `−∞`.
pub fn etel(theta: &[f64], xs: &[Vec<f64>], pi: &[f64], g: &EstimatingFunction) -> Result<EtelResult> {
    if xs.len() != pi.len() {
        return Err(Error::InvalidArgument(format!(
            "{} observations but {} weights",
            xs.len(),
            pi.len()
        )));
    }
    let gm = g.eval_all(xs, theta);
    if gm.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("estimating function is not finite at theta".into()));
    }
    Ok(etel_from_moments(&gm, g.dim(), pi))
}

/// ETEL from a precomputed `n × r` row-major moment matrix.
pub(crate) fn etel_from_moments(gm: &[f64], r: usize, pi: &[f64]) -> EtelResult {
    let n = pi.len();
    // rows of π_i g_i
    let pg: Vec<f64> = (0..n * r).map(|k| pi[k / r] * gm[k]).collect();
    let scale = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        // every moment is zero: uniform weights
        return EtelResult {
            weights: Some(vec![1.0 / n as f64; n]),
            loglik: -(n as f64) * (n as f64).ln(),
            eta: vec![0.0; r],
            iterations: 0,
        };
    }
    if r == 1 {
        let lo = pg.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo < 0.0 && hi > 0.0) {
            return EtelResult::failed(r, 0);
        }
    }

    let mut eta = DVector::<f64>::zeros(r);
    let mut a = vec![0.0; n];
    let log_q = |eta: &DVector<f64>, a: &mut [f64]| -> f64 {
        for i in 0..n {
            let row = &pg[i * r..(i + 1) * r];
            a[i] = row.iter().zip(eta.iter()).map(|(x, e)| x * e).sum();
        }
        log_sum_exp(a)
    };
    let mut f = log_q(&eta, &mut a);
    let tol = 1e-13 * scale;
    for it in 1..=200 {
        let top = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut w = vec![0.0; n];
        for i in 0..n {
            w[i] = (a[i] - top).exp();
            z += w[i];
        }
        let mut grad = DVector::<f64>::zeros(r);
        let mut hess = DMatrix::<f64>::zeros(r, r);
        for i in 0..n {
            let wi = w[i] / z;
            let row = &pg[i * r..(i + 1) * r];
            for p in 0..r {
                grad[p] += wi * row[p];
                for q in 0..r {
                    hess[(p, q)] += wi * row[p] * row[q];
                }
            }
        }
        if grad.norm() <= tol {
            return finish(&a, eta, it);
        }
        // Hessian of log Σ exp(a_i): weighted covariance of the rows
        hess -= &grad * grad.transpose();
        let dir = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -grad.clone(),
        };
        let slope = grad.dot(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = vec![0.0; n];
        while t > 1e-12 {
            let cand = &eta + &dir * t;
            let fc = log_q(&cand, &mut trial);
            if fc <= f + 1e-4 * t * slope {
                eta = cand;
                f = fc;
                a.copy_from_slice(&trial);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // stalled; accept if the moment condition already holds
            return if grad.norm() <= 1e-9 * scale {
                finish(&a, eta, it)
            } else {
                EtelResult::failed(r, it)
            };
        }
        if eta.norm() > 1e6 {
            return EtelResult::failed(r, it);
        }
    }
    EtelResult::failed(r, 200)
}

fn finish(a: &[f64], eta: DVector<f64>, iterations: usize) -> EtelResult {
    let lse = log_sum_exp(a);
    let logw: Vec<f64> = a.iter().map(|v| v - lse).collect();
    EtelResult {
        loglik: logw.iter().sum(),
        weights: Some(logw.iter().map(|v| v.exp()).collect()),
        eta: eta.iter().copied().collect(),
        iterations,
    }
}

pub(crate) fn log_sum_exp(a: &[f64]) -> f64 {
    let top = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + a.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn sample_mean_gives_uniform() {
        let x = [1.0, 2.0, 6.0, -1.0];
        let r = etel(&[2.0], &col(&x), &[1.0; 4], &EstimatingFunction::MeanDeviation).unwrap();
        let w = r.weights.unwrap();
        assert!(w.iter().all(|&v| (v - 0.25).abs() < 1e-14));
        assert!((r.loglik + 4.0 * 4f64.ln()).abs() < 1e-12);
        assert!(r.eta[0].abs() < 1e-12);
    }

    #[test]
    fn two_point_case() {
        let r = etel(&[0.3], &col(&[0.0, 1.0]), &[1.0, 1.0], &EstimatingFunction::MeanDeviation).unwrap();
        let w = r.weights.unwrap();
        assert!((w[0] - 0.7).abs() < 1e-12 && (w[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn hull_failure_is_minus_infinity() {
        let r = etel(&[2.0], &col(&[0.0, 1.0]), &[1.0, 1.0], &EstimatingFunction::MeanDeviation).unwrap();
        assert_eq!(r.loglik, f64::NEG_INFINITY);
        assert!(r.weights.is_none());
        // origin on the boundary of a 2-D hull
        let xs = col(&[0.0, 1.0, 2.0]);
        let r = etel(&[0.0, 0.5], &xs, &[1.0; 3], &EstimatingFunction::MeanVariance).unwrap();
        assert_eq!(r.loglik, f64::NEG_INFINITY);
    }

    #[test]
    fn weighted_moment_condition_and_display() {
        let x = [0.3, -1.2, 2.5, 0.9, -0.4, 1.7];
        let pi = [0.5, 1.5, 0.8, 1.2, 1.0, 1.0];
        let theta = [0.8, 1.1];
        let g = EstimatingFunction::MeanVariance;
        let r = etel(&theta, &col(&x), &pi, &g).unwrap();
        let w = r.weights.clone().unwrap();
        let mut m = [0.0; 2];
        let mut out = [0.0; 2];
        for i in 0..6 {
            g.eval(&[x[i]], &theta, &mut out);
            m[0] += w[i] * pi[i] * out[0];
            m[1] += w[i] * pi[i] * out[1];
            let tilt = (pi[i] * (r.eta[0] * out[0] + r.eta[1] * out[1])).exp();
            // w_i / tilt_i is the same normalizing constant for every i
            let c0 = {
                g.eval(&[x[0]], &theta, &mut out);
                w[0] / (pi[0] * (r.eta[0] * out[0] + r.eta[1] * out[1])).exp()
            };
            assert!((w[i] / tilt - c0).abs() < 1e-12 * c0);
        }
        assert!(m[0].abs() < 1e-10 && m[1].abs() < 1e-10);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interior_point_far_from_sample_moments_converges() {
        // sample mean ~1.9, sample variance ~4; theta = (0, 1) is still inside the hull
        let x: Vec<f64> = (0..30).map(|i| -1.5 + 0.23 * i as f64).collect();
        let r = etel(&[0.0, 1.0], &col(&x), &[1.0; 30], &EstimatingFunction::MeanVariance).unwrap();
        let w = r.weights.expect("origin is inside the hull");
        let mean: f64 = w.iter().zip(&x).map(|(w, x)| w * x).sum();
        let var: f64 = w.iter().zip(&x).map(|(w, x)| w * x * x).sum();
        assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
    }
}
