use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Portfolio, ReturnMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvPortfolio {
    pub lambda: f64,
    pub portfolio: Portfolio,
    /// `‖w − P(w + ∇q(w))‖_∞` for the concave objective `q`.
    pub kkt_residual: f64,
    /// The maximizer is not unique (only detected for `λ = 0`).
    pub degenerate: bool,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Long-only mean-variance weights `argmax_w wᵀμ − (λ/2) wᵀΣw` on the simplex.
///
/// Accelerated projected gradient to locate the support, then the
/// equality-constrained optimum on that support is solved exactly and kept
/// if it is feasible and at least as stationary.
pub fn mv_weights(r: &ReturnMatrix, lambda: f64) -> Result<MvPortfolio> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            what: "risk aversion",
            value: lambda,
            domain: "[0, inf)",
        });
    }
    let d = r.assets();
    let (mu, cov) = r.mean_cov();
    let sigma = DMatrix::from_fn(d, d, |a, b| cov[a][b]);
    let mu_v = DVector::from_vec(mu.clone());
    let grad = |w: &DVector<f64>| -> DVector<f64> { &mu_v - &sigma * w * lambda };
    let residual = |w: &DVector<f64>| -> f64 {
        let g = grad(w);
        let step: Vec<f64> = (0..d).map(|j| w[j] + g[j]).collect();
        project_simplex(&step)
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };

    let top = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut degenerate = false;
    let w = if lambda == 0.0 || d == 1 {
        let best: Vec<usize> = (0..d).filter(|&j| mu[j] == top).collect();
        degenerate = lambda == 0.0 && best.len() > 1;
        let mut w = DVector::zeros(d);
        w[best[0]] = 1.0;
        w
    } else {
        let l = lambda * sigma.clone().symmetric_eigen().eigenvalues.max();
        let step = if l > 0.0 { 1.0 / l } else { 1.0 };
        let mut w = DVector::from_element(d, 1.0 / d as f64);
        let mut y = w.clone();
        let mut t = 1.0_f64;
        for _ in 0..200_000 {
            let g = grad(&y);
            let next = DVector::from_vec(project_simplex(
                &(0..d).map(|j| y[j] + step * g[j]).collect::<Vec<_>>(),
            ));
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &w) * ((t - 1.0) / t_next);
            let moved = (&next - &w).amax();
            w = next;
            t = t_next;
            if moved < 1e-15 {
                break;
            }
        }
        polish(&w, &sigma, &mu_v, lambda)
            .filter(|p| residual(p) <= residual(&w))
            .unwrap_or(w)
    };
    let kkt_residual = residual(&w);
    if kkt_residual > 1e-8 {
        return Err(Error::numerical(
            "mv_weights",
            0,
            format!("KKT residual {kkt_residual:.3e} above 1e-8"),
        ));
    }
    let weights: Vec<f64> = w.iter().copied().collect();
    Ok(MvPortfolio {
        lambda,
        portfolio: Portfolio::new(r, weights),
        kkt_residual,
        degenerate,
    })
}

/// Stationary point of the objective on the current support, with
/// `Σ w = 1`; `None` if it leaves the orthant.
fn polish(w: &DVector<f64>, sigma: &DMatrix<f64>, mu: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 1e-12).collect();
    let k = support.len();
    // [λ Σ_SS  1; 1ᵀ 0] [w_S; ν] = [μ_S; 1]
    let mut a = DMatrix::zeros(k + 1, k + 1);
    let mut b = DVector::zeros(k + 1);
    for (p, &i) in support.iter().enumerate() {
        for (q, &j) in support.iter().enumerate() {
            a[(p, q)] = lambda * sigma[(i, j)];
        }
        a[(p, k)] = 1.0;
        a[(k, p)] = 1.0;
        b[p] = mu[i];
    }
    b[k] = 1.0;
    let x = a.lu().solve(&b)?;
    let mut out = DVector::zeros(w.len());
    for (p, &i) in support.iter().enumerate() {
        if !(x[p] >= 0.0) {
            return None;
        }
        out[i] = x[p];
    }
    let total = out.sum();
    Some(out / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvPoint {
    pub lambda: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub zero_count: usize,
    pub weights: Vec<f64>,
}

/// MV portfolios over a grid of risk aversions.
pub fn mv_sweep(r: &ReturnMatrix, grid: &[f64]) -> Result<Vec<MvPoint>> {
    grid.iter()
        .map(|&lambda| {
            let mv = mv_weights(r, lambda)?;
            let st = mv.portfolio.stats;
            Ok(MvPoint {
                lambda,
                skewness: st.skewness,
                excess_kurtosis: st.excess_kurtosis,
                zero_count: st.zero_count,
                weights: mv.portfolio.weights,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{synth_returns, ReturnSynthConfig};

    fn from_cov_rows(rows: Vec<Vec<f64>>) -> ReturnMatrix {
        ReturnMatrix::unlabeled(rows).unwrap()
    }

    #[test]
    fn projection_basics() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, -3.0, 0.4]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn single_asset() {
        let r = from_cov_rows(vec![vec![0.01], vec![0.03], vec![-0.02]]);
        assert_eq!(mv_weights(&r, 2.0).unwrap().portfolio.weights, vec![1.0]);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        // equal means, equal variances, zero sample covariance
        let r = from_cov_rows(vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]]);
        let w = mv_weights(&r, 3.0).unwrap().portfolio.weights;
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
        assert!(mv_weights(&r, 0.0).unwrap().degenerate);
    }

    #[test]
    fn diagonal_minimum_variance() {
        // zero-mean, orthogonal columns with variances 1, 4, 9
        let s = [1.0, 2.0, 3.0];
        let signs = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        let rows: Vec<Vec<f64>> = signs.iter().map(|g| (0..3).map(|j| g[j] * s[j]).collect()).collect();
        let r = from_cov_rows(rows);
        let w = mv_weights(&r, 1e3).unwrap().portfolio.weights;
        let inv: Vec<f64> = s.iter().map(|v| 1.0 / (v * v)).collect();
        let z: f64 = inv.iter().sum();
        for j in 0..3 {
            assert!((w[j] - inv[j] / z).abs() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn kkt_holds_on_synthetic_grid() {
        let r = synth_returns(&ReturnSynthConfig::default()).unwrap();
        for lambda in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let mv = mv_weights(&r, lambda).unwrap();
            assert!(mv.kkt_residual <= 1e-8);
            assert!((mv.portfolio.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
