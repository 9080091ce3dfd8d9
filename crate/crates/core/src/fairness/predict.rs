use serde::{Deserialize, Serialize};

use super::{linear_predict, FairDataset, FairFit, Group};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    /// The kernel mass underflowed and the plain linear prediction was used.
    pub fallback: bool,
}

/// Silverman's rule per covariate for a Gaussian product kernel on the `T`
/// records: `b_j = s_j (4 / ((d + 2) n))^{1/(d+4)}`. Constant covariates get
/// bandwidth 1.
pub fn silverman_bandwidth(data: &FairDataset) -> Vec<f64> {
    let xt = data.covariates(Group::T);
    let n = xt.len() as f64;
    let d = data.dim() as f64;
    let factor = (4.0 / ((d + 2.0) * n)).powf(1.0 / (d + 4.0));
    (0..data.dim())
        .map(|j| {
            let mean = xt.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = xt.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            if var > 0.0 {
                var.sqrt() * factor
            } else {
                1.0
            }
        })
        .collect()
}

/// Prediction at a new `x`. For `S` this is `h(x, θ_S)`. For `T` it is the
/// `w`-weighted Nadaraya–Watson average of the fitted `T` values with a
/// Gaussian product kernel; `bandwidth` defaults to [`silverman_bandwidth`].
pub fn predict_fair(
    fit: &FairFit,
    data: &FairDataset,
    x: &[f64],
    group: Group,
    bandwidth: Option<&[f64]>,
) -> Result<Prediction> {
    if x.len() != data.dim() {
        return Err(Error::InvalidArgument(format!(
            "x has {} covariates, the data have {}",
            x.len(),
            data.dim()
        )));
    }
    if group == Group::S {
        return Ok(Prediction {
            value: linear_predict(&fit.theta_s, x),
            fallback: false,
        });
    }
    let default;
    let b = match bandwidth {
        Some(b) => b,
        None => {
            default = silverman_bandwidth(data);
            &default
        }
    };
    if b.len() != x.len() || b.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("bandwidths must be positive, one per covariate".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, &wi) in data.covariates(Group::T).iter().zip(&fit.weights) {
        let u2: f64 = xi.iter().zip(x).zip(b).map(|((a, c), h)| ((a - c) / h).powi(2)).sum();
        let k = wi * (-0.5 * u2).exp();
        num += k * linear_predict(&fit.theta_t, xi);
        den += k;
    }
    if !(den > f64::MIN_POSITIVE) {
        return Ok(Prediction {
            value: linear_predict(&fit.theta_t, x),
            fallback: true,
        });
    }
    Ok(Prediction {
        value: num / den,
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{fit_unconstrained, FairDataset};

    fn toy() -> (FairDataset, FairFit) {
        let xs: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0].iter().map(|&v| vec![v]).collect();
        let ys = vec![0.1, 1.9, 4.2, 5.8];
        let xt: Vec<Vec<f64>> = [0.0, 1.0, 3.0].iter().map(|&v| vec![v]).collect();
        let yt = vec![1.0, 2.1, 3.9];
        let d = FairDataset::from_groups(xs, ys, xt, yt).unwrap();
        let mut fit = fit_unconstrained(&d).unwrap();
        fit.weights = vec![0.5, 0.3, 0.2];
        (d, fit)
    }

    #[test]
    fn hand_computed_kernel_weights() {
        let (d, fit) = toy();
        let p = predict_fair(&fit, &d, &[0.5], Group::T, Some(&[1.0])).unwrap();
        let h: Vec<f64> = [0.0, 1.0, 3.0].iter().map(|&v| fit.theta_t[0] + fit.theta_t[1] * v).collect();
        let k = [0.5 * (-0.125f64).exp(), 0.3 * (-0.125f64).exp(), 0.2 * (-3.125f64).exp()];
        let want = (k[0] * h[0] + k[1] * h[1] + k[2] * h[2]) / (k[0] + k[1] + k[2]);
        assert!((p.value - want).abs() < 1e-14);
        assert!(!p.fallback);
    }

    #[test]
    fn kernel_limits() {
        let (d, mut fit) = toy();
        fit.weights = vec![1.0 / 3.0; 3];
        let wide = predict_fair(&fit, &d, &[0.7], Group::T, Some(&[1e8])).unwrap();
        let mean = fit.fitted(&d, Group::T).iter().sum::<f64>() / 3.0;
        assert!((wide.value - mean).abs() < 1e-9);
        fit.weights = vec![0.98, 0.01, 0.01];
        let narrow = predict_fair(&fit, &d, &[0.0], Group::T, Some(&[1e-3])).unwrap();
        assert!((narrow.value - fit.theta_t[0]).abs() < 1e-12);
    }

    #[test]
    fn far_points_fall_back() {
        let (d, fit) = toy();
        let p = predict_fair(&fit, &d, &[1e6], Group::T, None).unwrap();
        assert!(p.fallback);
        assert_eq!(p.value, fit.theta_t[0] + fit.theta_t[1] * 1e6);
        let s = predict_fair(&fit, &d, &[2.0], Group::S, None).unwrap();
        assert_eq!(s.value, fit.theta_s[0] + 2.0 * fit.theta_s[1]);
    }
}
