//! Long-only portfolios: the mean-variance baseline, a skew-normal target
//! matched to it, and weights trading entropy against `W2²` to the target.

mod entropic;
mod mv;

pub use entropic::{entropy_w2_portfolio, sweep_lambda, EntropicPortfolio, PortfolioConfig};
pub use mv::{mv_sweep, mv_weights, project_simplex, MvPoint, MvPortfolio};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{skew_normal_from_moments, Moments, ParametricFamily};
use crate::error::{Error, Result};
use crate::reweight::entropy;
use crate::rng::{stream, tags};

/// Weights below this count as zero.
pub const ZERO_WEIGHT: f64 = 1e-6;

/// `n × d` excess returns, one row per period.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl ReturnMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidArgument("need at least two periods".into()));
        }
        let d = labels.len();
        if d == 0 {
            return Err(Error::InvalidArgument("need at least one asset".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::InvalidArgument(format!(
                "period {i} has {} returns for {d} assets",
                rows[i].len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("returns must be finite".into()));
        }
        Ok(Self { rows, labels })
    }

    /// Labels `asset1..assetd`.
    pub fn unlabeled(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        Self::new(rows, (1..=d).map(|j| format!("asset{j}")).collect())
    }

    pub fn periods(&self) -> usize {
        self.rows.len()
    }

    pub fn assets(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Portfolio return `s_i = Σ_j w_j R_ij` for every period.
    pub fn portfolio_returns(&self, w: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
    }

    /// Sample mean and `1/n` covariance.
    pub fn mean_cov(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.periods() as f64;
        let d = self.assets();
        let mut mu = vec![0.0; d];
        for r in &self.rows {
            for j in 0..d {
                mu[j] += r[j] / n;
            }
        }
        let mut cov = vec![vec![0.0; d]; d];
        for r in &self.rows {
            for a in 0..d {
                for b in a..d {
                    cov[a][b] += (r[a] - mu[a]) * (r[b] - mu[b]) / n;
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                cov[a][b] = cov[b][a];
            }
        }
        (mu, cov)
    }
}

/// Sample moments of the portfolio return; the standardized moments are
/// `None` when the variance is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioStats {
    pub mean: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub zero_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub weights: Vec<f64>,
    /// Per-period returns `wᵀR_(i)`.
    pub atoms: Vec<f64>,
    pub stats: PortfolioStats,
    pub entropy: f64,
    /// `H_d(w) / log d`, in `[0, 1]`; zero when `d = 1`.
    pub bd_entropy: f64,
}

impl Portfolio {
    pub fn new(r: &ReturnMatrix, weights: Vec<f64>) -> Self {
        let atoms = r.portfolio_returns(&weights);
        let stats = portfolio_stats(r, &weights);
        let h = entropy(&weights);
        let d = weights.len();
        Self {
            // H ≤ log d holds exactly; clamp the rounding
            bd_entropy: if d > 1 { (h / (d as f64).ln()).clamp(0.0, 1.0) } else { 0.0 },
            entropy: h,
            weights,
            atoms,
            stats,
        }
    }
}

/// Moments use the `1/n` convention throughout.
pub fn portfolio_stats(r: &ReturnMatrix, w: &[f64]) -> PortfolioStats {
    let s = r.portfolio_returns(w);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in &s {
        let d = v - mean;
        m2 += d * d / n;
        m3 += d * d * d / n;
        m4 += d * d * d * d / n;
    }
    // spread at rounding level counts as constant
    let degenerate = m2 <= (f64::EPSILON * mean.abs()).powi(2) * 16.0 || m2 == 0.0;
    PortfolioStats {
        mean,
        variance: m2,
        skewness: (!degenerate).then(|| m3 / m2.powf(1.5)),
        excess_kurtosis: (!degenerate).then(|| m4 / (m2 * m2) - 3.0),
        zero_count: w.iter().filter(|&&x| x < ZERO_WEIGHT).count(),
    }
}

/// Skew-normal with the mean, variance and skewness of the MV portfolio at
/// risk aversion `lambda`. With `clip`, a skewness beyond the skew-normal
/// range is pulled to ±0.95 instead of failing.
pub fn target_from_mv(r: &ReturnMatrix, lambda: f64, clip: bool) -> Result<(ParametricFamily, MvPortfolio)> {
    let mv = mv_weights(r, lambda)?;
    let st = mv.portfolio.stats;
    let Some(mut skewness) = st.skewness else {
        return Err(Error::numerical(
            "target_from_mv",
            0,
            "MV portfolio return is constant; skewness undefined",
        ));
    };
    if clip && skewness.abs() >= crate::distributions::MAX_SKEW_NORMAL_SKEWNESS {
        skewness = 0.95 * skewness.signum();
    }
    let target = skew_normal_from_moments(&Moments {
        mean: st.mean,
        variance: st.variance,
        skewness,
    })?;
    Ok((target, mv))
}

/// Five assets driven by one market factor with volatility bursts and
/// occasional crashes, so portfolio returns are left-skewed and fat-tailed.
/// Means, volatilities and betas are loosely modeled on monthly large-cap
/// returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReturnSynthConfig {
    pub periods: usize,
    pub seed: u64,
    /// Per-period crash probability of the factor.
    pub crash_probability: f64,
    /// Crash size in factor standard deviations.
    pub crash_size: f64,
}

impl Default for ReturnSynthConfig {
    fn default() -> Self {
        Self {
            periods: 252,
            seed: 0,
            crash_probability: 0.05,
            crash_size: 4.0,
        }
    }
}

pub const SYNTH_ASSETS: [&str; 5] = ["AMZN", "AAPL", "XOM", "T", "MS"];
// (mean, factor loading, idiosyncratic sd), monthly
const SYNTH_PARAMS: [(f64, f64, f64); 5] = [
    (0.028, 0.075, 0.100),
    (0.030, 0.065, 0.075),
    (0.006, 0.030, 0.045),
    (0.004, 0.025, 0.055),
    (0.009, 0.060, 0.080),
];

pub fn synth_returns(cfg: &ReturnSynthConfig) -> Result<ReturnMatrix> {
    if cfg.periods < 2 {
        return Err(Error::Config("periods must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&cfg.crash_probability) || !(cfg.crash_size >= 0.0) {
        return Err(Error::Config("crash_probability must be in [0, 1), crash_size >= 0".into()));
    }
    let mut rng = stream(cfg.seed, tags::PORTFOLIO, 0);
    // centre the crash term so the factor has mean zero
    let crash_mean = cfg.crash_probability * cfg.crash_size;
    let rows = (0..cfg.periods)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            let burst = if rng.random::<f64>() < 0.1 { 2.0 } else { 1.0 };
            let crash = if rng.random::<f64>() < cfg.crash_probability {
                cfg.crash_size
            } else {
                0.0
            };
            let f = burst * z - crash + crash_mean;
            SYNTH_PARAMS
                .iter()
                .map(|&(mu, beta, sd)| {
                    let e: f64 = rng.sample(StandardNormal);
                    mu + beta * f + sd * e
                })
                .collect()
        })
        .collect();
    ReturnMatrix::new(rows, SYNTH_ASSETS.iter().map(|s| s.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_match_direct_formulas() {
        let rows = vec![
            vec![0.01, 0.03],
            vec![-0.02, 0.01],
            vec![0.05, -0.04],
            vec![0.00, 0.02],
            vec![-0.07, 0.06],
        ];
        let r = ReturnMatrix::unlabeled(rows.clone()).unwrap();
        let w = [0.3, 0.7];
        let st = portfolio_stats(&r, &w);
        let s: Vec<f64> = rows.iter().map(|x| 0.3 * x[0] + 0.7 * x[1]).collect();
        let m = s.iter().sum::<f64>() / 5.0;
        let c = |k: i32| s.iter().map(|v| (v - m).powi(k)).sum::<f64>() / 5.0;
        assert!((st.mean - m).abs() < 1e-16);
        assert!((st.variance - c(2)).abs() < 1e-16);
        assert!((st.skewness.unwrap() - c(3) / c(2).powf(1.5)).abs() < 1e-12);
        assert!((st.excess_kurtosis.unwrap() - (c(4) / c(2).powi(2) - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_symmetric_stats() {
        let r = ReturnMatrix::unlabeled(vec![vec![0.01]; 4]).unwrap();
        let st = portfolio_stats(&r, &[1.0]);
        assert_eq!(st.variance, 0.0);
        assert!(st.skewness.is_none() && st.excess_kurtosis.is_none());
        let r = ReturnMatrix::unlabeled(vec![vec![-1.0], vec![1.0], vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(portfolio_stats(&r, &[1.0]).skewness, Some(0.0));
    }

    #[test]
    fn atoms_are_consistent() {
        let r = synth_returns(&ReturnSynthConfig::default()).unwrap();
        let w = vec![0.1, 0.2, 0.3, 0.25, 0.15];
        let p = Portfolio::new(&r, w.clone());
        for (i, row) in r.rows().iter().enumerate() {
            let s: f64 = (0..5).map(|j| w[j] * row[j]).sum();
            assert_eq!(p.atoms[i], s);
        }
        assert!(p.bd_entropy > 0.0 && p.bd_entropy <= 1.0);
    }

    #[test]
    fn synthetic_returns_are_deterministic() {
        let cfg = ReturnSynthConfig::default();
        let a = synth_returns(&cfg).unwrap();
        assert_eq!((a.periods(), a.assets()), (252, 5));
        assert_eq!(a, synth_returns(&cfg).unwrap());
    }

    #[test]
    fn target_round_trips_portfolio_moments() {
        let r = synth_returns(&ReturnSynthConfig::default()).unwrap();
        let (target, mv) = target_from_mv(&r, 1.0, false).unwrap();
        let m = target.moments();
        let st = mv.portfolio.stats;
        assert!((m.mean - st.mean).abs() < 1e-8);
        assert!((m.variance - st.variance).abs() < 1e-8);
        assert!((m.skewness - st.skewness.unwrap()).abs() < 1e-8);
        assert!(matches!(target, ParametricFamily::SkewNormal { shape, .. } if shape < 0.0));
    }

    #[test]
    fn symmetric_returns_give_near_zero_shape() {
        // returns mirrored around their mean
        let base = [0.03, -0.01, 0.02, 0.05, -0.04, 0.00, 0.01];
        let rows: Vec<Vec<f64>> = base.iter().flat_map(|&v| [vec![v, 0.5 * v], vec![-v, -0.5 * v]]).collect();
        let r = ReturnMatrix::unlabeled(rows).unwrap();
        let (target, _) = target_from_mv(&r, 5.0, false).unwrap();
        let ParametricFamily::SkewNormal { shape, .. } = target else { panic!() };
        assert!(shape.abs() < 1e-6, "{shape}");
    }
}
