//! Wasserstein demographic parity for linear regression with two groups.
//!
//! Group `S` keeps uniform weights; group `T` is reweighted by `w` on the
//! simplex so that the weighted distribution of its fitted values is close
//! to that of `S`.

mod chain;
mod fit;
mod predict;

pub use fit::{
    fairness_sweep, fit_in_model, fit_two_step, fit_unconstrained, FairConfig, FairFit, Scheme, SweepPoint,
};
pub use predict::{predict_fair, silverman_bandwidth, Prediction};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    S,
    T,
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S" | "s" => Ok(Group::S),
            "T" | "t" => Ok(Group::T),
            other => Err(Error::InvalidArgument(format!("group label {other:?} is not S or T"))),
        }
    }
}

/// Records `(x_i, y_i, a_i)` stored with the `S` group first.
#[derive(Debug, Clone, PartialEq)]
pub struct FairDataset {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    n_s: usize,
}

impl FairDataset {
    /// Reorders the records so that `S` comes first, keeping the relative
    /// order inside each group.
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, groups: &[Group]) -> Result<Self> {
        let n = x.len();
        if y.len() != n || groups.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{n} covariate rows, {} responses, {} labels",
                y.len(),
                groups.len()
            )));
        }
        let p = x.first().map_or(0, |r| r.len());
        if x.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("covariate rows differ in length".into()));
        }
        if x.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data must be finite".into()));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by_key(|&i| groups[i] == Group::T);
        let n_s = groups.iter().filter(|&&g| g == Group::S).count();
        if n_s == 0 || n_s == n {
            return Err(Error::InvalidArgument("both groups must be nonempty".into()));
        }
        Ok(Self {
            x: idx.iter().map(|&i| x[i].clone()).collect(),
            y: idx.iter().map(|&i| y[i]).collect(),
            n_s,
        })
    }

    pub fn from_groups(x_s: Vec<Vec<f64>>, y_s: Vec<f64>, x_t: Vec<Vec<f64>>, y_t: Vec<f64>) -> Result<Self> {
        let mut groups = vec![Group::S; x_s.len()];
        groups.extend(std::iter::repeat_n(Group::T, x_t.len()));
        let x = x_s.into_iter().chain(x_t).collect();
        let y = y_s.into_iter().chain(y_t).collect();
        Self::new(x, y, &groups)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_t(&self) -> usize {
        self.y.len() - self.n_s
    }

    /// Number of covariates (without the intercept).
    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn covariates(&self, g: Group) -> &[Vec<f64>] {
        match g {
            Group::S => &self.x[..self.n_s],
            Group::T => &self.x[self.n_s..],
        }
    }

    pub fn responses(&self, g: Group) -> &[f64] {
        match g {
            Group::S => &self.y[..self.n_s],
            Group::T => &self.y[self.n_s..],
        }
    }

    pub fn groups(&self) -> impl Iterator<Item = Group> + '_ {
        (0..self.len()).map(|i| if i < self.n_s { Group::S } else { Group::T })
    }
}

/// `h(x, θ) = θ_0 + Σ_j θ_{j+1} x_j`.
pub fn linear_predict(theta: &[f64], x: &[f64]) -> f64 {
    theta[0] + theta[1..].iter().zip(x).map(|(t, v)| t * v).sum::<f64>()
}

/// Two groups with standard-normal covariates and linear responses. `T`
/// has its intercept shifted by `shift` and its slopes scaled by
/// `slope_ratio`; with `shift = 0` and `slope_ratio = 1` the groups are
/// identically distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairSynthConfig {
    pub n_s: usize,
    pub n_t: usize,
    pub dim: usize,
    pub intercept: f64,
    pub shift: f64,
    /// Length of the `S` slope vector.
    pub slope_norm: f64,
    pub slope_ratio: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for FairSynthConfig {
    fn default() -> Self {
        // fitted-value laws N(10, 100) and N(22, 625): W2 ≈ 19.2
        Self {
            n_s: 100,
            n_t: 100,
            dim: 6,
            intercept: 10.0,
            shift: 12.0,
            slope_norm: 10.0,
            slope_ratio: 2.5,
            noise: 3.0,
            seed: 0,
        }
    }
}

impl FairSynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n_s < self.dim + 2 || self.n_t < self.dim + 2 {
            return Err(Error::Config(format!(
                "each group needs more than dim + 1 = {} records",
                self.dim + 1
            )));
        }
        if !(self.noise >= 0.0) || !self.shift.is_finite() || !self.slope_ratio.is_finite() || !self.slope_norm.is_finite()
        {
            return Err(Error::Config("synthetic fairness parameters must be finite, noise >= 0".into()));
        }
        Ok(())
    }
}

pub fn synth_fair_data(cfg: &FairSynthConfig) -> Result<FairDataset> {
    cfg.validate()?;
    // alternating-sign slope direction
    let unit = 1.0 / (cfg.dim as f64).sqrt();
    let beta: Vec<f64> = (0..cfg.dim)
        .map(|j| if j % 2 == 0 { cfg.slope_norm * unit } else { -cfg.slope_norm * unit })
        .collect();
    let draw = |index: u64, n: usize, intercept: f64, scale: f64| {
        let mut rng = stream(cfg.seed, tags::FAIRNESS, index);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..cfg.dim).map(|_| rng.sample(StandardNormal)).collect();
            let e: f64 = rng.sample(StandardNormal);
            let mean = intercept + scale * x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
            ys.push(mean + cfg.noise * e);
            xs.push(x);
        }
        (xs, ys)
    };
    let (x_s, y_s) = draw(0, cfg.n_s, cfg.intercept, 1.0);
    let (x_t, y_t) = draw(1, cfg.n_t, cfg.intercept + cfg.shift, cfg.slope_ratio);
    FairDataset::from_groups(x_s, y_s, x_t, y_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_reordered_s_first() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let y = vec![10.0, 20.0, 30.0, 40.0];
        let d = FairDataset::new(x, y, &[Group::T, Group::S, Group::T, Group::S]).unwrap();
        assert_eq!(d.n_s(), 2);
        assert_eq!(d.responses(Group::S), &[20.0, 40.0]);
        assert_eq!(d.responses(Group::T), &[10.0, 30.0]);
        assert!(FairDataset::new(vec![vec![1.0]], vec![1.0], &[Group::S]).is_err());
    }

    #[test]
    fn synthetic_shape_and_determinism() {
        let cfg = FairSynthConfig::default();
        let d = synth_fair_data(&cfg).unwrap();
        assert_eq!((d.n_s(), d.n_t(), d.dim()), (100, 100, 6));
        assert_eq!(d, synth_fair_data(&cfg).unwrap());
        let other = synth_fair_data(&FairSynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(d, other);
    }

    #[test]
    fn group_labels_parse() {
        assert_eq!("S".parse::<Group>().unwrap(), Group::S);
        assert_eq!(" t".parse::<Group>().unwrap(), Group::T);
        assert!("U".parse::<Group>().is_err());
    }
}
