use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SurveySample;
use crate::distributions::std_normal_cdf;
use crate::error::{Error, Result};
use crate::rng::{stream, tags};

/// Bivariate-normal finite population with probit selection on `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub population_size: usize,
    pub sample_size: usize,
    pub mean_x: f64,
    pub mean_z: f64,
    pub var_x: f64,
    pub var_z: f64,
    pub rho: f64,
    pub beta0: f64,
    pub beta1: f64,
    /// Monte Carlo replicates.
    pub replicates: usize,
    /// Bootstrap pseudo-samples per replicate.
    pub bootstrap: usize,
    /// Put the standardized score `(Z − μ_z)/σ_z` into the probit.
    /// With the raw `Z` (mean 10) and `β₁ = −1.8` every inclusion
    /// probability is below 1e-15 and the weights overflow.
    pub standardize_selection: bool,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            population_size: 100_000,
            sample_size: 500,
            mean_x: 0.0,
            mean_z: 10.0,
            var_x: 4.0,
            var_z: 16.0,
            rho: 0.5,
            beta0: 0.1,
            beta1: -1.8,
            replicates: 100,
            bootstrap: 50,
            standardize_selection: true,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 2 || self.population_size < self.sample_size {
            return Err(Error::Config(format!(
                "need population_size >= sample_size >= 2, got N = {} and n = {}",
                self.population_size, self.sample_size
            )));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho = {} is outside (-1, 1)", self.rho)));
        }
        if !(self.var_x > 0.0 && self.var_z > 0.0) {
            return Err(Error::Config("variances must be positive".into()));
        }
        if self.bootstrap < 1 || self.replicates < 1 {
            return Err(Error::Config("replicates and bootstrap must be at least 1".into()));
        }
        for (name, v) in [
            ("mean_x", self.mean_x),
            ("mean_z", self.mean_z),
            ("beta0", self.beta0),
            ("beta1", self.beta1),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Inclusion probabilities `π*`.
    pub inclusion: Vec<f64>,
    /// Indices of the sampled units, ascending.
    pub sampled: Vec<usize>,
}

/// Draws the finite population for Monte Carlo replicate `replicate` and a
/// without-replacement sample with selection probability proportional to
/// `π*` (successive sampling, via Efraimidis–Spirakis keys). Survey weights
/// are `1/π*` rescaled to sum to `n`; `Z` is not part of the sample.
pub fn simulate_population(cfg: &SimulationConfig, replicate: u64) -> Result<(Population, SurveySample)> {
    cfg.validate()?;
    let big_n = cfg.population_size;
    let mut rng = stream(cfg.seed, tags::POPULATION, replicate);
    let sx = cfg.var_x.sqrt();
    let sz = cfg.var_z.sqrt();
    let tail = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut x = Vec::with_capacity(big_n);
    let mut z = Vec::with_capacity(big_n);
    let mut inclusion = Vec::with_capacity(big_n);
    for _ in 0..big_n {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let zs = cfg.rho * a + tail * b;
        x.push(cfg.mean_x + sx * a);
        let zi = cfg.mean_z + sz * zs;
        z.push(zi);
        let score = if cfg.standardize_selection { zs } else { zi };
        inclusion.push(std_normal_cdf(cfg.beta0 + cfg.beta1 * score));
    }
    if inclusion.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::numerical(
            "simulate_population",
            0,
            "an inclusion probability underflowed to zero",
        ));
    }

    let mut rng = stream(cfg.seed, tags::SAMPLE, replicate);
    // key = ln(u)/p; the n largest keys form a successive-sampling draw
    let mut keys: Vec<(f64, usize)> = inclusion
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / p, i)
        })
        .collect();
    let n = cfg.sample_size;
    if n < big_n {
        keys.select_nth_unstable_by(n, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    }
    let mut sampled: Vec<usize> = keys[..n].iter().map(|k| k.1).collect();
    sampled.sort_unstable();

    let inv: Vec<f64> = sampled.iter().map(|&i| 1.0 / inclusion[i]).collect();
    let total: f64 = inv.iter().sum();
    let pi: Vec<f64> = inv.iter().map(|v| v / total * n as f64).collect();
    let sample = SurveySample::univariate(sampled.iter().map(|&i| x[i]).collect(), pi)?;
    Ok((
        Population {
            x,
            z,
            inclusion,
            sampled,
        },
        sample,
    ))
}
