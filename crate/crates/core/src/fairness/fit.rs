use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{linear_predict, FairDataset, Group};
use crate::error::{Error, Result};
use super::chain::ChainProblem;
use crate::reweight::entropy;
use crate::transport::{w2sq_discrete_discrete, WeightedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Unconstrained,
    TwoStep,
    InModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FairConfig {
    /// Coordinate sweeps allowed per weight update.
    pub max_sweeps: usize,
    /// A weight update stops once no weight moves by more than this.
    pub weight_tol: f64,
    /// Block-ascent rounds in the in-model fit.
    pub max_rounds: usize,
    /// Stop when the in-model objective changes by less than this
    /// (relative to `1 + |J|`).
    pub tol: f64,
}

impl FairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 || self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_sweeps and max_rounds must be positive".into()));
        }
        for (what, value) in [("weight_tol", self.weight_tol), ("tol", self.tol)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain { what, value, domain: "(0, inf)" });
            }
        }
        Ok(())
    }
}

impl Default for FairConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 200_000,
            weight_tol: 1e-12,
            max_rounds: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairFit {
    pub scheme: Scheme,
    pub theta_s: Vec<f64>,
    pub theta_t: Vec<f64>,
    /// Pooled residual variance of the unconstrained fit.
    pub sigma2: f64,
    /// Weights on the `T` records, in dataset order.
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// `W2²` between the fitted-value distributions of `S` and weighted `T`.
    pub w2sq: f64,
    pub entropy: f64,
    /// Value of the joint objective at the returned point.
    pub objective: f64,
    pub iterations: usize,
}

impl FairFit {
    pub fn w2(&self) -> f64 {
        self.w2sq.sqrt()
    }

    /// `h(x_i, θ_(g))` for every record of group `g`.
    pub fn fitted(&self, data: &FairDataset, g: Group) -> Vec<f64> {
        let theta = match g {
            Group::S => &self.theta_s,
            Group::T => &self.theta_t,
        };
        data.covariates(g).iter().map(|x| linear_predict(theta, x)).collect()
    }
}

/// Group-wise least squares; `σ²` is the pooled residual mean square.
pub fn fit_unconstrained(data: &FairDataset) -> Result<FairFit> {
    let (theta_s, rss_s) = ols(data.covariates(Group::S), data.responses(Group::S))?;
    let (theta_t, rss_t) = ols(data.covariates(Group::T), data.responses(Group::T))?;
    let sigma2 = (rss_s + rss_t) / data.len() as f64;
    let w = vec![1.0 / data.n_t() as f64; data.n_t()];
    let problem = Problem::new(data, sigma2, 0.0);
    Ok(problem.finish(Scheme::Unconstrained, theta_s, theta_t, w, 0))
}

/// Unconstrained fit, then the weights maximizing
/// `−(1−λ*) W2² + λ* H(w)` at the fitted coefficients.
pub fn fit_two_step(data: &FairDataset, lambda: f64, cfg: &FairConfig) -> Result<FairFit> {
    check_lambda(lambda)?;
    cfg.validate()?;
    let base = fit_unconstrained(data)?;
    let problem = Problem::new(data, base.sigma2, lambda);
    let hs = base.fitted(data, Group::S);
    let ht = base.fitted(data, Group::T);
    let n_t = data.n_t();
    let (w, iterations) = if lambda == 1.0 {
        (vec![1.0 / n_t as f64; n_t], 0)
    } else if lambda == 0.0 {
        (cheapest_atom_weights(&hs, &ht, None), 0)
    } else {
        let uniform = vec![1.0 / n_t as f64; n_t];
        ChainProblem::new(&hs, &ht, None, 1.0 - lambda, lambda).solve(&uniform, cfg.weight_tol, cfg.max_sweeps)?
    };
    Ok(problem.finish(Scheme::TwoStep, base.theta_s, base.theta_t, w, iterations))
}

/// Block-coordinate ascent on the joint objective
/// `−(1/n_S) Σ_S l_i − Σ_T w_i l_i − (1−λ*) W2² + λ* H(w)`,
/// starting from the two-step solution. `σ²` stays at the unconstrained
/// value.
///
/// The coefficient block is updated by majorization: with the current
/// monotone coupling `π` held fixed, `Σ π_ij (h_S,i − h_T,j)²` bounds `W2²`
/// from above with equality at the current point, and the surrogate is a
/// quadratic in `(θ_S, θ_T)` solved exactly. The weight block is maximized
/// exactly (see `chain`). Neither step lowers the objective.
pub fn fit_in_model(data: &FairDataset, lambda: f64, cfg: &FairConfig) -> Result<FairFit> {
    let start = fit_two_step(data, lambda, cfg)?;
    let problem = Problem::new(data, start.sigma2, lambda);
    let mut theta_s = start.theta_s;
    let mut theta_t = start.theta_t;
    let mut w = start.weights;
    let mut value = problem.objective(&theta_s, &theta_t, &w);
    let mut rounds = 0;
    let mut converged = false;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let before = value;
        if let Some((ts, tt)) = problem.theta_step(&theta_s, &theta_t, &w) {
            let v = problem.objective(&ts, &tt, &w);
            if v >= value {
                theta_s = ts;
                theta_t = tt;
                value = v;
            }
        }
        let next = problem.weight_step(&theta_s, &theta_t, &w, cfg)?;
        let v = problem.objective(&theta_s, &theta_t, &next);
        if v >= value {
            w = next;
            value = v;
        }
        if (value - before).abs() <= cfg.tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(
            "fit_in_model",
            rounds,
            format!("block ascent still moving, objective {value}"),
        ));
    }
    Ok(problem.finish(Scheme::InModel, theta_s, theta_t, w, rounds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub two_step: FairFit,
    pub in_model: FairFit,
}

/// Both schemes over a grid of `λ*`, fitted in parallel; output in grid order.
pub fn fairness_sweep(data: &FairDataset, grid: &[f64], cfg: &FairConfig) -> Result<Vec<SweepPoint>> {
    grid.par_iter()
        .map(|&lambda| {
            Ok(SweepPoint {
                lambda,
                two_step: fit_two_step(data, lambda, cfg)?,
                in_model: fit_in_model(data, lambda, cfg)?,
            })
        })
        .collect()
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "lambda*",
            value: lambda,
            domain: "[0, 1]",
        })
    }
}

/// Maximizer of `−W2²(uniform on hs, Σ w_j δ_{ht_j}) − Σ w_j l_j` over the
/// simplex. Dropping the second marginal constraint from the coupling
/// problem leaves each `S` atom free to go to the `T` atom with the smallest
/// `(s − t_j)² + l_j`, and that choice defines the weights. Ties go to the
/// lower atom, then to the first of equal atoms.
fn cheapest_atom_weights(hs: &[f64], ht: &[f64], losses: Option<&[f64]>) -> Vec<f64> {
    let mut order: Vec<usize> = (0..ht.len()).collect();
    order.sort_by(|&i, &j| ht[i].total_cmp(&ht[j]).then(i.cmp(&j)));
    let loss = |i: usize| losses.map_or(0.0, |l| l[i]);
    let mut w = vec![0.0; ht.len()];
    let mass = 1.0 / hs.len() as f64;
    for &s in hs {
        let mut best = order[0];
        let mut cost = f64::INFINITY;
        for &i in &order {
            let c = (s - ht[i]).powi(2) + loss(i);
            if c < cost {
                best = i;
                cost = c;
            }
        }
        w[best] += mass;
    }
    w
}

/// Least squares with intercept; returns the coefficients and the RSS.
fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    let q = x[0].len() + 1;
    if n < q {
        return Err(Error::Fit(format!("{n} records for {q} coefficients")));
    }
    let design = DMatrix::from_fn(n, q, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let svd = design.clone().svd(true, true);
    let top = svd.singular_values.max();
    let low = svd.singular_values.min();
    if !(low > 1e-10 * top) {
        return Err(Error::Fit(format!(
            "design matrix is rank deficient (condition {:.3e})",
            top / low
        )));
    }
    let rhs = DVector::from_column_slice(y);
    let theta = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;
    let resid = rhs - design * &theta;
    Ok((theta.iter().copied().collect(), resid.norm_squared()))
}

struct Problem<'a> {
    data: &'a FairDataset,
    /// Variance used inside the losses; floored so that noiseless data keep
    /// the losses finite.
    sigma2_loss: f64,
    sigma2: f64,
    lambda: f64,
}

impl<'a> Problem<'a> {
    fn new(data: &'a FairDataset, sigma2: f64, lambda: f64) -> Self {
        let scale = data.responses(Group::S).iter().chain(data.responses(Group::T)).map(|v| v * v).sum::<f64>()
            / data.len() as f64;
        Self {
            data,
            sigma2_loss: sigma2.max(f64::EPSILON * (1.0 + scale)),
            sigma2,
            lambda,
        }
    }

    fn losses(&self, g: Group, theta: &[f64]) -> Vec<f64> {
        self.data
            .covariates(g)
            .iter()
            .zip(self.data.responses(g))
            .map(|(x, y)| (y - linear_predict(theta, x)).powi(2) / (2.0 * self.sigma2_loss))
            .collect()
    }

    fn samples(&self, theta_s: &[f64], theta_t: &[f64], w: &[f64]) -> (WeightedSample, WeightedSample) {
        let hs: Vec<f64> = self.data.covariates(Group::S).iter().map(|x| linear_predict(theta_s, x)).collect();
        let ht: Vec<f64> = self.data.covariates(Group::T).iter().map(|x| linear_predict(theta_t, x)).collect();
        (
            WeightedSample::uniform(hs).expect("finite fitted values"),
            WeightedSample::new(ht, w.to_vec()).expect("weights on the simplex"),
        )
    }

    fn objective(&self, theta_s: &[f64], theta_t: &[f64], w: &[f64]) -> f64 {
        let ls = self.losses(Group::S, theta_s);
        let lt = self.losses(Group::T, theta_t);
        let (s, t) = self.samples(theta_s, theta_t, w);
        -ls.iter().sum::<f64>() / ls.len() as f64 - w.iter().zip(&lt).map(|(a, b)| a * b).sum::<f64>()
            - (1.0 - self.lambda) * w2sq_discrete_discrete(&s, &t)
            + self.lambda * entropy(w)
    }

    fn weight_step(&self, theta_s: &[f64], theta_t: &[f64], w: &[f64], cfg: &FairConfig) -> Result<Vec<f64>> {
        let lt = self.losses(Group::T, theta_t);
        let hs: Vec<f64> = self.data.covariates(Group::S).iter().map(|x| linear_predict(theta_s, x)).collect();
        let ht: Vec<f64> = self.data.covariates(Group::T).iter().map(|x| linear_predict(theta_t, x)).collect();
        if self.lambda == 0.0 {
            return Ok(cheapest_atom_weights(&hs, &ht, Some(&lt)));
        }
        let chain = ChainProblem::new(&hs, &ht, Some(&lt), 1.0 - self.lambda, self.lambda);
        Ok(chain.solve(w, cfg.weight_tol, cfg.max_sweeps)?.0)
    }

    /// Exact maximizer of the coupling surrogate in `(θ_S, θ_T)`.
    fn theta_step(&self, theta_s: &[f64], theta_t: &[f64], w: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let q = theta_s.len();
        let xs = self.data.covariates(Group::S);
        let xt = self.data.covariates(Group::T);
        let ys = self.data.responses(Group::S);
        let yt = self.data.responses(Group::T);
        let n_s = xs.len() as f64;
        let c = 1.0 / self.sigma2_loss;
        let k = 2.0 * (1.0 - self.lambda);
        let aug = |x: &[f64]| -> DVector<f64> {
            DVector::from_iterator(q, std::iter::once(1.0).chain(x.iter().copied()))
        };
        let mut a = DMatrix::<f64>::zeros(2 * q, 2 * q);
        let mut b = DVector::<f64>::zeros(2 * q);
        for (x, y) in xs.iter().zip(ys) {
            let z = aug(x);
            let outer = &z * z.transpose() * (c / n_s);
            let mut blk = a.view_mut((0, 0), (q, q));
            blk += outer;
            let mut rb = b.rows_mut(0, q);
            rb += &z * (c * y / n_s);
        }
        for ((x, y), &wi) in xt.iter().zip(yt).zip(w) {
            let z = aug(x);
            let mut blk = a.view_mut((q, q), (q, q));
            blk += &z * z.transpose() * (c * wi);
            let mut rb = b.rows_mut(q, q);
            rb += &z * (c * wi * y);
        }
        if k > 0.0 {
            let (s, t) = self.samples(theta_s, theta_t, w);
            for (i, j, mass) in monotone_coupling(&s, &t) {
                let zi = aug(&xs[i]);
                let zj = aug(&xt[j]);
                let f = k * mass;
                let mut ss = a.view_mut((0, 0), (q, q));
                ss += &zi * zi.transpose() * f;
                let mut tt = a.view_mut((q, q), (q, q));
                tt += &zj * zj.transpose() * f;
                let cross = &zi * zj.transpose() * f;
                let mut st = a.view_mut((0, q), (q, q));
                st -= &cross;
                let mut ts = a.view_mut((q, 0), (q, q));
                ts -= cross.transpose();
            }
        }
        // solve for the step so that directions the surrogate does not see
        // stay where they are
        let current = DVector::from_iterator(2 * q, theta_s.iter().chain(theta_t).copied());
        let rhs = b - &a * &current;
        let svd = a.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max();
        let step = svd.solve(&rhs, eps).ok()?;
        let next = current + step;
        if next.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((next.rows(0, q).iter().copied().collect(), next.rows(q, q).iter().copied().collect()))
    }

    fn finish(&self, scheme: Scheme, theta_s: Vec<f64>, theta_t: Vec<f64>, weights: Vec<f64>, iterations: usize) -> FairFit {
        let (s, t) = self.samples(&theta_s, &theta_t, &weights);
        let w2sq = w2sq_discrete_discrete(&s, &t);
        let objective = self.objective(&theta_s, &theta_t, &weights);
        FairFit {
            scheme,
            entropy: entropy(&weights),
            theta_s,
            theta_t,
            sigma2: self.sigma2,
            weights,
            lambda: self.lambda,
            w2sq,
            objective,
            iterations,
        }
    }
}

/// North-west-corner coupling of two sorted samples as `(a index, b index, mass)`
/// in original indices; zero-mass cells are skipped.
fn monotone_coupling(a: &WeightedSample, b: &WeightedSample) -> Vec<(usize, usize, f64)> {
    let (ca, cb) = (a.cumulative(), b.cumulative());
    let (oa, ob) = (a.order(), b.order());
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut q = 0.0;
    while i < a.len() && j < b.len() {
        let next = ca[i + 1].min(cb[j + 1]);
        if next > q {
            out.push((oa[i], ob[j], next - q));
            q = next;
        }
        if ca[i + 1] <= next {
            i += 1;
        }
        if cb[j + 1] <= next {
            j += 1;
        }
    }
    out
}
