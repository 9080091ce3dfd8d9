use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Portfolio, ReturnMatrix};
use crate::distributions::ParametricFamily;
use crate::error::{Error, Result};
use crate::reweight::{entropy, mirror_ascent, SolverConfig};
use crate::rng::{stream, tags};
use crate::transport::UniformSegments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PortfolioConfig {
    pub solver: SolverConfig,
    /// Starting points: uniform plus `starts − 1` flat-Dirichlet draws.
    pub starts: usize,
    pub seed: u64,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig {
                max_iter: 20_000,
                tol: 1e-13,
                ..SolverConfig::default()
            },
            starts: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicPortfolio {
    pub lambda_star: f64,
    pub portfolio: Portfolio,
    /// `W2²` between the uniform empirical law of the portfolio returns and
    /// the target.
    pub w2sq: f64,
    /// `(1 − λ*) W2² − λ* b_d H_d(w)`.
    pub objective: f64,
}

struct Problem<'a> {
    r: &'a ReturnMatrix,
    segments: UniformSegments,
    bd: f64,
}

impl<'a> Problem<'a> {
    fn new(r: &'a ReturnMatrix, target: &ParametricFamily) -> Result<Self> {
        target.validate()?;
        let d = r.assets();
        if d < 2 {
            return Err(Error::InvalidArgument("the entropy term needs at least two assets".into()));
        }
        Ok(Self {
            r,
            segments: UniformSegments::new(r.periods(), target),
            bd: 1.0 / (d as f64).ln(),
        })
    }

    fn w2sq(&self, w: &[f64]) -> f64 {
        self.segments.w2sq_with_atom_grad(&self.r.portfolio_returns(w)).0
    }

    /// `(−objective, −gradient)` for the ascent routine.
    fn negated(&self, lambda: f64, w: &[f64]) -> (f64, Vec<f64>) {
        let (d2, ga) = self.segments.w2sq_with_atom_grad(&self.r.portfolio_returns(w));
        let value = (1.0 - lambda) * d2 - lambda * self.bd * entropy(w);
        let mut grad = vec![0.0; w.len()];
        for (row, g) in self.r.rows().iter().zip(&ga) {
            for j in 0..w.len() {
                grad[j] += g * row[j];
            }
        }
        for j in 0..w.len() {
            grad[j] = -(1.0 - lambda) * grad[j] - lambda * self.bd * (1.0 + w[j].ln());
        }
        (-value, grad)
    }

    fn solve(&self, lambda: f64, start: Vec<f64>, cfg: &SolverConfig) -> Result<Vec<f64>> {
        if lambda == 1.0 {
            let d = start.len();
            return Ok(vec![1.0 / d as f64; d]);
        }
        Ok(mirror_ascent("entropy_w2_portfolio", start, cfg, |w| self.negated(lambda, w))?.w)
    }

    fn finish(&self, lambda: f64, weights: Vec<f64>) -> EntropicPortfolio {
        let w2sq = self.w2sq(&weights);
        let portfolio = Portfolio::new(self.r, weights);
        EntropicPortfolio {
            lambda_star: lambda,
            objective: (1.0 - lambda) * w2sq - lambda * portfolio.bd_entropy,
            w2sq,
            portfolio,
        }
    }
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

fn starting_points(d: usize, cfg: &PortfolioConfig) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0 / d as f64; d]];
    for k in 1..cfg.starts.max(1) {
        let mut rng = stream(cfg.seed, tags::MULTISTART, k as u64);
        // flat Dirichlet via normalized exponentials, kept off the boundary
        let e: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1).max(1e-12)).collect();
        let total: f64 = e.iter().sum();
        out.push(e.iter().map(|v| v / total).collect());
    }
    out
}

/// Minimizer of `(1 − λ*) W2²(uniform on wᵀR_(i), target) − λ* H_d(w)/log d`
/// over the simplex. The atoms move with `w`, so the problem is not convex;
/// exponentiated gradient is run from every starting point in parallel and
/// the best objective is kept (earliest start on ties).
pub fn entropy_w2_portfolio(
    r: &ReturnMatrix,
    target: &ParametricFamily,
    lambda_star: f64,
    cfg: &PortfolioConfig,
) -> Result<EntropicPortfolio> {
    check_lambda(lambda_star)?;
    cfg.solver.validate()?;
    let problem = Problem::new(r, target)?;
    let solutions: Vec<Vec<f64>> = starting_points(r.assets(), cfg)
        .into_par_iter()
        .map(|s| problem.solve(lambda_star, s, &cfg.solver))
        .collect::<Result<_>>()?;
    let best = solutions
        .into_iter()
        .map(|w| problem.finish(lambda_star, w))
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("at least one start");
    Ok(best)
}

/// `entropy_w2_portfolio` over a grid of `λ*`.
///
/// Every solution found anywhere in the sweep (multistarts at each grid
/// point, then a warm-started pass in grid order) joins a common pool, and
/// each grid point reports the pool member with the lowest objective at its
/// own `λ*`. Over a fixed pool that choice makes both the entropy and the
/// `W2²` nondecreasing in `λ*`.
pub fn sweep_lambda(
    r: &ReturnMatrix,
    target: &ParametricFamily,
    grid: &[f64],
    cfg: &PortfolioConfig,
) -> Result<Vec<EntropicPortfolio>> {
    for &l in grid {
        check_lambda(l)?;
    }
    cfg.solver.validate()?;
    let problem = Problem::new(r, target)?;
    let starts = starting_points(r.assets(), cfg);
    let mut pool: Vec<Vec<f64>> = grid
        .par_iter()
        .flat_map_iter(|&l| starts.iter().map(move |s| (l, s.clone())))
        .map(|(l, s)| problem.solve(l, s, &cfg.solver))
        .collect::<Result<_>>()?;
    pool.push(starts[0].clone());
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(f64::total_cmp);
    let mut warm = starts[0].clone();
    for &l in &order {
        let init = best_in_pool(&problem, &pool, l).0;
        warm = problem.solve(l, pick_better(&problem, l, init, warm), &cfg.solver)?;
        pool.push(warm.clone());
    }
    Ok(grid
        .iter()
        .map(|&l| {
            let (w, _) = best_in_pool(&problem, &pool, l);
            problem.finish(l, w)
        })
        .collect())
}

fn pick_better(problem: &Problem, lambda: f64, a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    let fa = problem.negated(lambda, &a).0;
    let fb = problem.negated(lambda, &b).0;
    if fb > fa {
        b
    } else {
        a
    }
}

fn best_in_pool(problem: &Problem, pool: &[Vec<f64>], lambda: f64) -> (Vec<f64>, f64) {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, w) in pool.iter().enumerate() {
        let h = problem.bd * entropy(w);
        let f = (1.0 - lambda) * problem.w2sq(w) - lambda * h;
        let better = match best {
            None => true,
            Some((_, bf, bh)) => f < bf || (f == bf && h < bh),
        };
        if better {
            best = Some((i, f, h));
        }
    }
    let (i, f, _) = best.expect("pool is nonempty");
    (pool[i].clone(), f)
}
