//! Squared 2-Wasserstein distances on the real line.
//!
//! In one dimension `W2²(P, Q) = ∫_0^1 (F_P⁻¹(q) − F_Q⁻¹(q))² dq`. For a
//! weighted sample the quantile function is a step function, so against a
//! Normal or skew-normal target each step contributes
//! `Δc·s² − 2s·ΔM + ∫ Q²`, where `M` is the target's partial mean. Both
//! pieces have closed forms, which is what [`w2sq_discrete_continuous`]
//! uses. [`w2sq_quadrature`] integrates the same quantity numerically for
//! arbitrary quantile functions.

use serde::{Deserialize, Serialize};

use crate::distributions::ParametricFamily;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Atoms with simplex weights, plus the sorted view used by every W2 routine.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    order: Vec<usize>,
    // cumulative weights in sorted order, length m + 1, first 0, last 1
    cumulative: Vec<f64>,
    // mass strictly above each breakpoint: tail[k] = 1 − cumulative[k]
    tail: Vec<f64>,
}

impl WeightedSample {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("a weighted sample needs at least one atom".into()));
        }
        if let Some(i) = atoms.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("atom {i} is not finite")));
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| atoms[i].total_cmp(&atoms[j]).then(i.cmp(&j)));
        Self::with_order(atoms, weights, order)
    }

    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let m = atoms.len().max(1);
        Self::new(atoms, vec![1.0 / m as f64; m])
    }

    /// Same atoms, new weights; reuses the sort.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::with_order(self.atoms.clone(), weights, self.order.clone())
    }

    fn with_order(atoms: Vec<f64>, mut weights: Vec<f64>, order: Vec<usize>) -> Result<Self> {
        if weights.len() != atoms.len() {
            return Err(Error::InvalidArgument(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "weight {i} = {} is not a nonnegative finite number",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        for w in &mut weights {
            *w /= total;
        }
        let m = atoms.len();
        let mut cumulative = vec![0.0; m + 1];
        for (k, &i) in order.iter().enumerate() {
            cumulative[k + 1] = cumulative[k] + weights[i];
        }
        cumulative[m] = 1.0;
        let mut tail = vec![0.0; m + 1];
        for k in (0..m).rev() {
            tail[k] = tail[k + 1] + weights[order[k]];
        }
        tail[0] = 1.0;
        for k in 1..m {
            // sums from the nearer end are the accurate ones
            if cumulative[k] <= tail[k] {
                tail[k] = 1.0 - cumulative[k];
            } else {
                cumulative[k] = 1.0 - tail[k];
            }
        }
        Ok(Self {
            atoms,
            weights,
            order,
            cumulative,
            tail,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices that sort the atoms (stable on ties).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `c_0 = 0, c_1, …, c_m = 1` in sorted order.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    fn sorted_atom(&self, k: usize) -> f64 {
        self.atoms[self.order[k]]
    }
}

/// Settings for the numerical route [`w2sq_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Interior node budget on `[δ, 1 − δ]`.
    pub nodes: usize,
    /// Width `δ` of each tail region, integrated after a log substitution.
    pub tail_clip: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes: 2048,
            tail_clip: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 100 {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs at least 100 nodes, got {}",
                self.nodes
            )));
        }
        if !(self.tail_clip > 0.0 && self.tail_clip <= 0.01) {
            return Err(Error::Domain {
                what: "tail clip",
                value: self.tail_clip,
                domain: "(0, 0.01]",
            });
        }
        Ok(())
    }
}

/// Exact `W2²` between a weighted sample and a Normal or skew-normal target.
pub fn w2sq_discrete_continuous(sample: &WeightedSample, target: &ParametricFamily) -> f64 {
    evaluate(sample, target, false).0
}

/// `∂W2²/∂w_j` in the original atom order.
///
/// Moving mass onto atom `j` shifts every breakpoint at or above it, so the
/// derivative is the sum of the breakpoint derivatives
/// `(s_(k) − Q(c_k))² − (s_(k+1) − Q(c_k))²` for `k ≥ rank(j)`. Only the
/// projection onto the simplex tangent space is meaningful.
pub fn grad_w2sq_weights(sample: &WeightedSample, target: &ParametricFamily) -> Result<Vec<f64>> {
    if let Some(index) = sample.weights.iter().position(|&w| w <= 0.0) {
        return Err(Error::BoundaryGradient { index });
    }
    Ok(evaluate(sample, target, true).1)
}

/// Value and weight gradient together; shares the quantile evaluations.
/// Zero weights are tolerated here (one-sided derivatives at the boundary).
pub(crate) fn w2sq_with_grad(sample: &WeightedSample, target: &ParametricFamily) -> (f64, Vec<f64>) {
    evaluate(sample, target, true)
}

fn evaluate(sample: &WeightedSample, target: &ParametricFamily, want_grad: bool) -> (f64, Vec<f64>) {
    let m = sample.len();
    let moments = target.moments();
    let mean = moments.mean;

    // Centered: W2² = Var + Σ_k [Δc_k ŝ_k² − 2 ŝ_k ΔM_k] with ŝ = s − mean
    // and M the centered partial mean, which vanishes at both ends.
    let mut total = moments.variance;
    let mut boundary = if want_grad { vec![0.0; m] } else { Vec::new() };
    let mut prev_m = 0.0;
    for k in 0..m {
        let s = sample.sorted_atom(k) - mean;
        let w = sample.weights[sample.order[k]];
        let (next_m, q) = if k + 1 < m {
            let lower = sample.cumulative[k + 1];
            let upper = sample.tail[k + 1];
            if lower <= 0.0 || upper <= 0.0 {
                let q = if lower <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                };
                (0.0, q)
            } else {
                let q = target.quantile_split(lower, upper);
                (target.centered_partial_mean_split(q, lower, upper), q)
            }
        } else {
            (0.0, f64::NAN)
        };
        if w > 0.0 {
            total += w * s * s - 2.0 * s * (next_m - prev_m);
        }
        if want_grad && k + 1 < m {
            let a = sample.sorted_atom(k);
            let b = sample.sorted_atom(k + 1);
            boundary[k] = if a == b { 0.0 } else { (a - b) * (a + b - 2.0 * q) };
        }
        prev_m = next_m;
    }

    let mut grad = Vec::new();
    if want_grad {
        grad = vec![0.0; m];
        let mut acc = 0.0;
        for k in (0..m).rev() {
            if k + 1 < m {
                acc += boundary[k];
            }
            grad[sample.order[k]] = acc;
        }
    }
    (total.max(0.0), grad)
}

/// `W2²` from `n` equally weighted atoms to a fixed target, with the target
/// integrals over each quantile segment `((k−1)/n, k/n]` computed once.
#[derive(Debug, Clone)]
pub(crate) struct UniformSegments {
    mean: f64,
    variance: f64,
    // ∫ (Q − mean) over segment k
    segment: Vec<f64>,
}

impl UniformSegments {
    pub(crate) fn new(n: usize, target: &ParametricFamily) -> Self {
        let moments = target.moments();
        let mut segment = Vec::with_capacity(n);
        let mut prev = 0.0;
        for k in 1..=n {
            let next = if k < n {
                let lower = k as f64 / n as f64;
                let upper = (n - k) as f64 / n as f64;
                let q = target.quantile_split(lower, upper);
                target.centered_partial_mean_split(q, lower, upper)
            } else {
                0.0
            };
            segment.push(next - prev);
            prev = next;
        }
        Self {
            mean: moments.mean,
            variance: moments.variance,
            segment,
        }
    }

    /// Value and gradient with respect to each atom (original order).
    pub(crate) fn w2sq_with_atom_grad(&self, atoms: &[f64]) -> (f64, Vec<f64>) {
        let n = atoms.len();
        debug_assert_eq!(n, self.segment.len());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| atoms[i].total_cmp(&atoms[j]).then(i.cmp(&j)));
        let inv = 1.0 / n as f64;
        let mut total = self.variance;
        let mut grad = vec![0.0; n];
        for (k, &i) in order.iter().enumerate() {
            let s = atoms[i] - self.mean;
            total += inv * s * s - 2.0 * s * self.segment[k];
            grad[i] = 2.0 * (inv * s - self.segment[k]);
        }
        (total.max(0.0), grad)
    }
}

/// Exact `W2²` between two weighted samples by merging their breakpoints.
pub fn w2sq_discrete_discrete(a: &WeightedSample, b: &WeightedSample) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut q = 0.0;
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = a.cumulative[i + 1];
        let next_b = b.cumulative[j + 1];
        let next = next_a.min(next_b);
        let d = a.sorted_atom(i) - b.sorted_atom(j);
        total += (next - q).max(0.0) * d * d;
        q = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    total
}

/// Numerical `W2²` against any quantile function, called as
/// `quantile(q, 1 − q)` so that levels near 1 keep their precision.
///
/// The interior `[δ, 1 − δ]` is split at the sample breakpoints and on a
/// grid of `nodes / 8` panels, refined geometrically toward both ends where
/// unbounded quantiles bend sharply; every piece gets an 8-point
/// Gauss-Legendre rule. Each tail `[0, δ]` is mapped through
/// `q = δ·e^{−t}` (mirrored on the right) and integrated in `t` on `[0, 40]`
/// with 32-point panels.
pub fn w2sq_quadrature(
    sample: &WeightedSample,
    quantile: impl Fn(f64, f64) -> f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    let delta = quad.tail_clip;
    let lo = delta;
    let hi = 1.0 - delta;

    let panels = (quad.nodes / 8).max(1);
    let h = (hi - lo) / panels as f64;
    let mut edges: Vec<f64> = (0..=panels).map(|i| lo + i as f64 * h).collect();
    let mut g = 2.0 * delta;
    while g < lo + h {
        edges.push(g);
        edges.push(1.0 - g);
        g *= 2.0;
    }
    edges.extend(sample.cumulative.iter().copied().filter(|&c| c > lo && c < hi));
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    // sorted atom active on [q, q']: largest k with c_k ≤ midpoint
    let atom_at = |q: f64| -> f64 {
        let k = sample.cumulative.partition_point(|&c| c <= q);
        let k = k.clamp(1, sample.len());
        sample.sorted_atom(k - 1)
    };

    let rule8 = GaussLegendre::cached(8);
    let mut total = 0.0;
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let s = atom_at(0.5 * (a + b));
        total += rule8.integrate(a, b, |q| {
            let d = s - quantile(q, 1.0 - q);
            d * d
        });
    }

    // tails: q = δ e^{−t}; pieces split where a breakpoint falls inside
    let rule32 = GaussLegendre::cached(32);
    let t_max = 40.0;
    for left in [true, false] {
        let mut cuts: Vec<f64> = vec![0.0, t_max];
        let mut t = 1.0;
        while t < t_max {
            cuts.push(t);
            t += 4.0;
        }
        for &c in &sample.cumulative {
            let dist = if left { c } else { 1.0 - c };
            if dist > 0.0 && dist < delta {
                let t = (delta / dist).ln();
                if t < t_max {
                    cuts.push(t);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for pair in cuts.windows(2) {
            let (ta, tb) = (pair[0], pair[1]);
            let tm = 0.5 * (ta + tb);
            let qm = delta * (-tm).exp();
            let s = atom_at(if left { qm } else { 1.0 - qm });
            total += rule32.integrate(ta, tb, |t| {
                let dq = delta * (-t).exp();
                let d = if left {
                    s - quantile(dq, 1.0 - dq)
                } else {
                    s - quantile(1.0 - dq, dq)
                };
                d * d * dq
            });
        }
    }
    if !total.is_finite() {
        return Err(Error::numerical("w2sq_quadrature", 0, "non-finite integral"));
    }
    Ok(total)
}
