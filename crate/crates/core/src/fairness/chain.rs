//! Weight update for the fairness objective
//! `−a·W2²(uniform on s, Σ w_j δ_{t_j}) − Σ w_j l_j + λ H(w)`.
//!
//! Sort the `t_j` and let `C_j` be the cumulative weights. Then `W2²` is a
//! sum of one convex piecewise-linear function per `C_j` (kinks at the
//! multiples of `1/n_s`), and the entropy only links neighbours. Maximizing
//! over a single `C_j` between its neighbours has a closed form on each
//! linear piece, so the solver sweeps the cuts back and forth and
//! maximizes exactly each time. The smooth part is strictly concave and the
//! nonsmooth part separable, so the sweeps converge to the maximizer.
//!
//! Mass crosses an almost empty atom only a little per sweep, which can take
//! forever. After each sweep, runs of atoms below a few thresholds (relative
//! to the largest weight) are bridged by moving mass directly between the
//! atoms on either side, again exactly.
//!
//! With a large entropy weight the sweeps only diffuse mass along the chain.
//! Each sweep is therefore followed by a Newton step on the cuts that are not
//! pinned to a kink, kept only if the objective goes up.

use crate::error::{Error, Result};

pub(super) struct ChainProblem<'a> {
    /// sorted `S` atoms
    s: Vec<f64>,
    /// `T` atoms in sorted order, and their original positions
    t: Vec<f64>,
    order: Vec<usize>,
    losses: Option<&'a [f64]>,
    coef: f64,
    lambda: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> ChainProblem<'a> {
    /// `coef` is the factor on `W2²`; `lambda > 0` the one on the entropy.
    pub(super) fn new(hs: &[f64], ht: &[f64], losses: Option<&'a [f64]>, coef: f64, lambda: f64) -> Self {
        let mut s = hs.to_vec();
        s.sort_by(f64::total_cmp);
        let mut order: Vec<usize> = (0..ht.len()).collect();
        order.sort_by(|&i, &j| ht[i].total_cmp(&ht[j]).then(i.cmp(&j)));
        Self {
            s,
            t: order.iter().map(|&i| ht[i]).collect(),
            order,
            losses,
            coef,
            lambda,
        }
    }

    fn loss(&self, k: usize) -> f64 {
        self.losses.map_or(0.0, |l| l[self.order[k]])
    }

    /// Derivative of the non-entropy part in the cut between sorted atoms
    /// `j − 1` and `j`, on the piece where the `S` quantile equals `q`.
    fn slope(&self, j: usize, q: f64) -> f64 {
        let (tl, tr) = (self.t[j - 1], self.t[j]);
        -self.coef * (tr - tl) * (2.0 * q - tl - tr) - (self.loss(j - 1) - self.loss(j))
    }

    /// Best split of the mass `wl + wr` between sorted atoms `j − 1` and
    /// `j`, given the mass `below` to their left.
    fn split(&self, j: usize, below: f64, wl: f64, wr: f64) -> (f64, f64) {
        let p = wl + wr;
        if p <= 0.0 {
            return (wl, wr);
        }
        let n = self.s.len();
        let (lo, hi) = (below, below + p);
        // kinks k/n strictly inside (lo, hi)
        let k_first = ((lo * n as f64).floor() as usize + 1).min(n);
        let mut k_last = ((hi * n as f64).ceil() as usize).saturating_sub(1).min(n - 1);
        while k_last >= k_first && k_last as f64 / n as f64 >= hi {
            k_last -= 1;
        }
        let mut k_first = k_first;
        while k_first <= k_last && k_first as f64 / n as f64 <= lo {
            k_first += 1;
        }
        let lam = self.lambda;
        // F(c) = slope + λ log((hi − c)/(c − lo)) is decreasing
        let f_at = |kink: usize, q: f64| {
            let c = kink as f64 / n as f64;
            self.slope(j, q) + lam * ((hi - c) / (c - lo)).ln()
        };
        let piece = |q: f64| {
            let d = self.slope(j, q) / lam;
            (p * sigmoid(d), p * sigmoid(-d))
        };
        if k_first > k_last {
            let mid = 0.5 * (lo + hi);
            let k = ((mid * n as f64).ceil() as usize).clamp(1, n) - 1;
            return piece(self.s[k]);
        }
        // first kink whose right limit is ≤ 0
        let (mut a, mut b) = (k_first, k_last + 1);
        while a < b {
            let m = (a + b) / 2;
            if f_at(m, self.s[m]) <= 0.0 {
                b = m;
            } else {
                a = m + 1;
            }
        }
        if a > k_last {
            return piece(self.s[k_last]);
        }
        if f_at(a, self.s[a - 1]) < 0.0 {
            return piece(self.s[a - 1]);
        }
        // the maximizer sits on the kink
        let wl_new = a as f64 / n as f64 - lo;
        (wl_new.clamp(0.0, p), (p - wl_new).clamp(0.0, p))
    }

    /// `Q_S(c)` on the piece just left of `c`.
    fn quantile(&self, c: f64) -> f64 {
        let n = self.s.len();
        self.s[((c * n as f64).ceil() as usize).clamp(1, n) - 1]
    }

    /// Best transfer `δ` from sorted atom `a` to sorted atom `b > a`, which
    /// lowers every cut in between by `δ`. `cuts[j]` is the mass left of
    /// atom `j`. The derivative in `δ` is decreasing, so bisect on its sign.
    fn transfer(&self, a: usize, b: usize, w: &[f64], cuts: &[f64]) -> f64 {
        let lam = self.lambda;
        let deriv = |d: f64| {
            let pull: f64 = (a + 1..=b).map(|j| self.slope(j, self.quantile(cuts[j] - d))).sum();
            -pull + lam * ((w[a] - d) / (w[b] + d)).ln()
        };
        let (mut lo, mut hi) = (-w[b], w[a]);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if deriv(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// Objective at weights in sorted order.
    fn value(&self, w: &[f64]) -> f64 {
        let n = self.s.len();
        let step = 1.0 / n as f64;
        // W2² by merging the two quantile functions
        let (mut i, mut k) = (0, 0);
        let (mut q, mut next_t) = (0.0, w[0]);
        let mut w2 = 0.0;
        while i < n && k < w.len() {
            let next_s = (i + 1) as f64 * step;
            let next = next_s.min(next_t);
            let d = self.s[i] - self.t[k];
            w2 += (next - q).max(0.0) * d * d;
            q = next;
            if next_s <= next {
                i += 1;
            }
            if next_t <= next {
                k += 1;
                next_t += w.get(k).copied().unwrap_or(0.0);
            }
        }
        let lin: f64 = (0..w.len()).map(|k| w[k] * self.loss(k)).sum();
        let ent: f64 = -w.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();
        -self.coef * w2 - lin + self.lambda * ent
    }

    /// Newton step on the cuts away from kinks and empty atoms; `None` if it
    /// does not help.
    fn newton(&self, w: &[f64]) -> Option<Vec<f64>> {
        let m = w.len();
        let n = self.s.len() as f64;
        let mut cut = vec![0.0; m];
        for j in 1..m {
            cut[j] = cut[j - 1] + w[j - 1];
        }
        // tridiagonal system (−H) Δ = G over cuts 1..m−1; pinned cuts keep Δ = 0
        let free: Vec<bool> = (0..m)
            .map(|j| {
                let x = cut[j] * n;
                j > 0 && w[j - 1] > 0.0 && w[j] > 0.0 && !((x - x.round()).abs() <= 1e-9 && x.round() >= 1.0)
            })
            .collect();
        let mut diag = vec![1.0; m];
        let mut off = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for j in (1..m).filter(|&j| free[j]) {
            rhs[j] = self.slope(j, self.quantile(cut[j])) + self.lambda * (w[j] / w[j - 1]).ln();
            diag[j] = self.lambda * (1.0 / w[j - 1] + 1.0 / w[j]);
            if j + 1 < m && free[j + 1] {
                off[j] = -self.lambda / w[j];
            }
        }
        // Thomas algorithm
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for j in 1..m {
            let den = diag[j] - if j > 1 { off[j - 1] * c[j - 1] } else { 0.0 };
            c[j] = off[j] / den;
            d[j] = (rhs[j] - if j > 1 { off[j - 1] * d[j - 1] } else { 0.0 }) / den;
        }
        let mut delta = vec![0.0; m + 1];
        for j in (1..m).rev() {
            delta[j] = d[j] - c[j] * delta[j + 1];
        }
        let dw: Vec<f64> = (0..m).map(|k| delta[k + 1] - delta[k]).collect();
        let mut alpha: f64 = 1.0;
        for k in 0..m {
            if dw[k] < 0.0 {
                alpha = alpha.min(0.9 * w[k] / -dw[k]);
            }
        }
        let base = self.value(w);
        for _ in 0..30 {
            let next: Vec<f64> = (0..m).map(|k| w[k] + alpha * dw[k]).collect();
            if next.iter().zip(w).all(|(&x, &y)| x > 0.0 || (x == 0.0 && y == 0.0)) && self.value(&next) > base {
                return Some(next);
            }
            alpha *= 0.5;
        }
        None
    }

    /// Runs sweeps from `w0` (original order) until no weight moves by more
    /// than `tol`. Returns the weights in original order and the number of
    /// sweeps.
    pub(super) fn solve(&self, w0: &[f64], tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, usize)> {
        let m = self.t.len();
        let mut w: Vec<f64> = self.order.iter().map(|&i| w0[i]).collect();
        let back = |w: &[f64]| {
            let mut out = vec![0.0; m];
            for (k, &i) in self.order.iter().enumerate() {
                out[i] = w[k];
            }
            out
        };
        if m == 1 {
            return Ok((vec![1.0], 0));
        }
        for sweep in 1..=max_sweeps {
            let mut moved: f64 = 0.0;
            let forward = sweep % 2 == 1;
            let mut below: f64 = if forward { 0.0 } else { w[..m - 2].iter().sum() };
            for step in 0..m - 1 {
                let j = if forward { step + 1 } else { m - 1 - step };
                let (wl, wr) = self.split(j, below, w[j - 1], w[j]);
                moved = moved.max((wl - w[j - 1]).abs()).max((wr - w[j]).abs());
                w[j - 1] = wl;
                w[j] = wr;
                if forward {
                    below += wl;
                } else if j >= 2 {
                    below -= w[j - 2];
                    below = below.max(0.0);
                }
            }
            let mut cuts = vec![0.0; m];
            for k in 1..m {
                cuts[k] = cuts[k - 1] + w[k - 1];
            }
            let top = w.iter().fold(0.0_f64, |a, &b| a.max(b));
            for level in [1e-2, 1e-5, 1e-8, 1e-11] {
                let big = level * top;
                let mut a = 0;
                while a < m {
                    let Some(b) = (a + 1..m).find(|&k| w[k] > big) else { break };
                    if b > a + 1 && w[a] > big {
                        let d = self.transfer(a, b, &w, &cuts);
                        w[a] -= d;
                        w[b] += d;
                        for c in &mut cuts[a + 1..=b] {
                            *c -= d;
                        }
                        moved = moved.max(d.abs());
                    }
                    a = b;
                }
            }
            if let Some(next) = self.newton(&w) {
                for (a, b) in w.iter_mut().zip(next) {
                    moved = moved.max((b - *a).abs());
                    *a = b;
                }
            }
            if !moved.is_finite() {
                return Err(Error::numerical("fairness weights", sweep, "weights left the simplex"));
            }
            if moved <= tol {
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= total);
                return Ok((back(&w), sweep));
            }
        }
        Err(Error::numerical(
            "fairness weights",
            max_sweeps,
            format!("coordinate sweeps did not settle to {tol:e}"),
        ))
    }
}
