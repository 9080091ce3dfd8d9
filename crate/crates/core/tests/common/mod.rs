//! Brute-force references shared by the integration tests. Nothing here
//! calls into the crate's transport or distribution code.

#![allow(dead_code)]

use otreweight::ParametricFamily;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Density, plus an interval outside which the mass is negligible.
pub fn density(target: &ParametricFamily) -> (Box<dyn Fn(f64) -> f64>, f64, f64) {
    let std = Normal::new(0.0, 1.0).unwrap();
    match *target {
        ParametricFamily::Normal { mean, variance } => {
            let sd = variance.sqrt();
            (
                Box::new(move |x| std.pdf((x - mean) / sd) / sd),
                mean - 14.0 * sd,
                mean + 14.0 * sd,
            )
        }
        ParametricFamily::SkewNormal { location, scale, shape } => (
            Box::new(move |x| {
                let z = (x - location) / scale;
                2.0 / scale * std.pdf(z) * std.cdf(shape * z)
            }),
            location - 14.0 * scale,
            location + 14.0 * scale,
        ),
    }
}

/// `W2²` between `Σ w_i δ_{a_i}` and a density, by sweeping `cells`
/// midpoint cells in x. The density is held at its midpoint value inside a
/// cell; a cell that contains a quantile breakpoint of the sample is split
/// where the running mass crosses it, and `∫ (s − x)² dx` is taken exactly
/// on each piece.
pub fn midpoint_w2sq(atoms: &[f64], weights: &[f64], target: &ParametricFamily, cells: usize) -> f64 {
    let mut pairs: Vec<(f64, f64)> = atoms.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = pairs.len();
    let mut breaks = Vec::with_capacity(m);
    let mut c = 0.0;
    for &(_, w) in &pairs {
        c += w;
        breaks.push(c);
    }
    let (pdf, lo, hi) = density(target);
    let h = (hi - lo) / cells as f64;
    // ∫_a^b (s − x)² dx
    let sq = |s: f64, a: f64, b: f64| ((b - s).powi(3) - (a - s).powi(3)) / 3.0;
    let mut mass = 0.0;
    let mut k = 0;
    let mut total = 0.0;
    for j in 0..cells {
        let a = lo + j as f64 * h;
        let b = a + h;
        let dens = pdf(0.5 * (a + b));
        let mut pos = a;
        let mut left = dens * h;
        while k + 1 < m && mass + left > breaks[k] && dens > 0.0 {
            let part = breaks[k] - mass;
            let len = part / dens;
            total += dens * sq(pairs[k].0, pos, pos + len);
            mass = breaks[k];
            left -= part;
            pos += len;
            k += 1;
        }
        total += dens * sq(pairs[k].0, pos, b);
        mass += left;
    }
    total
}

/// Generalized inverse `Q(u) = min{x : F(x) ≥ u}` of a weighted sample.
pub fn discrete_quantile(atoms: &[f64], weights: &[f64], u: f64) -> f64 {
    let mut idx: Vec<usize> = (0..atoms.len()).collect();
    idx.sort_by(|&a, &b| atoms[a].total_cmp(&atoms[b]));
    let mut c = 0.0;
    for &i in &idx {
        c += weights[i];
        if c >= u {
            return atoms[i];
        }
    }
    atoms[*idx.last().unwrap()]
}

/// `∫_0^1 (Q_a − Q_b)²` summed piece by piece between the union of both
/// breakpoint sets; each quantile is read off at the piece midpoint.
pub fn piecewise_w2sq(a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> f64 {
    let mut cuts = vec![0.0, 1.0];
    for (atoms, weights) in [a, b] {
        let mut idx: Vec<usize> = (0..atoms.len()).collect();
        idx.sort_by(|&x, &y| atoms[x].total_cmp(&atoms[y]));
        let mut c = 0.0;
        for i in idx {
            c += weights[i];
            cuts.push(c.min(1.0));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|p| {
            let mid = 0.5 * (p[0] + p[1]);
            let d = discrete_quantile(a.0, a.1, mid) - discrete_quantile(b.0, b.1, mid);
            (p[1] - p[0]) * d * d
        })
        .sum()
}

/// Flat Dirichlet draw kept away from zero.
pub fn dirichlet(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1) + 0.05).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

pub fn normals(rng: &mut impl Rng, m: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..m).map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Normal or skew-normal with parameters in a moderate range.
pub fn random_target(rng: &mut impl Rng, skewed: bool) -> ParametricFamily {
    if skewed {
        ParametricFamily::skew_normal(
            rng.random_range(-2.0..2.0),
            rng.random_range(0.5..2.0),
            rng.random_range(-8.0..8.0),
        )
        .unwrap()
    } else {
        ParametricFamily::normal(rng.random_range(-2.0..2.0), rng.random_range(0.25..4.0)).unwrap()
    }
}

pub fn entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Every point of the 2-simplex on a grid of the given step, as
/// `[w0, w1, w2]` with `w2 = 1 − w0 − w1`.
pub fn simplex_grid(steps: usize) -> impl Iterator<Item = [f64; 3]> {
    (0..=steps).flat_map(move |i| {
        (0..=steps - i).map(move |j| {
            let a = i as f64 / steps as f64;
            let b = j as f64 / steps as f64;
            [a, b, (1.0 - a - b).max(0.0)]
        })
    })
}

/// `G(j/k) = ∫_0^{j/k} Q(u) du` for `j = 0..=k`, and `E[Y²]`, from a midpoint
/// sweep over the density. Inside a cell the mass is spread evenly, so the
/// partial first moment is interpolated where the running mass crosses `j/k`.
pub fn partial_means(target: &ParametricFamily, k: usize, cells: usize) -> (Vec<f64>, f64) {
    let (pdf, lo, hi) = density(target);
    let h = (hi - lo) / cells as f64;
    let mut g = vec![0.0; k + 1];
    let (mut mass, mut first, mut second) = (0.0, 0.0, 0.0);
    let mut next = 1;
    for c in 0..cells {
        let a = lo + c as f64 * h;
        let p = pdf(a + 0.5 * h) * h;
        // ∫ x over the cell with constant density, per unit mass
        let mid = a + 0.5 * h;
        while next < k && mass + p >= next as f64 / k as f64 && p > 0.0 {
            let part = next as f64 / k as f64 - mass;
            // the first `part` of the cell's mass sits on [a, a + h·part/p]
            let len = h * part / p;
            g[next] = first + part * (a + 0.5 * len);
            next += 1;
        }
        mass += p;
        first += p * mid;
        second += p * (mid * mid + h * h / 12.0);
    }
    // renormalize the tiny mass lost outside [lo, hi]
    g[k] = first / mass;
    (g, second / mass)
}
