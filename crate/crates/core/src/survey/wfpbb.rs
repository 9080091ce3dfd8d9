use rand::Rng;

use super::SurveySample;
use crate::error::{Error, Result};
use crate::rng::{stream, tags};

/// Weighted finite-population Bayesian bootstrap.
///
/// For each of `replicates` draws, a pseudo-population of size `N` is grown
/// from the `n` observed units by a weighted Pólya urn: with weights rescaled
/// to `w_i = π_i N / n`, the next unit is `i` with probability proportional
/// to `w_i − 1 + l_i (N − n)/n`, where `l_i` counts earlier picks of `i`.
/// Then `n` units are drawn with replacement from the pseudo-population.
/// Returns indices into `sample`.
pub fn wfpbb_resample(
    sample: &SurveySample,
    population_size: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let n = sample.len();
    if population_size < n {
        return Err(Error::InvalidArgument(format!(
            "pseudo-population size {population_size} is smaller than the sample size {n}"
        )));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one bootstrap replicate".into()));
    }
    let big_n = population_size as f64;
    let step = (big_n - n as f64) / n as f64;
    // π_i N/n − 1 can be negative for tiny weights; such units are never drawn
    let base: Vec<f64> = sample
        .weights()
        .iter()
        .map(|&p| (p * big_n / n as f64 - 1.0).max(0.0))
        .collect();
    (0..replicates)
        .map(|m| {
            let mut rng = stream(seed, tags::BOOTSTRAP, m as u64);
            let mut urn = Fenwick::new(&base);
            let mut counts = vec![1u64; n];
            for _ in 0..population_size - n {
                let total = urn.total();
                let i = urn.find(rng.random::<f64>() * total);
                counts[i] += 1;
                urn.add(i, step);
            }
            let mut cum = Vec::with_capacity(n);
            let mut acc = 0u64;
            for &c in &counts {
                acc += c;
                cum.push(acc);
            }
            Ok((0..n)
                .map(|_| {
                    let u = rng.random_range(0..acc);
                    cum.partition_point(|&c| c <= u)
                })
                .collect())
        })
        .collect()
}

/// Prefix sums over nonnegative floats with weighted lookup.
struct Fenwick {
    tree: Vec<f64>,
    top: usize,
}

impl Fenwick {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &v) in values.iter().enumerate() {
            tree[i + 1] += v;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i + 1];
            }
        }
        let mut top = 1;
        while top * 2 <= n {
            top *= 2;
        }
        Self { tree, top }
    }

    fn add(&mut self, i: usize, delta: f64) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut k = self.tree.len() - 1;
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k -= k & k.wrapping_neg();
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step /= 2;
        }
        pos.min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenwick_lookup() {
        let f = Fenwick::new(&[1.0, 0.0, 2.0, 3.0, 0.5]);
        assert!((f.total() - 6.5).abs() < 1e-15);
        assert_eq!(f.find(0.5), 0);
        assert_eq!(f.find(1.0), 2);
        assert_eq!(f.find(2.99), 2);
        assert_eq!(f.find(3.0), 3);
        assert_eq!(f.find(6.2), 4);
    }

    #[test]
    fn shapes_and_support() {
        let s = SurveySample::univariate(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 1.0, 0.5, 0.5]).unwrap();
        let reps = wfpbb_resample(&s, 50, 3, 9).unwrap();
        assert_eq!(reps.len(), 3);
        assert!(reps.iter().all(|r| r.len() == 5 && r.iter().all(|&i| i < 5)));
        assert_eq!(reps, wfpbb_resample(&s, 50, 3, 9).unwrap());
        assert!(wfpbb_resample(&s, 4, 3, 9).is_err());
    }

    #[test]
    fn equal_weights_give_uniform_frequencies() {
        let n = 10;
        let s = SurveySample::univariate((0..n).map(|i| i as f64).collect(), vec![1.0; n]).unwrap();
        let reps = 2000;
        let draws = wfpbb_resample(&s, 200, reps, 5).unwrap();
        // per-replicate share of each atom; replicates are independent
        for atom in 0..n {
            let shares: Vec<f64> = draws
                .iter()
                .map(|r| r.iter().filter(|&&i| i == atom).count() as f64 / n as f64)
                .collect();
            let mean = shares.iter().sum::<f64>() / reps as f64;
            let var = shares.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            assert!((mean - 0.1).abs() < 3.0 * se, "atom {atom}: {mean} (se {se})");
        }
    }

    #[test]
    fn heavy_units_dominate_pseudo_population() {
        let s = SurveySample::univariate(vec![0.0, 1.0], vec![1.8, 0.2]).unwrap();
        let draws = wfpbb_resample(&s, 1000, 200, 1).unwrap();
        let ones: usize = draws.iter().flatten().filter(|&&i| i == 1).count();
        let share = ones as f64 / 400.0;
        assert!((share - 0.1).abs() < 0.05, "{share}");
    }
}
