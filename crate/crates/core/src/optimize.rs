//! Derivative-free minimization.

#[derive(Debug, Clone)]
pub(crate) struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Nelder–Mead minimization with the standard coefficients.
///
/// The initial simplex perturbs each coordinate of `x0` by 5% (0.00025 for
/// zero entries). Stops when every vertex is within `xtol` of the best one
/// in each coordinate and their values within `ftol`. Vertices are kept in
/// stable order, so on exact ties the starting point stays best.
pub(crate) fn nelder_mead(
    x0: &[f64],
    xtol: f64,
    ftol: f64,
    max_evals: usize,
    mut f: impl FnMut(&[f64]) -> f64,
) -> NelderMeadResult {
    let p = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(p + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for j in 0..p {
        let mut x = x0.to_vec();
        x[j] = if x[j] != 0.0 { 1.05 * x[j] } else { 0.00025 };
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        let xspread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let fspread = simplex[1..].iter().map(|(_, v)| (v - best.1).abs()).fold(0.0, f64::max);
        if xspread <= xtol && (fspread <= ftol || (best.1.is_infinite() && fspread.is_nan())) {
            break;
        }

        let worst = simplex[p].clone();
        let mut centroid = vec![0.0; p];
        for (x, _) in &simplex[..p] {
            for j in 0..p {
                centroid[j] += x[j] / p as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> { (0..p).map(|j| centroid[j] + t * (worst.0[j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[p] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[p - 1].1 {
            simplex[p] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[p] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let x_best = simplex[0].0.clone();
        for k in 1..=p {
            let x: Vec<f64> = (0..p).map(|j| x_best[j] + 0.5 * (simplex[k].0[j] - x_best[j])).collect();
            let v = eval(&x, &mut evals);
            simplex[k] = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let r = nelder_mead(&[-1.2, 1.0], 1e-8, 1e-12, 5000, |x| {
            100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
        });
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn flat_function_keeps_start() {
        let r = nelder_mead(&[0.3, 2.0], 1e-6, 1e-9, 1000, |_| 1.0);
        assert_eq!(r.x, vec![0.3, 2.0]);
    }

    #[test]
    fn infinite_regions_are_avoided() {
        let r = nelder_mead(&[1.0], 1e-8, 1e-12, 1000, |x| {
            if x[0] <= 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.2).powi(2)
            }
        });
        assert!((r.x[0] - 0.2).abs() < 1e-6);
    }
}
