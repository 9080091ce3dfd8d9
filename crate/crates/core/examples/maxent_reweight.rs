//! Reweight a skewed sample toward N(0, 1): penalized form over a few λ,
//! then the constrained form at a W2² budget.

use otreweight::{solve_dual, solve_primal, ParametricFamily, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

fn main() -> otreweight::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let atoms: Vec<f64> = (0..200).map(|_| Distribution::<f64>::sample(&Exp1, &mut rng) - 1.0).collect();
    let target = ParametricFamily::normal(0.0, 1.0)?;
    let cfg = SolverConfig::default();

    println!("{:>8} {:>10} {:>10} {:>6}", "lambda", "W2²", "entropy", "iter");
    for lambda in [0.0, 1.0, 10.0, 100.0, 1000.0] {
        let sol = solve_dual(&atoms, &target, lambda, &cfg)?;
        println!("{lambda:>8} {:>10.5} {:>10.5} {:>6}", sol.w2sq, sol.entropy, sol.iterations);
    }

    let sol = solve_primal(&atoms, &target, 0.1, &cfg)?;
    println!("budget 0.1: lambda {:.4}, W2² {:.6}, entropy {:.5}", sol.lambda, sol.w2sq, sol.entropy);
    Ok(())
}
