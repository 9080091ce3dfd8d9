//! Mean-variance weights, a skew-normal target matched to the MV portfolio,
//! and the entropy/W2 trade-off over λ*.

use otreweight::portfolio::{mv_weights, sweep_lambda, synth_returns, target_from_mv, PortfolioConfig, ReturnSynthConfig};

fn main() -> otreweight::Result<()> {
    let r = synth_returns(&ReturnSynthConfig::default())?;
    let mv = mv_weights(&r, 1.0)?;
    println!("MV weights {:.4?} ({} zero)", mv.portfolio.weights, mv.portfolio.stats.zero_count);

    let (target, _) = target_from_mv(&r, 1.0, false)?;
    println!("target {target:?}");
    let grid: Vec<f64> = (0..=5).map(|k| k as f64 / 5.0).collect();
    for p in sweep_lambda(&r, &target, &grid, &PortfolioConfig::default())? {
        println!(
            "lambda* {:.1}: entropy {:.4}  W2² {:.3e}  weights {:.3?}",
            p.lambda_star, p.portfolio.entropy, p.w2sq, p.portfolio.weights
        );
    }
    Ok(())
}
