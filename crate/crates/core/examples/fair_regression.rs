//! Group-wise regressions with a W2 penalty between the groups' fitted
//! values: unconstrained, two-step and in-model fits over λ*.

use otreweight::fairness::{fit_in_model, fit_two_step, fit_unconstrained, synth_fair_data, FairConfig, FairSynthConfig};

fn main() -> otreweight::Result<()> {
    let data = synth_fair_data(&FairSynthConfig::default())?;
    let cfg = FairConfig::default();
    println!("unconstrained W2 {:.3}", fit_unconstrained(&data)?.w2());
    println!("{:>7} {:>10} {:>10} {:>10} {:>10}", "lambda*", "two-step", "entropy", "in-model", "entropy");
    for k in 0..=5 {
        let lambda = k as f64 / 5.0;
        let two = fit_two_step(&data, lambda, &cfg)?;
        let inm = fit_in_model(&data, lambda, &cfg)?;
        println!(
            "{lambda:>7.1} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            two.w2(),
            two.entropy,
            inm.w2(),
            inm.entropy
        );
    }
    Ok(())
}
