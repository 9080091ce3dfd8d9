//! W2² from a weighted sample to a parametric law (exact and by quadrature),
//! between two samples, and the gradient in the weights.

use otreweight::{
    grad_w2sq_weights, w2sq_discrete_continuous, w2sq_discrete_discrete, w2sq_quadrature, ParametricFamily,
    QuadratureConfig, WeightedSample,
};

fn main() -> otreweight::Result<()> {
    let sample = WeightedSample::new(vec![-1.2, 0.1, 0.4, 2.5], vec![0.1, 0.4, 0.3, 0.2])?;
    let target = ParametricFamily::skew_normal(0.0, 1.5, 4.0)?;

    let exact = w2sq_discrete_continuous(&sample, &target);
    let quad = w2sq_quadrature(&sample, |lo, hi| target.quantile_split(lo, hi), &QuadratureConfig::default())?;
    println!("exact {exact:.12}\nquad  {quad:.12}");

    let grad = grad_w2sq_weights(&sample, &target)?;
    println!("dW2²/dw = {grad:.5?}");

    let other = WeightedSample::uniform(vec![0.0, 1.0, 2.0])?;
    println!("sample to sample {:.6}", w2sq_discrete_discrete(&sample, &other));
    Ok(())
}
