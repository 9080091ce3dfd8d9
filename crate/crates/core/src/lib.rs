pub mod distributions;
pub mod error;
pub mod experiment;
pub mod fairness;
mod optimize;
pub mod portfolio;
pub mod quadrature;
pub mod reweight;
pub mod rng;
pub mod survey;
pub mod transport;

pub use distributions::{skew_normal_from_moments, Moments, ParametricFamily, TargetMoments};
pub use error::{Error, Result};
pub use transport::{
    grad_w2sq_weights, w2sq_discrete_continuous, w2sq_discrete_discrete, w2sq_quadrature, QuadratureConfig,
    WeightedSample,
};
pub use reweight::{entropy, solve_dual, solve_primal, ReweightSolution, SimplexWeights, SolverConfig};
