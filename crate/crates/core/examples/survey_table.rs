//! A small Monte Carlo cell of the informative-selection design: MLE
//! ignores the inclusion probabilities, PMLE and BDCM use them.
//!
//! cargo run --release --example survey_table -- [replicates] [rho]

use otreweight::survey::simulation::{run_simulation, Method};
use otreweight::survey::{BdcmConfig, MeatEstimator, SimulationConfig};

fn main() -> otreweight::Result<()> {
    let mut args = std::env::args().skip(1);
    let replicates = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let rho = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let cfg = SimulationConfig {
        replicates,
        rho,
        population_size: 20_000,
        bootstrap: 20,
        seed: 7,
        ..SimulationConfig::default()
    };
    let report = run_simulation(&cfg, &Method::ALL, &BdcmConfig::default(), MeatEstimator::default())?;
    println!("n={} rho={rho} replicates={replicates}", cfg.sample_size);
    for row in &report.summary {
        println!(
            "{:<5} bias {:.3}  coverage {:.2}  failures {}",
            row.method.name(),
            row.bias,
            row.coverage,
            row.failures
        );
    }
    Ok(())
}
