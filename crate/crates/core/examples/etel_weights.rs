//! Exponentially tilted empirical likelihood weights for a mean condition.

use otreweight::survey::{etel, EstimatingFunction};

fn main() -> otreweight::Result<()> {
    let xs: Vec<Vec<f64>> = [0.2, 1.4, -0.3, 0.9, 2.2, 0.5].iter().map(|&v| vec![v]).collect();
    let pi = vec![1.0; xs.len()];
    for theta in [0.0, 0.8, 1.5, 3.0] {
        let r = etel(&[theta], &xs, &pi, &EstimatingFunction::MeanDeviation)?;
        match r.weights {
            Some(w) => println!("theta {theta}: loglik {:.4}, weights {w:.3?}", r.loglik),
            // 3.0 lies outside the data: no weights can reach it
            None => println!("theta {theta}: outside the convex hull, loglik {}", r.loglik),
        }
    }
    Ok(())
}
