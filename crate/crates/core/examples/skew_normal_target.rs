//! Moment-match a skew-normal and read back its moments and quantiles.

use otreweight::{skew_normal_from_moments, TargetMoments};

fn main() -> otreweight::Result<()> {
    let target = TargetMoments {
        mean: 1.0,
        variance: 4.0,
        skewness: -0.5,
    };
    let fam = skew_normal_from_moments(&target)?;
    println!("{fam:?}");
    let m = fam.moments();
    println!("mean {:.6}  variance {:.6}  skewness {:.6}", m.mean, m.variance, m.skewness);
    for q in [0.01, 0.25, 0.5, 0.75, 0.99] {
        println!("Q({q}) = {:.6}", fam.quantile(q)?);
    }

    // too skewed for any skew-normal
    let err = skew_normal_from_moments(&TargetMoments { skewness: 1.2, ..target }).unwrap_err();
    println!("skewness 1.2: {err}");
    Ok(())
}
