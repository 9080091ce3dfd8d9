//! Continuous target families: Normal and Azzalini skew-normal.
//!
//! Besides pdf/cdf/quantile, each family exposes its *centered partial mean*
//! `∫_0^c (F⁻¹(q) − mean) dq`. Both families have it in closed form, which
//! lets the transport module integrate squared quantile differences exactly.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Supremum of |skewness| over the skew-normal family (the δ → ±1 limit).
pub const MAX_SKEW_NORMAL_SKEWNESS: f64 = 0.995_271_746_431_156;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(z)` without cancellation.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Φ⁻¹(q) for q in (0, 1); returns ±∞ at the endpoints.
pub fn std_normal_quantile(q: f64) -> f64 {
    if q <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * q);
    if !x.is_finite() {
        return x;
    }
    // one Halley step on the accurate cdf polishes the starting value
    let r = if q < 0.5 {
        (std_normal_cdf(x) - q) / std_normal_pdf(x)
    } else {
        ((1.0 - q) - std_normal_sf(x)) / std_normal_pdf(x)
    };
    if !r.is_finite() {
        return x;
    }
    x - r / (1.0 + 0.5 * x * r)
}

/// Owen's T function `T(h, a) = (1/2π) ∫_0^a exp(−h²(1+x²)/2) / (1+x²) dx`.
pub fn owens_t(h: f64, a: f64) -> f64 {
    if a == 0.0 || !h.is_finite() {
        return 0.0;
    }
    if a < 0.0 {
        return -owens_t(h, -a);
    }
    let h = h.abs();
    if h == 0.0 {
        return a.atan() / (2.0 * PI);
    }
    if a <= 1.0 {
        return owens_t_quadrature(h, a);
    }
    // T(h,a) + T(ah,1/a) = ½Φ(h) + ½Φ(ah) − Φ(h)Φ(ah), written with upper
    // tails so that nothing cancels for large h.
    let ah = a * h;
    let qh = std_normal_sf(h);
    let qah = std_normal_sf(ah);
    0.5 * qh + 0.5 * qah - qh * qah - owens_t_quadrature(ah, 1.0 / a)
}

fn owens_t_quadrature(h: f64, a: f64) -> f64 {
    if h > 40.0 {
        return 0.0;
    }
    let rule = GaussLegendre::cached(32);
    let hh = 0.5 * h * h;
    let integral = rule.integrate(0.0, a, |x| {
        let one_x2 = 1.0 + x * x;
        (-hh * one_x2).exp() / one_x2
    });
    integral / (2.0 * PI)
}

/// Mean, variance and skewness of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

/// Target mean, variance and skewness for skew-normal moment matching.
pub type TargetMoments = Moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParametricFamily {
    Normal { mean: f64, variance: f64 },
    SkewNormal { location: f64, scale: f64, shape: f64 },
}

impl ParametricFamily {
    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        let family = ParametricFamily::Normal { mean, variance };
        family.validate()?;
        Ok(family)
    }

    pub fn skew_normal(location: f64, scale: f64, shape: f64) -> Result<Self> {
        let family = ParametricFamily::SkewNormal {
            location,
            scale,
            shape,
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ParametricFamily::Normal { mean, variance } => {
                finite("mean", mean)?;
                if !(variance > 0.0 && variance.is_finite()) {
                    return Err(Error::Domain {
                        what: "variance",
                        value: variance,
                        domain: "(0, inf)",
                    });
                }
            }
            ParametricFamily::SkewNormal {
                location,
                scale,
                shape,
            } => {
                finite("location", location)?;
                finite("shape", shape)?;
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Domain {
                        what: "scale",
                        value: scale,
                        domain: "(0, inf)",
                    });
                }
            }
        }
        Ok(())
    }

    /// Location, scale and the standardized shape used internally.
    fn standard_form(&self) -> (f64, f64, f64) {
        match *self {
            ParametricFamily::Normal { mean, variance } => (mean, variance.sqrt(), 0.0),
            ParametricFamily::SkewNormal {
                location,
                scale,
                shape,
            } => (location, scale, shape),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (loc, scale, shape) = self.standard_form();
        let z = (x - loc) / scale;
        if shape == 0.0 {
            std_normal_pdf(z) / scale
        } else {
            2.0 * std_normal_pdf(z) * std_normal_cdf(shape * z) / scale
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (loc, scale, shape) = self.standard_form();
        let z = (x - loc) / scale;
        sn_cdf(z, shape).clamp(0.0, 1.0)
    }

    /// Survival function `1 − F(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        let (loc, scale, shape) = self.standard_form();
        let z = (x - loc) / scale;
        sn_sf(z, shape).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain {
                what: "quantile level",
                value: q,
                domain: "(0, 1)",
            });
        }
        Ok(self.quantile_unchecked(q))
    }

    /// Quantile without the domain check; returns ±∞ at 0 and 1.
    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        self.quantile_split(q, 1.0 - q)
    }

    /// Quantile at level `lower`, where `upper = 1 − lower` is supplied
    /// separately so that levels close to 1 keep full relative precision.
    pub fn quantile_split(&self, lower: f64, upper: f64) -> f64 {
        let (loc, scale, shape) = self.standard_form();
        loc + scale * sn_quantile(lower, upper, shape)
    }

    pub fn moments(&self) -> Moments {
        match *self {
            ParametricFamily::Normal { mean, variance } => Moments {
                mean,
                variance,
                skewness: 0.0,
            },
            ParametricFamily::SkewNormal {
                location,
                scale,
                shape,
            } => {
                let delta = shape / (1.0 + shape * shape).sqrt();
                let u = delta * SQRT_2_OVER_PI;
                let v = 1.0 - u * u;
                Moments {
                    mean: location + scale * u,
                    variance: scale * scale * v,
                    skewness: 0.5 * (4.0 - PI) * u.powi(3) / v.powf(1.5),
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    pub fn variance(&self) -> f64 {
        self.moments().variance
    }

    /// `∫_0^c (F⁻¹(q) − mean) dq`, i.e. `E[(X − mean) 1{X ≤ F⁻¹(c)}]`.
    /// Zero at both ends of `[0, 1]`, negative in between.
    pub fn centered_partial_mean(&self, c: f64) -> f64 {
        if c <= 0.0 || c >= 1.0 {
            return 0.0;
        }
        let x = self.quantile_split(c, 1.0 - c);
        self.centered_partial_mean_split(x, c, 1.0 - c)
    }

    /// Centered partial mean at a known quantile `x = F⁻¹(lower)`, with
    /// `upper = 1 − lower` passed separately (see [`Self::quantile_split`]).
    pub(crate) fn centered_partial_mean_split(&self, x: f64, lower: f64, upper: f64) -> f64 {
        if lower <= 0.0 || upper <= 0.0 || !x.is_finite() {
            return 0.0;
        }
        let (loc, scale, shape) = self.standard_form();
        scale * standard_centered_partial_mean((x - loc) / scale, shape, lower, upper)
    }
}

fn finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "finite reals",
        })
    }
}

/// Standard skew-normal (location 0, scale 1, shape `alpha`) cdf.
fn sn_cdf(z: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return std_normal_cdf(z);
    }
    std_normal_cdf(z) - 2.0 * owens_t(z, alpha)
}

fn sn_sf(z: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return std_normal_sf(z);
    }
    std_normal_sf(z) + 2.0 * owens_t(z, alpha)
}

fn sn_pdf(z: f64, alpha: f64) -> f64 {
    2.0 * std_normal_pdf(z) * std_normal_cdf(alpha * z)
}

/// `E[(Z − E Z) 1{Z ≤ z}]` for a standard skew-normal with cdf value
/// `lower` (and survival `upper`) at `z`.
fn standard_centered_partial_mean(z: f64, alpha: f64, lower: f64, upper: f64) -> f64 {
    if alpha == 0.0 {
        return -std_normal_pdf(z);
    }
    let root = (1.0 + alpha * alpha).sqrt();
    let mean = SQRT_2_OVER_PI * alpha / root;
    // Φ(z·root) − lower, evaluated on whichever side avoids cancellation
    let gap = if lower <= upper {
        std_normal_cdf(z * root) - lower
    } else {
        upper - std_normal_sf(z * root)
    };
    -2.0 * std_normal_pdf(z) * std_normal_cdf(alpha * z) + mean * gap
}

/// Standard skew-normal quantile at cdf level `lower = 1 − upper`:
/// safeguarded Newton on the cdf (lower half) or the survival function.
fn sn_quantile(lower: f64, upper: f64, alpha: f64) -> f64 {
    if lower <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if upper <= 0.0 {
        return f64::INFINITY;
    }
    let upper_side = lower > upper;
    if alpha == 0.0 {
        return if upper_side {
            -std_normal_quantile(upper)
        } else {
            std_normal_quantile(lower)
        };
    }
    let target = if upper_side { upper } else { lower };
    let upper = upper_side;
    // residual is increasing in z in both branches
    let residual = |z: f64| {
        if upper {
            target - sn_sf(z, alpha)
        } else {
            sn_cdf(z, alpha) - target
        }
    };

    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let mu = SQRT_2_OVER_PI * delta;
    let sd = (1.0 - mu * mu).sqrt();
    let guess = if upper {
        -std_normal_quantile(target)
    } else {
        std_normal_quantile(target)
    };
    let mut x = mu + sd * guess;

    let mut lo = x - 1.0;
    let mut step = 1.0;
    while residual(lo) > 0.0 {
        step *= 2.0;
        lo = x - step;
        if step > 1e6 {
            break;
        }
    }
    let mut hi = x + 1.0;
    step = 1.0;
    while residual(hi) < 0.0 {
        step *= 2.0;
        hi = x + step;
        if step > 1e6 {
            break;
        }
    }
    x = x.clamp(lo, hi);

    for _ in 0..200 {
        let r = residual(x);
        if r == 0.0 {
            return x;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = sn_pdf(x, alpha);
        let mut next = x - r / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Skew-normal whose mean, variance and skewness equal `target`.
///
/// Inverts the skewness formula in closed form for `δ`, then recovers the
/// scale and location.
pub fn skew_normal_from_moments(target: &TargetMoments) -> Result<ParametricFamily> {
    let TargetMoments {
        mean,
        variance,
        skewness,
    } = *target;
    finite("mean", mean)?;
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Domain {
            what: "variance",
            value: variance,
            domain: "(0, inf)",
        });
    }
    if !skewness.is_finite() || skewness.abs() >= MAX_SKEW_NORMAL_SKEWNESS {
        return Err(Error::InfeasibleSkewness {
            gamma: skewness,
            bound: MAX_SKEW_NORMAL_SKEWNESS,
        });
    }
    let c = 0.5 * (4.0 - PI);
    // γ = c u³ / (1 − u²)^{3/2}  ⇒  u² / (1 − u²) = (|γ| / c)^{2/3}
    let r = (skewness.abs() / c).powf(2.0 / 3.0);
    let u = (r / (1.0 + r)).sqrt().copysign(skewness);
    let delta = u / SQRT_2_OVER_PI;
    let shape = if delta == 0.0 {
        0.0
    } else {
        delta / (1.0 - delta * delta).sqrt()
    };
    let scale = (variance / (1.0 - u * u)).sqrt();
    let location = mean - scale * u;
    ParametricFamily::skew_normal(location, scale, shape)
}
