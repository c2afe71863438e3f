//! Distribution functions used for p-values.
//!
//! Thin wrappers over the incomplete beta/gamma functions from `statrs` and
//! the error functions from `libm`, expressed as the tail probabilities the
//! tests need.

use statrs::function::{beta::beta_reg, erf, gamma};

pub use statrs::function::gamma::ln_gamma;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal upper tail, accurate far into the tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let z = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // Newton steps polish the inverse to full precision.
    let step = |z: f64| {
        let err = if z < 0.0 { norm_cdf(z) - p } else { (1.0 - p) - norm_sf(z) };
        z - err / norm_pdf(z)
    };
    step(step(z))
}

/// Student t CDF.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return norm_cdf(t);
    }
    let x = df / (df + t * t);
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Upper tail of the F distribution, `P(F > f)`.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let x = df2 / (df2 + df1 * f);
    beta_reg(0.5 * df2, 0.5 * df1, x).clamp(0.0, 1.0)
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma::gamma_ur(0.5 * df, 0.5 * x).clamp(0.0, 1.0)
}
