//! Studentized range distribution.
//!
//! `Q = R / S` where `R` is the range of `k` independent standard normals and
//! `ν S²` is chi-square with `ν` degrees of freedom. The CDF is
//!
//! ```text
//! P(Q ≤ q) = ∫₀^∞ f_S(s) W(q s) ds,   W(w) = k ∫ φ(z) [Φ(z) − Φ(z − w)]^(k−1) dz
//! ```
//!
//! Both integrals are evaluated with adaptive Gauss-Kronrod quadrature and
//! the quantile is found with Brent's method.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::quad::{brent, integrate_pieces};
use crate::special::{ln_gamma, norm_cdf, norm_pdf, norm_sf};

const INNER_TOL: f64 = 1e-12;
const OUTER_TOL: f64 = 1e-11;
const Z_LIMIT: f64 = 8.5;

/// `P(range of k standard normals ≤ w)`.
fn range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let integrand = |z: f64| {
        let inside = if z <= 0.5 * w {
            norm_cdf(z) - norm_cdf(z - w)
        } else {
            norm_sf(z - w) - norm_sf(z)
        };
        norm_pdf(z) * inside.max(0.0).powi(km1)
    };
    let mut breaks = vec![-Z_LIMIT, -4.0, -1.5, 0.0, 1.5, 4.0, Z_LIMIT];
    let mid = 0.5 * w;
    if mid < Z_LIMIT {
        breaks.push(mid);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    (k as f64 * integrate_pieces(integrand, &breaks, INNER_TOL)).clamp(0.0, 1.0)
}

/// CDF of the studentized range with `k` groups and `df` degrees of freedom
/// (`f64::INFINITY` for a known variance).
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> f64 {
    if q.is_nan() {
        return f64::NAN;
    }
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    if df.is_infinite() {
        return range_cdf(q, k);
    }

    let nu = df;
    let log_norm = 0.5 * nu * nu.ln() - ln_gamma(0.5 * nu) - (0.5 * nu - 1.0) * std::f64::consts::LN_2;
    let density = |s: f64| {
        if s <= 0.0 {
            // Only ν = 1 has a non-zero density at the origin.
            return if nu == 1.0 { log_norm.exp() } else { 0.0 };
        }
        (log_norm + (nu - 1.0) * s.ln() - 0.5 * nu * s * s).exp()
    };
    let sd = (1.0 / (2.0 * nu)).sqrt();
    let mode = ((nu - 1.0) / nu).max(0.0).sqrt();
    let lo = (mode - 13.0 * sd).max(0.0);
    let hi = mode + 13.0 * sd.max(0.25);
    let mut breaks: Vec<f64> = [lo, mode - 3.0 * sd, mode - sd, mode, mode + sd, mode + 3.0 * sd, hi]
        .into_iter()
        .filter(|b| *b >= lo && *b <= hi)
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let p = integrate_pieces(|s| density(s) * range_cdf(q * s, k), &breaks, OUTER_TOL);
    p.clamp(0.0, 1.0)
}

type CacheKey = (u64, usize, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `q` with `P(Q ≤ q) = 1 − alpha`. Results are memoized per `(alpha, k, df)`.
pub fn studentized_range_quantile(alpha: f64, k: usize, df: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} must lie in (0, 1)")));
    }
    if k < 2 {
        return Err(Error::InvalidInput(format!("studentized range needs k >= 2, got {k}")));
    }
    if df.is_nan() || df < 1.0 {
        return Err(Error::InvalidInput(format!("df {df} must be at least 1")));
    }
    let key = (alpha.to_bits(), k, df.to_bits());
    if let Some(&q) = cache().lock().expect("quantile cache").get(&key) {
        return Ok(q);
    }

    let target = 1.0 - alpha;
    let mut hi = 4.0;
    while studentized_range_cdf(hi, k, df) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical(format!(
                "could not bracket studentized-range quantile (alpha={alpha}, k={k}, df={df})"
            )));
        }
    }
    let lo = if hi > 4.0 { 0.5 * hi } else { 0.0 };
    let q = brent(|q| studentized_range_cdf(q, k, df) - target, lo, hi, 1e-11, 200).map_err(|e| {
        Error::Numerical(format!(
            "studentized-range quantile (alpha={alpha}, k={k}, df={df}): {e}"
        ))
    })?;
    cache().lock().expect("quantile cache").insert(key, q);
    Ok(q)
}
