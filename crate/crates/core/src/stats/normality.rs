use crate::error::{Error, Result};
use crate::special::norm_cdf;

use super::{check_finite, descriptives, Df, OmnibusResult};

/// Kolmogorov-Smirnov test against a normal distribution whose mean and sd
/// are estimated from the sample.
///
/// Because the parameters are estimated, the classical KS distribution is
/// too conservative. The p-value uses the Lilliefors correction in the
/// Dallal-Wilkinson (1986) analytic approximation, which is accurate for
/// p ≤ 0.1; above that a polynomial fit in the modified statistic
/// `(√n − 0.01 + 0.85/√n) D` is used (Stephens 1974), as in R's `nortest`.
pub fn ks_normality(xs: &[f64]) -> Result<OmnibusResult> {
    check_finite(xs)?;
    let n = xs.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "normality test needs at least 5 observations, got {n}"
        )));
    }
    let d = descriptives(xs)?;
    let sd = d.sd()?;
    if sd == 0.0 {
        return Err(Error::Degenerate("normality test on a constant sample".into()));
    }
    let mut z: Vec<f64> = xs.iter().map(|x| (x - d.mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut stat: f64 = 0.0;
    for (i, zi) in z.iter().enumerate() {
        let f = norm_cdf(*zi);
        let plus = (i + 1) as f64 / nf - f;
        let minus = f - i as f64 / nf;
        stat = stat.max(plus).max(minus);
    }
    Ok(OmnibusResult {
        test_name: "Kolmogorov-Smirnov (Lilliefors)",
        statistic: stat,
        df: Df::One(nf),
        p_value: lilliefors_p(stat, n),
        degenerate: false,
    })
}

fn lilliefors_p(k: f64, n: usize) -> f64 {
    let nf = n as f64;
    let (kd, nd) = if n <= 100 {
        (k, nf)
    } else {
        (k * (nf / 100.0).powf(0.49), 100.0)
    };
    let p = (-7.01256 * kd * kd * (nd + 2.78019) + 2.99587 * kd * (nd + 2.78019).sqrt() - 0.122119
        + 0.974598 / nd.sqrt()
        + 1.67997 / nd)
        .exp();
    if p <= 0.1 {
        return p.clamp(0.0, 1.0);
    }
    let kk = (nf.sqrt() - 0.01 + 0.85 / nf.sqrt()) * k;
    let p = if kk <= 0.302 {
        1.0
    } else if kk <= 0.5 {
        2.76773 - 19.828315 * kk + 80.709644 * kk.powi(2) - 138.55152 * kk.powi(3)
            + 81.218052 * kk.powi(4)
    } else if kk <= 0.9 {
        -4.901232 + 40.662806 * kk - 97.490286 * kk.powi(2) + 94.029866 * kk.powi(3)
            - 32.355711 * kk.powi(4)
    } else if kk <= 1.31 {
        6.198765 - 19.558097 * kk + 23.186922 * kk.powi(2) - 12.234627 * kk.powi(3)
            + 2.423045 * kk.powi(4)
    } else {
        0.0
    };
    p.clamp(0.0, 1.0)
}
