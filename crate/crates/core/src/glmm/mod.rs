//! Two-level random-intercept models: journals (level 1) nested in fields
//! (level 2).
//!
//! [`fit_poisson_ri`] maximizes the marginal Poisson likelihood by adaptive
//! Gauss-Hermite quadrature; [`fit_lognormal_ri`] fits the Gaussian
//! random-intercept model to `log y`. Both report naive (inverse observed
//! information) and cluster-robust sandwich standard errors.
//!
//! IF-like outcomes are not integers. The Poisson fits use the kernel
//! `y·η − e^η − lnΓ(y + 1)`, which is a proper likelihood for integer `y`
//! and a pseudo-likelihood otherwise.

mod linalg;
mod lognormal;
mod optim;
mod poisson;
mod suite;

use std::collections::BTreeMap;

pub use lognormal::{fit_lognormal_ri, ZeroHandling};
pub use poisson::{fit_poisson_ri, poisson_loglik, sandwich_se, RobustSe};
pub use suite::{field_map, run_model_suite, ModelId, ModelReport, ModelSuite, SuiteOptions};

use crate::error::{Error, Result};
use crate::special::norm_sf;
use crate::sum::neumaier;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub unit_id: String,
    pub cluster: String,
    pub y: f64,
}

/// Level-1 outcomes tagged with their level-2 cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredOutcomes {
    observations: Vec<Observation>,
    clusters: Vec<String>,
}

impl ClusteredOutcomes {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InsufficientData("no observations".into()));
        }
        if let Some(bad) = observations.iter().find(|o| !(o.y.is_finite() && o.y >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "outcome for {:?} must be finite and non-negative, got {}",
                bad.unit_id, bad.y
            )));
        }
        let mut clusters: Vec<String> = observations.iter().map(|o| o.cluster.clone()).collect();
        clusters.sort();
        clusters.dedup();
        Ok(Self {
            observations,
            clusters,
        })
    }

    /// Convenience constructor from `(unit_id, cluster, y)` triples.
    pub fn from_triples<I, U, C>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (U, C, f64)>,
        U: Into<String>,
        C: Into<String>,
    {
        Self::new(
            rows.into_iter()
                .map(|(u, c, y)| Observation {
                    unit_id: u.into(),
                    cluster: c.into(),
                    y,
                })
                .collect(),
        )
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Sorted cluster ids.
    pub fn clusters(&self) -> &[String] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Outcomes grouped by cluster, in [`clusters`](Self::clusters) order.
    pub fn grouped(&self) -> Vec<Vec<f64>> {
        let index: BTreeMap<&str, usize> = self
            .clusters
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut out = vec![Vec::new(); self.clusters.len()];
        for o in &self.observations {
            out[index[o.cluster.as_str()]].push(o.y);
        }
        out
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let ys: Vec<f64> = self.observations.iter().map(|o| o.y).collect();
        let n = ys.len() as f64;
        let mean = neumaier(&ys) / n;
        let dev: Vec<f64> = ys.iter().map(|y| (y - mean) * (y - mean)).collect();
        let variance = if ys.len() > 1 {
            neumaier(&dev) / (n - 1.0)
        } else {
            0.0
        };
        Diagnostics {
            outcome_mean: mean,
            outcome_variance: variance,
        }
    }
}

/// Raw-data summaries; a variance far above the mean signals level-1
/// overdispersion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub outcome_mean: f64,
    pub outcome_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Poisson,
    LogNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub family: ModelFamily,
    /// Fixed intercept (log scale).
    pub beta0: f64,
    /// Variance of the level-2 random intercepts.
    pub sigma2: f64,
    /// Level-1 residual variance (log-normal model only).
    pub residual_variance: Option<f64>,
    pub se_beta0_naive: f64,
    pub se_beta0_sandwich: f64,
    /// Sandwich SE of `sigma2`; `None` when `sigma2` sits on the zero
    /// boundary, where the delta method is meaningless.
    pub se_sigma2: Option<f64>,
    pub se_sigma2_naive: Option<f64>,
    pub loglik: f64,
    /// Quadrature nodes (0 for the log-normal model, which needs none).
    pub n_quadrature: usize,
    pub converged: bool,
    pub iterations: usize,
    pub loglik_trace: Vec<f64>,
    pub n_units: usize,
    pub n_clusters: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest {
    pub z: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Wald test of the variance component, two-sided at the 5% level.
///
/// Testing a variance on the boundary of its parameter space this way is
/// conservative. Uses the sandwich SE, falling back to the naive one.
pub fn wald_variance_test(fit: &FitResult) -> Result<WaldTest> {
    let se = fit.se_sigma2.or(fit.se_sigma2_naive);
    wald(fit.sigma2, se)
}

/// Wald statistic for a variance estimate and its standard error.
pub fn wald(sigma2: f64, se: Option<f64>) -> Result<WaldTest> {
    if sigma2 == 0.0 || (se.is_none() && sigma2 < BOUNDARY_SIGMA2) {
        return Ok(WaldTest {
            z: 0.0,
            p_value: 1.0,
            significant: false,
        });
    }
    let se = se.filter(|s| *s > 0.0 && s.is_finite()).ok_or_else(|| {
        Error::InvalidInput(format!("no standard error available for sigma2 = {sigma2}"))
    })?;
    let z = sigma2 / se;
    let p_value = (2.0 * norm_sf(z.abs())).min(1.0);
    Ok(WaldTest {
        z,
        p_value,
        significant: p_value < 0.05,
    })
}

/// Variances below this are treated as the zero boundary.
pub(crate) const BOUNDARY_SIGMA2: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComparison {
    pub sigma2_base: f64,
    pub sigma2_alt: f64,
    pub reduction_percent: f64,
}

/// Percentage reduction of the level-2 variance relative to a base model.
pub fn variance_reduction(sigma2_base: f64, sigma2_alt: f64) -> Result<VarianceComparison> {
    if !(sigma2_base > 0.0) || !sigma2_base.is_finite() {
        return Err(Error::InvalidInput(format!(
            "base variance must be positive, got {sigma2_base}"
        )));
    }
    Ok(VarianceComparison {
        sigma2_base,
        sigma2_alt,
        reduction_percent: (sigma2_base - sigma2_alt) / sigma2_base * 100.0,
    })
}
