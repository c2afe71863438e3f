//! Statistical test battery.
//!
//! Omnibus tests ([`anova_oneway`], [`levene`], [`kruskal_wallis`]), post-hoc
//! pairwise comparisons ([`tukey_hsd`], [`dunnett_c`]), correlations, a
//! Lilliefors-corrected Kolmogorov-Smirnov normality test, and the
//! studentized-range distribution behind the post-hoc tests.

mod correlation;
mod normality;
mod oneway;
mod posthoc;
mod srange;

pub use correlation::{correlation_matrix, midranks, pearson, spearman, CorrelationMatrix};
pub use normality::ks_normality;
pub use oneway::{anova_oneway, kruskal_wallis, kruskal_wallis_permutation, levene, LeveneCenter};
pub use posthoc::{dunnett_c, pairwise_csv, tukey_hsd, PosthocTest};
pub use srange::{studentized_range_cdf, studentized_range_quantile};

use crate::error::{Error, Result};
use crate::sum::neumaier;

/// Observations of one group, e.g. the per-citing-document fractional
/// weights received by one journal.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub group_id: String,
    pub observations: Vec<f64>,
}

impl GroupSample {
    pub fn new(group_id: impl Into<String>, observations: Vec<f64>) -> Self {
        Self {
            group_id: group_id.into(),
            observations,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Df {
    One(f64),
    Two(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmnibusResult {
    pub test_name: &'static str,
    pub statistic: f64,
    pub df: Df,
    pub p_value: f64,
    /// Set when the statistic had to be defined by convention (zero
    /// within-group variance, all observations tied).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseComparison {
    pub group_i: String,
    pub group_j: String,
    /// `mean_i - mean_j`.
    pub mean_difference: f64,
    pub standard_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `0 ∉ [ci_low, ci_high]`; a bound exactly at zero is not significant.
    pub significant: bool,
    pub degenerate: bool,
}

impl PairwiseComparison {
    /// The (j, i) comparison: difference and bounds negated and swapped.
    pub fn reversed(&self) -> Self {
        Self {
            group_i: self.group_j.clone(),
            group_j: self.group_i.clone(),
            mean_difference: -self.mean_difference,
            standard_error: self.standard_error,
            ci_low: -self.ci_high,
            ci_high: -self.ci_low,
            significant: self.significant,
            degenerate: self.degenerate,
        }
    }
}

pub(crate) fn excludes_zero(lo: f64, hi: f64) -> bool {
    lo > 0.0 || hi < 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptives {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    variance: Option<f64>,
}

impl Descriptives {
    /// Sample variance (n - 1 denominator).
    pub fn variance(&self) -> Result<f64> {
        self.variance
            .ok_or_else(|| Error::InsufficientData("variance needs at least 2 observations".into()))
    }

    pub fn sd(&self) -> Result<f64> {
        self.variance().map(f64::sqrt)
    }
}

pub fn descriptives(xs: &[f64]) -> Result<Descriptives> {
    check_finite(xs)?;
    if xs.is_empty() {
        return Err(Error::InsufficientData("descriptives of an empty sample".into()));
    }
    let n = xs.len();
    let mean = mean(xs);
    let variance = (n >= 2).then(|| sum_sq_dev(xs, mean) / (n - 1) as f64);
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(Descriptives {
        n,
        mean,
        median,
        variance,
    })
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    neumaier(xs) / xs.len() as f64
}

pub(crate) fn sum_sq_dev(xs: &[f64], center: f64) -> f64 {
    let devs: Vec<f64> = xs.iter().map(|x| (x - center) * (x - center)).collect();
    neumaier(&devs)
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("non-finite observation".into()))
    }
}

pub(crate) fn check_groups(groups: &[GroupSample], min_groups: usize, min_n: usize) -> Result<()> {
    if groups.len() < min_groups {
        return Err(Error::InsufficientData(format!(
            "need at least {min_groups} groups, got {}",
            groups.len()
        )));
    }
    for g in groups {
        if g.len() < min_n {
            return Err(Error::InsufficientData(format!(
                "group {:?} has {} observations, need at least {min_n}",
                g.group_id,
                g.len()
            )));
        }
        check_finite(&g.observations)?;
    }
    Ok(())
}
