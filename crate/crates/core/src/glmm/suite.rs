use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::fixed6;
use crate::indicators::{IndicatorRow, IndicatorTable};

use super::{
    fit_lognormal_ri, fit_poisson_ri, variance_reduction, wald_variance_test, ClusteredOutcomes,
    FitResult, ModelFamily, Observation, VarianceComparison, WaldTest, ZeroHandling,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelId {
    /// Externally supplied reference impact factor.
    M1,
    /// Integer-counted quasi-IF.
    M2,
    /// Fractionally counted quasi-IF.
    M3,
    /// Fractional citations per publication.
    M4,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4];

    pub fn outcome(self) -> &'static str {
        match self {
            ModelId::M1 => "reference IF",
            ModelId::M2 => "integer quasi-IF",
            ModelId::M3 => "fractional quasi-IF",
            ModelId::M4 => "fractional c/p",
        }
    }

    fn value(self, row: &IndicatorRow) -> Option<f64> {
        match self {
            ModelId::M1 => row.reference_if,
            ModelId::M2 => Some(row.quasi_if_integer),
            ModelId::M3 => Some(row.quasi_if_fractional),
            ModelId::M4 => row.cp_fractional,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub family: ModelFamily,
    pub n_quadrature: usize,
    /// Only used by the log-normal family.
    pub zero_handling: ZeroHandling,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            family: ModelFamily::Poisson,
            n_quadrature: 15,
            zero_handling: ZeroHandling::Error,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelReport {
    pub model: ModelId,
    pub fit: FitResult,
    pub wald: WaldTest,
}

#[derive(Debug, Clone)]
pub struct ModelSuite {
    pub models: Vec<ModelReport>,
    /// Models that could not be fitted, with the reason.
    pub skipped: Vec<(ModelId, String)>,
    /// Journals without a field assignment.
    pub unassigned: Vec<String>,
    /// M3 and M4 against M2.
    pub comparisons: Vec<(ModelId, VarianceComparison)>,
}

impl ModelSuite {
    pub fn model(&self, id: ModelId) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == id)
    }

    /// One row per fitted model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model_id,beta0,se_beta0_naive,se_beta0_sandwich,sigma2,se_sigma2,z,p,n_journals,n_fields,loglik,converged,se_sigma2_naive\n",
        );
        let opt = |v: Option<f64>| v.map(fixed6).unwrap_or_default();
        for m in &self.models {
            let f = &m.fit;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                m.model,
                fixed6(f.beta0),
                fixed6(f.se_beta0_naive),
                fixed6(f.se_beta0_sandwich),
                fixed6(f.sigma2),
                opt(f.se_sigma2),
                fixed6(m.wald.z),
                fixed6(m.wald.p_value),
                f.n_units,
                f.n_clusters,
                fixed6(f.loglik),
                f.converged,
                opt(f.se_sigma2_naive),
            ));
        }
        out
    }

    /// Human-readable notes: skipped models, dropped journals, reductions.
    pub fn notes(&self) -> String {
        let mut out = String::new();
        for (id, why) in &self.skipped {
            out.push_str(&format!("{id} skipped: {why}\n"));
        }
        if !self.unassigned.is_empty() {
            out.push_str(&format!(
                "{} journals without a field assignment were dropped\n",
                self.unassigned.len()
            ));
        }
        for (id, c) in &self.comparisons {
            out.push_str(&format!(
                "{id} vs M2: level-2 variance {:.4} -> {:.4} ({:.2}% reduction)\n",
                c.sigma2_base, c.sigma2_alt, c.reduction_percent
            ));
        }
        out
    }
}

/// Field assignments recorded in the indicator table itself.
pub fn field_map(table: &IndicatorTable) -> BTreeMap<String, String> {
    table
        .rows
        .iter()
        .filter_map(|r| r.field_id.clone().map(|f| (r.journal_id.clone(), f)))
        .collect()
}

/// Fits the four random-intercept models (journals within fields) and
/// compares the level-2 variances of M3 and M4 against M2.
///
/// Journals missing from `field_map` are dropped and reported. M2 and M3
/// share one journal set; M1 uses the journals with a reference IF and M4
/// those with a c/p value. M1 is skipped when no reference IFs exist.
pub fn run_model_suite(
    table: &IndicatorTable,
    field_map: &BTreeMap<String, String>,
    opts: &SuiteOptions,
) -> Result<ModelSuite> {
    let (assigned, unassigned): (Vec<&IndicatorRow>, Vec<&IndicatorRow>) = table
        .rows
        .iter()
        .partition(|r| field_map.contains_key(&r.journal_id));
    let fields: BTreeSet<&String> = assigned.iter().map(|r| &field_map[&r.journal_id]).collect();
    if fields.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "model suite needs journals in at least 2 fields, got {}",
            fields.len()
        )));
    }

    let mut skipped = Vec::new();
    let mut datasets = Vec::new();
    for id in ModelId::ALL {
        let obs: Vec<Observation> = assigned
            .iter()
            .filter_map(|r| {
                id.value(r).map(|y| Observation {
                    unit_id: r.journal_id.clone(),
                    cluster: field_map[&r.journal_id].clone(),
                    y,
                })
            })
            .collect();
        if obs.is_empty() {
            let why = match id {
                ModelId::M1 => "no reference impact factors supplied",
                _ => "no journals with a value for this outcome",
            };
            skipped.push((id, why.to_string()));
            continue;
        }
        datasets.push((id, ClusteredOutcomes::new(obs)?));
    }

    let fitted: Vec<Result<ModelReport>> = datasets
        .par_iter()
        .map(|(id, data)| {
            let fit = match opts.family {
                ModelFamily::Poisson => fit_poisson_ri(data, opts.n_quadrature)?,
                ModelFamily::LogNormal => fit_lognormal_ri(data, opts.zero_handling)?,
            };
            let wald = wald_variance_test(&fit)?;
            Ok(ModelReport {
                model: *id,
                fit,
                wald,
            })
        })
        .collect();
    let models = fitted.into_iter().collect::<Result<Vec<_>>>()?;

    let mut comparisons = Vec::new();
    if let Some(base) = models.iter().find(|m| m.model == ModelId::M2) {
        if base.fit.sigma2 > 0.0 {
            for m in models.iter().filter(|m| matches!(m.model, ModelId::M3 | ModelId::M4)) {
                comparisons.push((m.model, variance_reduction(base.fit.sigma2, m.fit.sigma2)?));
            }
        }
    }
    Ok(ModelSuite {
        models,
        skipped,
        unassigned: unassigned.iter().map(|r| r.journal_id.clone()).collect(),
        comparisons,
    })
}
