//! Citation-indicator engine for fractionally counted (citing-side normalized)
//! journal impact factors.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] parses citing documents and the journal registry and matches
//!   cited-journal abbreviations;
//! * [`counting`] turns matched references into integer and fractional
//!   citation tallies (each reference weighted by `1/n` of its citing paper);
//! * [`indicators`] divides tallies by citable items to obtain quasi-impact
//!   factors and fractional c/p ratios;
//! * [`stats`] holds the test battery (ANOVA, Levene, Kruskal-Wallis, Tukey
//!   HSD, Dunnett's C, correlations, Lilliefors) and the studentized-range
//!   distribution;
//! * [`glmm`] fits two-level random-intercept Poisson and log-normal models
//!   with sandwich standard errors;
//! * [`netclass`] builds citation and significance networks, density reports
//!   and Pajek exports;
//! * [`simgen`] generates seeded synthetic corpora with field-dependent
//!   reference-list lengths.

pub mod corpus;
pub mod counting;
pub mod error;
pub mod glmm;
pub mod indicators;
pub mod netclass;
pub mod quad;
pub mod simgen;
pub mod special;
pub mod stats;
pub mod sum;

mod fmt;

pub use corpus::{
    DocType, DocumentRecord, JournalEntry, JournalKey, JournalMaster, ProcessingStats,
    RawReference, YearRange,
};
pub use counting::{CitationTally, DocWeightVector, NormalizationScope, Scope};
pub use error::{Error, Result};
pub use fmt::fixed6;
pub use glmm::{ClusteredOutcomes, FitResult, VarianceComparison};
pub use indicators::{IndicatorRow, IndicatorTable};
pub use netclass::{DensityReport, JournalGraph};
pub use simgen::{FieldSpec, SimSpec};
pub use stats::{GroupSample, OmnibusResult, PairwiseComparison};
