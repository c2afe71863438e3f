//! Seeded synthetic corpora with field-dependent reference-list lengths.
//!
//! Every `(journal, year)` block draws from its own ChaCha8 stream
//! (`seed`, stream `block + 1`); stream 0 draws the journal quality
//! multipliers. Blocks are generated in parallel and concatenated in block
//! order, so the output depends only on the spec.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocType, DocumentRecord, JournalEntry, JournalMaster, RawReference};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflistFamily {
    /// Gamma-Poisson mixture with size parameter `dispersion`.
    NegativeBinomial,
    /// Every list has length `round(mean)`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflistLength {
    pub family: ReflistFamily,
    pub mean: f64,
    #[serde(default = "default_dispersion")]
    pub dispersion: f64,
}

fn default_dispersion() -> f64 {
    2.0
}

impl ReflistLength {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        match self.family {
            ReflistFamily::Fixed => self.mean.round() as u32,
            ReflistFamily::NegativeBinomial => {
                let gamma = Gamma::new(self.dispersion, self.mean / self.dispersion)
                    .expect("validated gamma parameters");
                let lambda: f64 = gamma.sample(rng);
                if lambda <= 0.0 {
                    return 0;
                }
                let draw: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
                draw.min(u32::MAX as f64) as u32
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub field_id: String,
    pub n_journals: u32,
    pub papers_per_journal_per_year: u32,
    pub reflist: ReflistLength,
    /// Probability that a reference cites one of the two preceding years.
    pub share_refs_to_window: f64,
    /// Probability that a reference cites a journal of the citing field.
    pub within_field_citation_share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum QualityProfile {
    /// Every journal equally likely to be cited within its field.
    #[default]
    Uniform,
    /// Citation propensity multiplied by `exp(σZ − σ²/2)`, `Z ~ N(0, 1)`.
    LogNormal { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub seed: u64,
    pub first_year: i32,
    pub last_year: i32,
    #[serde(default)]
    pub quality: QualityProfile,
    /// Oldest cited year is `citing year − back_years`.
    #[serde(default = "default_back_years")]
    pub back_years: u32,
    pub fields: Vec<FieldSpec>,
}

fn default_back_years() -> u32 {
    10
}

impl SimSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SimSpec = toml::from_str(text).map_err(|e| Error::SimSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("simulation spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SimSpec(msg));
        if self.fields.is_empty() {
            return bad("at least one field is required".into());
        }
        if self.first_year > self.last_year {
            return bad(format!("first_year {} after last_year {}", self.first_year, self.last_year));
        }
        if self.back_years < 3 {
            return bad("back_years must be at least 3".into());
        }
        if let QualityProfile::LogNormal { sigma } = self.quality {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return bad(format!("quality sigma must be non-negative, got {sigma}"));
            }
        }
        let mut seen = BTreeSet::new();
        for f in &self.fields {
            if !seen.insert(f.field_id.as_str()) {
                return bad(format!("duplicate field {:?}", f.field_id));
            }
            if f.field_id.trim().is_empty() {
                return bad("empty field_id".into());
            }
            if f.n_journals == 0 {
                return bad(format!("field {:?} has no journals to cite", f.field_id));
            }
            if f.papers_per_journal_per_year == 0 {
                return bad(format!("field {:?} publishes no papers", f.field_id));
            }
            if !(f.reflist.mean > 0.0 && f.reflist.mean.is_finite()) {
                return bad(format!("field {:?}: reflist mean must be positive", f.field_id));
            }
            if f.reflist.family == ReflistFamily::NegativeBinomial
                && !(f.reflist.dispersion > 0.0 && f.reflist.dispersion.is_finite())
            {
                return bad(format!("field {:?}: dispersion must be positive", f.field_id));
            }
            for (name, p) in [
                ("share_refs_to_window", f.share_refs_to_window),
                ("within_field_citation_share", f.within_field_citation_share),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("field {:?}: {name} {p} outside [0, 1]", f.field_id));
                }
            }
        }
        Ok(())
    }
}

/// A generated corpus with its journal master.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub documents: Vec<DocumentRecord>,
    pub master: JournalMaster,
    /// Quality multiplier per journal id.
    pub quality: BTreeMap<String, f64>,
}

struct SimJournal {
    id: String,
    abbrev: String,
    field: usize,
}

pub fn journal_id(field_id: &str, index: u32) -> String {
    format!("{field_id}-J{index:03}")
}

fn journal_abbrev(field_id: &str, index: u32) -> String {
    format!("{} J{index:03}", field_id.to_uppercase().replace(['-', '_'], " "))
}

/// Generates documents for every journal and year of the spec.
pub fn generate(spec: &SimSpec) -> Result<GeneratedCorpus> {
    spec.validate()?;
    let journals: Vec<SimJournal> = spec
        .fields
        .iter()
        .enumerate()
        .flat_map(|(fi, f)| {
            (1..=f.n_journals).map(move |j| SimJournal {
                id: journal_id(&f.field_id, j),
                abbrev: journal_abbrev(&f.field_id, j),
                field: fi,
            })
        })
        .collect();

    let mut quality_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    quality_rng.set_stream(0);
    let quality: Vec<f64> = match spec.quality {
        QualityProfile::Uniform => vec![1.0; journals.len()],
        QualityProfile::LogNormal { sigma } => {
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            journals
                .iter()
                .map(|_| {
                    let z: f64 = normal.sample(&mut quality_rng);
                    (sigma * z - 0.5 * sigma * sigma).exp()
                })
                .collect()
        }
    };

    // Per field: member journals and a quality-weighted sampler.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); spec.fields.len()];
    for (i, j) in journals.iter().enumerate() {
        members[j.field].push(i);
    }
    let samplers: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| {
            WeightedIndex::new(m.iter().map(|&i| quality[i]))
                .map_err(|e| Error::SimSpec(format!("journal weights: {e}")))
        })
        .collect::<Result<_>>()?;

    let years: Vec<i32> = (spec.first_year..=spec.last_year).collect();
    let n_years = years.len();
    let blocks: Vec<(usize, usize)> = (0..journals.len())
        .flat_map(|j| (0..n_years).map(move |y| (j, y)))
        .collect();

    let documents: Vec<Vec<DocumentRecord>> = blocks
        .par_iter()
        .enumerate()
        .map(|(block_id, &(ji, yi))| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(block_id as u64 + 1);
            let journal = &journals[ji];
            let field = &spec.fields[journal.field];
            let year = years[yi];
            (0..field.papers_per_journal_per_year)
                .map(|p| {
                    let n_refs = field.reflist.sample(&mut rng);
                    let refs = (0..n_refs)
                        .map(|_| {
                            let cited_year = if rng.random_bool(field.share_refs_to_window) {
                                year - rng.random_range(1..=2)
                            } else {
                                year - rng.random_range(3..=spec.back_years as i32)
                            };
                            let target_field = if spec.fields.len() == 1
                                || rng.random_bool(field.within_field_citation_share)
                            {
                                journal.field
                            } else {
                                let other = rng.random_range(0..spec.fields.len() - 1);
                                if other >= journal.field {
                                    other + 1
                                } else {
                                    other
                                }
                            };
                            let cited = members[target_field][samplers[target_field].sample(&mut rng)];
                            RawReference {
                                cited_journal_abbrev: journals[cited].abbrev.clone(),
                                cited_year: Some(cited_year),
                            }
                        })
                        .collect();
                    DocumentRecord {
                        doc_id: format!("{}-{}-{:04}", journal.id, year, p + 1),
                        journal_abbrev: journal.abbrev.clone(),
                        pub_year: year,
                        doc_type: DocType::Article,
                        n_refs_total: n_refs,
                        refs,
                    }
                })
                .collect()
        })
        .collect();
    let documents: Vec<DocumentRecord> = documents.into_iter().flatten().collect();

    let entries = journals
        .iter()
        .map(|j| {
            let field = &spec.fields[j.field];
            let mut e = JournalEntry::new(j.id.clone(), j.abbrev.clone());
            e.full_title = format!("Synthetic journal {} ({})", j.id, field.field_id);
            e.field_id = Some(field.field_id.clone());
            e.citable_items = years
                .iter()
                .map(|&y| (y, field.papers_per_journal_per_year as u64))
                .collect();
            e
        })
        .collect();
    let master = JournalMaster::from_entries(entries)?;
    let quality = journals.iter().zip(&quality).map(|(j, q)| (j.id.clone(), *q)).collect();
    Ok(GeneratedCorpus {
        documents,
        master,
        quality,
    })
}
