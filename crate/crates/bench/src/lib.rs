//! Benchmark fixtures.

use fraccite::simgen::{generate, GeneratedCorpus, QualityProfile, ReflistFamily, ReflistLength};
use fraccite::{FieldSpec, SimSpec};

/// Synthetic corpus of `n_fields` fields with 40 journals each and 40
/// papers per journal-year over 2006-2008; reference-list means rise from
/// 8 in steps of 3. Ten fields give roughly a million references.
pub fn corpus(n_fields: usize) -> GeneratedCorpus {
    let spec = SimSpec {
        seed: 2024,
        first_year: 2006,
        last_year: 2008,
        quality: QualityProfile::LogNormal { sigma: 0.5 },
        back_years: 10,
        fields: (0..n_fields)
            .map(|i| FieldSpec {
                field_id: format!("f{i}"),
                n_journals: 40,
                papers_per_journal_per_year: 40,
                reflist: ReflistLength {
                    family: ReflistFamily::NegativeBinomial,
                    mean: 8.0 + 3.0 * i as f64,
                    dispersion: 2.0,
                },
                share_refs_to_window: 0.25,
                within_field_citation_share: 0.9,
            })
            .collect(),
    };
    generate(&spec).expect("benchmark spec is valid")
}
