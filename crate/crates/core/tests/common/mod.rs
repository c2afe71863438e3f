//! Random corpora shared by the property tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fraccite::{DocType, DocumentRecord, JournalEntry, JournalMaster, RawReference};
use proptest::prelude::*;

pub const CITING_YEAR: i32 = 2008;

/// A cited reference: index into the journal list (indices past the master
/// are unmatched titles) and an optional year.
pub type RefSpec = (usize, Option<i32>);

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub n_journals: usize,
    /// (citing journal, publication year, extra untranscribed references, refs)
    pub docs: Vec<(usize, i32, u32, Vec<RefSpec>)>,
    /// Citable items for 2006 and 2007 per journal; zero means missing.
    pub citable: Vec<(u64, u64)>,
}

pub fn corpus_spec() -> impl Strategy<Value = CorpusSpec> {
    (1usize..6).prop_flat_map(|n| {
        let reference = (0..n + 2, prop::option::weighted(0.9, 2000i32..2009));
        let doc = (
            0..n,
            prop_oneof![3 => Just(CITING_YEAR), 1 => 2005i32..2008],
            prop_oneof![3 => Just(0u32), 1 => 1u32..5],
            prop::collection::vec(reference, 0..12),
        );
        (
            Just(n),
            prop::collection::vec(doc, 0..30),
            prop::collection::vec((0u64..20, 0u64..20), n),
        )
            .prop_map(|(n_journals, docs, citable)| CorpusSpec {
                n_journals,
                docs,
                citable,
            })
    })
}

pub fn abbrev(j: usize) -> String {
    format!("J JOURNAL {j}")
}

pub fn master(spec: &CorpusSpec) -> JournalMaster {
    let entries = (0..spec.n_journals)
        .map(|j| {
            let mut e = JournalEntry::new(format!("j{j}"), abbrev(j));
            let (a, b) = spec.citable[j];
            e.citable_items = [(2006, a), (2007, b), (2008, 10)]
                .into_iter()
                .filter(|&(_, c)| c > 0)
                .collect::<BTreeMap<_, _>>();
            e.field_id = Some(if j % 2 == 0 { "even" } else { "odd" }.into());
            e
        })
        .collect();
    JournalMaster::from_entries(entries).unwrap()
}

pub fn records(spec: &CorpusSpec) -> Vec<DocumentRecord> {
    spec.docs
        .iter()
        .enumerate()
        .map(|(i, (journal, year, extra, refs))| DocumentRecord {
            doc_id: format!("d{i}"),
            journal_abbrev: abbrev(*journal),
            pub_year: *year,
            doc_type: DocType::Article,
            n_refs_total: refs.len() as u32 + extra,
            refs: refs
                .iter()
                .map(|&(j, y)| RawReference {
                    cited_journal_abbrev: abbrev(j),
                    cited_year: y,
                })
                .collect(),
        })
        .collect()
}
