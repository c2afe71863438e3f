//! Integer and fractional citation tallies.
//!
//! A citing document with `n` references gives each matched reference the
//! weight `1/n`; references to the same journal inside one document are
//! aggregated first, so two references to one journal weigh `2/n`.
//!
//! Fractional sums are computed from exact rational contributions: every
//! document contributes `k/n` to a journal, the `(k, n)` pairs are counted
//! with integers, and only the final per-journal sum over sorted distinct
//! pairs touches floating point. Tallies are therefore bit-identical
//! regardless of corpus order or worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::corpus::{DocumentRecord, JournalKey, JournalMaster, YearRange};
use crate::sum::NeumaierSum;

/// Which references form the denominator `n` of a document's weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// `n` is the document's full reference count.
    AllRefs,
    /// `n` counts only references cited in the window.
    WindowRefs(YearRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizationScope {
    pub scope: Scope,
    /// Count only references matched to the master in `n`.
    pub matched_only: bool,
}

impl NormalizationScope {
    pub fn all_refs() -> Self {
        Self {
            scope: Scope::AllRefs,
            matched_only: false,
        }
    }

    pub fn window_refs(window: YearRange) -> Self {
        Self {
            scope: Scope::WindowRefs(window),
            matched_only: false,
        }
    }

    pub fn matched_only(mut self, yes: bool) -> Self {
        self.matched_only = yes;
        self
    }

    /// The window references must fall in to carry weight. Under
    /// `WindowRefs` the cited window is clipped to the normalization window.
    fn effective_window(&self, cited_window: Option<YearRange>) -> EffectiveWindow {
        match (self.scope, cited_window) {
            (Scope::AllRefs, w) => EffectiveWindow::Range(w),
            (Scope::WindowRefs(s), None) => EffectiveWindow::Range(Some(s)),
            (Scope::WindowRefs(s), Some(c)) => match s.intersect(&c) {
                Some(w) => EffectiveWindow::Range(Some(w)),
                None => EffectiveWindow::Empty,
            },
        }
    }
}

enum EffectiveWindow {
    Range(Option<YearRange>),
    Empty,
}

/// Multiplicities of matched, dated references per `(journal, cited year)`.
pub fn aggregate_doc_refs(
    doc: &DocumentRecord,
    master: &JournalMaster,
    cited_window: Option<YearRange>,
) -> BTreeMap<(JournalKey, i32), u32> {
    let mut out = BTreeMap::new();
    for r in &doc.refs {
        let Some(year) = r.cited_year else { continue };
        if cited_window.is_some_and(|w| !w.contains(year)) {
            continue;
        }
        let Some(key) = master.match_journal(&r.cited_journal_abbrev) else {
            continue;
        };
        *out.entry((key, year)).or_insert(0) += 1;
    }
    out
}

/// One document's fractional contribution: `weight[j] = counts[j] / denominator_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DocWeightVector<'a> {
    pub source_doc: &'a str,
    pub denominator_n: u32,
    pub counts: BTreeMap<JournalKey, u32>,
}

impl DocWeightVector<'_> {
    pub fn weight(&self, key: JournalKey) -> f64 {
        self.counts
            .get(&key)
            .map_or(0.0, |&k| k as f64 / self.denominator_n as f64)
    }

    pub fn weights(&self) -> impl Iterator<Item = (JournalKey, f64)> + '_ {
        let n = self.denominator_n as f64;
        self.counts.iter().map(move |(&j, &k)| (j, k as f64 / n))
    }

    /// `Σ k / n`, always in `[0, 1]`.
    pub fn total_mass(&self) -> f64 {
        if self.denominator_n == 0 {
            return 0.0;
        }
        self.counts.values().map(|&k| k as u64).sum::<u64>() as f64 / self.denominator_n as f64
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Weights one document gives to the journals it cites.
///
/// Under `AllRefs` the denominator is the reported reference count (or the
/// number of listed references if larger); under `WindowRefs` it is the
/// number of references dated inside the window. With `matched_only` only
/// matched references enter the denominator. A zero denominator gives an
/// empty vector.
pub fn doc_weight_vector<'a>(
    doc: &'a DocumentRecord,
    master: &JournalMaster,
    scope: &NormalizationScope,
    cited_window: Option<YearRange>,
) -> DocWeightVector<'a> {
    let mut counts = BTreeMap::new();
    let mut denominator: u32 = match scope.scope {
        Scope::AllRefs if !scope.matched_only => doc.n_refs_total.max(doc.refs.len() as u32),
        _ => 0,
    };
    let window = scope.effective_window(cited_window);

    for r in &doc.refs {
        let key = r
            .cited_year
            .and_then(|_| master.match_journal(&r.cited_journal_abbrev));
        match scope.scope {
            Scope::AllRefs if scope.matched_only => {
                if key.is_some() {
                    denominator += 1;
                }
            }
            Scope::WindowRefs(w) => {
                if r.cited_year.is_some_and(|y| w.contains(y)) && (!scope.matched_only || key.is_some()) {
                    denominator += 1;
                }
            }
            Scope::AllRefs => {}
        }
        let (Some(key), Some(year)) = (key, r.cited_year) else {
            continue;
        };
        let counted = match window {
            EffectiveWindow::Empty => false,
            EffectiveWindow::Range(None) => true,
            EffectiveWindow::Range(Some(w)) => w.contains(year),
        };
        if counted {
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    if denominator == 0 {
        counts.clear();
    }
    DocWeightVector {
        source_doc: &doc.doc_id,
        denominator_n: denominator,
        counts,
    }
}

/// One document's contribution to one journal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DocContribution {
    /// Position of the citing document in the corpus slice.
    pub doc_index: u32,
    pub count: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TallyEntry {
    pub integer_count: u64,
    /// `Σ_n K_n / n` over `by_denominator`.
    pub fractional_count: f64,
    /// Reference counts summed per citing-side denominator `n`: the exact
    /// rational form of the fractional count.
    pub by_denominator: BTreeMap<u32, u64>,
    /// Per citing document, in corpus order, when requested.
    pub per_doc: Option<Vec<DocContribution>>,
}

impl TallyEntry {
    pub fn per_doc_weights(&self) -> Option<Vec<f64>> {
        self.per_doc
            .as_ref()
            .map(|v| v.iter().map(|c| c.weight).collect())
    }

    pub fn per_doc_counts(&self) -> Option<Vec<f64>> {
        self.per_doc
            .as_ref()
            .map(|v| v.iter().map(|c| c.count as f64).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CitationTally {
    pub entries: BTreeMap<JournalKey, TallyEntry>,
}

impl CitationTally {
    pub fn get(&self, key: JournalKey) -> Option<&TallyEntry> {
        self.entries.get(&key)
    }

    pub fn integer(&self, key: JournalKey) -> u64 {
        self.entries.get(&key).map_or(0, |e| e.integer_count)
    }

    pub fn fractional(&self, key: JournalKey) -> f64 {
        self.entries.get(&key).map_or(0.0, |e| e.fractional_count)
    }

    pub fn total_integer(&self) -> u64 {
        self.entries.values().map(|e| e.integer_count).sum()
    }

    /// Total fractional mass. Numerators are pooled per denominator across
    /// journals before dividing, so when every counted reference enters the
    /// denominators (matched-only window scope) each term is an integer and
    /// the total equals the number of contributing documents exactly.
    pub fn total_fractional(&self) -> f64 {
        let mut pooled: BTreeMap<u32, u64> = BTreeMap::new();
        for e in self.entries.values() {
            for (&n, &k) in &e.by_denominator {
                *pooled.entry(n).or_insert(0) += k;
            }
        }
        pooled
            .iter()
            .map(|(&n, &k)| k as f64 / n as f64)
            .sum::<NeumaierSum>()
            .value()
    }

    /// `journal_id\tinteger_count\tfractional_count`, six decimals.
    pub fn to_tsv(&self, master: &JournalMaster) -> String {
        let mut out = String::from("journal_id\tinteger_count\tfractional_count\n");
        for (&key, e) in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                master.journal_id(key),
                e.integer_count,
                crate::fixed6(e.fractional_count)
            ));
        }
        out
    }
}

#[derive(Clone, Copy)]
struct Contribution {
    key: JournalKey,
    count: u32,
    denominator: u32,
    doc: u32,
}

const CHUNK: usize = 2048;

/// Integer and fractional tallies over a corpus.
pub fn accumulate(
    corpus: &[DocumentRecord],
    master: &JournalMaster,
    scope: &NormalizationScope,
    cited_window: Option<YearRange>,
    keep_per_doc: bool,
) -> CitationTally {
    let mut contributions: Vec<Contribution> = corpus
        .par_chunks(CHUNK)
        .enumerate()
        .flat_map_iter(|(chunk_idx, docs)| {
            let base = (chunk_idx * CHUNK) as u32;
            docs.iter().enumerate().flat_map(move |(i, doc)| {
                let v = doc_weight_vector(doc, master, scope, cited_window);
                let n = v.denominator_n;
                v.counts.into_iter().map(move |(key, count)| Contribution {
                    key,
                    count,
                    denominator: n,
                    doc: base + i as u32,
                })
            })
        })
        .collect();

    // Stable sort keeps corpus order within a journal for the per-doc lists.
    contributions.par_sort_by_key(|c| c.key);

    let groups: Vec<&[Contribution]> = contributions.chunk_by(|a, b| a.key == b.key).collect();
    let entries: Vec<(JournalKey, TallyEntry)> = groups
        .into_par_iter()
        .map(|group| {
            let key = group[0].key;
            let integer_count = group.iter().map(|c| c.count as u64).sum();
            let mut by_denominator: BTreeMap<u32, u64> = BTreeMap::new();
            for c in group {
                *by_denominator.entry(c.denominator).or_insert(0) += c.count as u64;
            }
            let fractional_count = by_denominator
                .iter()
                .map(|(&n, &k)| k as f64 / n as f64)
                .sum::<NeumaierSum>()
                .value();
            let per_doc = keep_per_doc.then(|| {
                group
                    .iter()
                    .map(|c| DocContribution {
                        doc_index: c.doc,
                        count: c.count,
                        weight: c.count as f64 / c.denominator as f64,
                    })
                    .collect()
            });
            (
                key,
                TallyEntry {
                    integer_count,
                    fractional_count,
                    by_denominator,
                    per_doc,
                },
            )
        })
        .collect();

    CitationTally {
        entries: entries.into_iter().collect(),
    }
}
