//! Citing-document corpus and journal registry.
//!
//! The corpus is line-delimited JSON, one citing document per line:
//!
//! ```text
//! {"doc_id":"d1","journal":"ANN MATH","year":2008,"type":"article","n_refs":3,
//!  "refs":[{"j":"INVENT MATH","y":2007},{"j":"J AM MATH SOC","y":null}]}
//! ```
//!
//! The journal master is tab-separated with a header row and the columns
//! `journal_id, full_title, canonical_abbrev, aliases, field_id, reference_if`
//! followed by any number of `year:count` citable-item cells.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

pub const MIN_YEAR: i32 = 1800;
pub const MAX_YEAR: i32 = 2100;

/// Inclusive, non-empty range of publication years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YearRange {
    first: i32,
    last: i32,
}

impl YearRange {
    pub fn new(first: i32, last: i32) -> Result<Self> {
        if first > last {
            return Err(Error::InvalidInput(format!(
                "empty year range {first}..={last}"
            )));
        }
        Ok(Self { first, last })
    }

    /// The `len` years immediately before `citing_year`.
    pub fn preceding(citing_year: i32, len: u32) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidInput("window length must be at least 1".into()));
        }
        Self::new(citing_year - len as i32, citing_year - 1)
    }

    pub fn first(&self) -> i32 {
        self.first
    }

    pub fn last(&self) -> i32 {
        self.last
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.first..=self.last
    }

    pub fn len(&self) -> u32 {
        (self.last - self.first + 1) as u32
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn intersect(&self, other: &YearRange) -> Option<YearRange> {
        let first = self.first.max(other.first);
        let last = self.last.min(other.last);
        (first <= last).then_some(YearRange { first, last })
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Article,
    Review,
    Letter,
    Proceedings,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReference {
    #[serde(rename = "j")]
    pub cited_journal_abbrev: String,
    /// `None` when the source gave no full publication year ("in press").
    #[serde(rename = "y")]
    pub cited_year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    #[serde(rename = "journal")]
    pub journal_abbrev: String,
    #[serde(rename = "year")]
    pub pub_year: i32,
    #[serde(rename = "type")]
    pub doc_type: DocType,
    /// Length of the full reference list as reported by the source; may
    /// exceed `refs.len()` when records are truncated.
    #[serde(rename = "n_refs")]
    pub n_refs_total: u32,
    #[serde(default)]
    pub refs: Vec<RawReference>,
}

impl DocumentRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("document records always serialize")
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.doc_id.is_empty() {
            return Err("empty doc_id".into());
        }
        if self.journal_abbrev.trim().is_empty() {
            return Err("empty journal".into());
        }
        if !(MIN_YEAR..=MAX_YEAR).contains(&self.pub_year) {
            return Err(format!("year {} outside {MIN_YEAR}..={MAX_YEAR}", self.pub_year));
        }
        for (i, r) in self.refs.iter().enumerate() {
            if let Some(y) = r.cited_year {
                if !(MIN_YEAR..=MAX_YEAR).contains(&y) {
                    return Err(format!("refs[{i}]: year {y} outside {MIN_YEAR}..={MAX_YEAR}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Lenient,
    /// Abort on the first rejected line.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub records: Vec<DocumentRecord>,
    pub rejections: Vec<Rejection>,
}

impl ParsedCorpus {
    /// Rejection report: `line_number\treason` per rejected line.
    pub fn rejection_report(&self) -> String {
        let mut out = String::from("line_number\treason\n");
        for r in &self.rejections {
            out.push_str(&format!("{}\t{}\n", r.line, r.reason.replace(['\t', '\n'], " ")));
        }
        out
    }
}

/// Parse a line-delimited corpus. Blank lines are skipped; line numbers are
/// 1-based. Lines are parsed in parallel but the result is in input order.
pub fn parse_corpus(input: &str, mode: ParseMode) -> Result<ParsedCorpus> {
    let lines: Vec<(usize, &str)> = input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();

    let parsed: Vec<(usize, std::result::Result<DocumentRecord, String>)> = lines
        .par_iter()
        .map(|&(line, text)| {
            let rec = serde_json::from_str::<DocumentRecord>(text)
                .map_err(|e| e.to_string())
                .and_then(|r| r.validate().map(|_| r));
            (line, rec)
        })
        .collect();

    let mut out = ParsedCorpus::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, rec) in parsed {
        match rec {
            Ok(rec) => {
                if let Some(&first) = seen.get(&rec.doc_id) {
                    return Err(Error::DuplicateDocId {
                        doc_id: rec.doc_id,
                        first,
                        second: line,
                    });
                }
                seen.insert(rec.doc_id.clone(), line);
                out.records.push(rec);
            }
            Err(reason) => {
                if mode == ParseMode::Strict {
                    return Err(Error::Parse { line, reason });
                }
                out.rejections.push(Rejection { line, reason });
            }
        }
    }
    Ok(out)
}

pub fn read_corpus(path: impl AsRef<Path>, mode: ParseMode) -> Result<ParsedCorpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, mode)
}

pub fn serialize_corpus(records: &[DocumentRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

/// Canonical form used for abbreviation matching: trimmed, internal
/// whitespace collapsed, upper-cased, trailing periods removed.
pub fn normalize_abbrev(abbrev: &str) -> String {
    let collapsed = abbrev.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| c == '.' || c.is_whitespace())
        .to_uppercase()
}

/// Index of a journal in a [`JournalMaster`]. Keys order like journal ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JournalKey(pub u32);

impl JournalKey {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalEntry {
    pub journal_id: String,
    pub full_title: String,
    pub canonical_abbrev: String,
    pub extra_aliases: Vec<String>,
    pub citable_items: BTreeMap<i32, u64>,
    pub field_id: Option<String>,
    pub reference_if: Option<f64>,
}

impl JournalEntry {
    pub fn new(journal_id: impl Into<String>, canonical_abbrev: impl Into<String>) -> Self {
        let journal_id = journal_id.into();
        Self {
            full_title: journal_id.clone(),
            journal_id,
            canonical_abbrev: canonical_abbrev.into(),
            extra_aliases: Vec::new(),
            citable_items: BTreeMap::new(),
            field_id: None,
            reference_if: None,
        }
    }

    pub fn aliases(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_abbrev.as_str()).chain(self.extra_aliases.iter().map(String::as_str))
    }

    /// Citable items summed over `window`; `None` if any year is missing.
    pub fn citable_in(&self, window: YearRange) -> Option<u64> {
        window
            .years()
            .map(|y| self.citable_items.get(&y).copied())
            .sum()
    }

    pub fn citable_total(&self) -> u64 {
        self.citable_items.values().sum()
    }
}

/// Journal registry with an injective alias index. Immutable after load.
#[derive(Debug, Clone, Default)]
pub struct JournalMaster {
    entries: Vec<JournalEntry>,
    alias_index: HashMap<String, JournalKey>,
}

impl JournalMaster {
    pub fn from_entries(mut entries: Vec<JournalEntry>) -> Result<Self> {
        entries.sort_by(|a, b| a.journal_id.cmp(&b.journal_id));
        for w in entries.windows(2) {
            if w[0].journal_id == w[1].journal_id {
                return Err(Error::Master(format!("duplicate journal_id {:?}", w[0].journal_id)));
            }
        }
        let mut alias_index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.journal_id.is_empty() {
                return Err(Error::Master("empty journal_id".into()));
            }
            if normalize_abbrev(&e.canonical_abbrev).is_empty() {
                return Err(Error::Master(format!("{}: empty canonical abbreviation", e.journal_id)));
            }
            let key = JournalKey(i as u32);
            for alias in e.aliases() {
                let norm = normalize_abbrev(alias);
                if norm.is_empty() {
                    continue;
                }
                match alias_index.get(&norm) {
                    Some(&other) if other != key => {
                        let other: JournalKey = other;
                        return Err(Error::AmbiguousAlias {
                            alias: norm,
                            first: entries[other.index()].journal_id.clone(),
                            second: e.journal_id.clone(),
                        });
                    }
                    _ => {
                        alias_index.insert(norm, key);
                    }
                }
            }
        }
        Ok(Self {
            entries,
            alias_index,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn alias_count(&self) -> usize {
        self.alias_index.len()
    }

    pub fn entry(&self, key: JournalKey) -> &JournalEntry {
        &self.entries[key.index()]
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (JournalKey, &JournalEntry)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (JournalKey(i as u32), e))
    }

    pub fn key_of(&self, journal_id: &str) -> Option<JournalKey> {
        self.entries
            .binary_search_by(|e| e.journal_id.as_str().cmp(journal_id))
            .ok()
            .map(|i| JournalKey(i as u32))
    }

    pub fn journal_id(&self, key: JournalKey) -> &str {
        &self.entries[key.index()].journal_id
    }

    /// The unique journal whose normalized alias equals `normalize(abbrev)`.
    pub fn match_journal(&self, abbrev: &str) -> Option<JournalKey> {
        self.alias_index.get(&normalize_abbrev(abbrev)).copied()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "journal_id\tfull_title\tcanonical_abbrev\taliases\tfield_id\treference_if\tcitable_items\n",
        );
        for e in &self.entries {
            out.push_str(&e.journal_id);
            out.push('\t');
            out.push_str(&e.full_title);
            out.push('\t');
            out.push_str(&e.canonical_abbrev);
            out.push('\t');
            out.push_str(&e.extra_aliases.join("|"));
            out.push('\t');
            out.push_str(e.field_id.as_deref().unwrap_or(""));
            out.push('\t');
            if let Some(r) = e.reference_if {
                out.push_str(&r.to_string());
            }
            for (y, c) in &e.citable_items {
                out.push_str(&format!("\t{y}:{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Parse the tab-separated journal registry.
pub fn parse_journal_master(input: &str) -> Result<JournalMaster> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Master("missing header row".into()))?;
    let first = header.split('\t').next().unwrap_or("").trim();
    if first != "journal_id" {
        return Err(Error::Master(format!(
            "header must start with journal_id, found {first:?}"
        )));
    }

    let mut entries = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 6 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected at least 6 columns, found {}", cols.len()),
            });
        }
        let opt = |s: &str| {
            let s = s.trim();
            (!s.is_empty()).then(|| s.to_string())
        };
        let mut entry = JournalEntry::new(cols[0].trim(), cols[2].trim());
        entry.full_title = cols[1].trim().to_string();
        entry.extra_aliases = cols[3]
            .split('|')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(String::from)
            .collect();
        entry.field_id = opt(cols[4]);
        entry.reference_if = match opt(cols[5]) {
            None => None,
            Some(s) => {
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    reason: format!("reference_if {s:?} is not a number"),
                })?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Parse {
                        line: lineno,
                        reason: format!("reference_if {v} must be finite and non-negative"),
                    });
                }
                Some(v)
            }
        };
        for cell in &cols[6..] {
            for pair in cell.split([' ', ',']).filter(|p| !p.is_empty()) {
                let (y, c) = pair.split_once(':').ok_or_else(|| Error::Parse {
                    line: lineno,
                    reason: format!("citable-item cell {pair:?} is not year:count"),
                })?;
                let year: i32 = y.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    reason: format!("year {y:?} is not an integer"),
                })?;
                let count: i64 = c.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    reason: format!("citable count {c:?} is not an integer"),
                })?;
                if count < 0 {
                    return Err(Error::Master(format!(
                        "{}: negative citable count {count} for {year}",
                        entry.journal_id
                    )));
                }
                if entry.citable_items.insert(year, count as u64).is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        reason: format!("year {year} listed twice"),
                    });
                }
            }
        }
        entries.push(entry);
    }
    JournalMaster::from_entries(entries)
}

pub fn read_journal_master(path: impl AsRef<Path>) -> Result<JournalMaster> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_journal_master(&text)
}

/// Corpus processing counts, for all cited years and for a window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProcessingStats {
    pub n_documents: u64,
    pub n_documents_with_refs: u64,
    pub n_refs_total: u64,
    pub n_refs_with_year: u64,
    /// References with a year whose abbreviation matched the master.
    pub n_refs_matched: u64,
    /// Matched references with a cited year inside the window.
    pub n_refs_in_window: u64,
    /// References with a cited year inside the window, matched or not.
    pub n_refs_window_raw: u64,
    /// Distinct cited abbreviations per document (after aggregation), all years.
    pub n_journal_citations: u64,
    pub n_journal_citations_matched: u64,
    pub n_journal_citations_window: u64,
    pub n_journal_citations_window_matched: u64,
    /// Matched references weighted by 1/n with n the full reference count.
    pub fractional_sum_all: f64,
    /// Matched in-window references weighted by 1/(in-window references).
    pub fractional_sum_window: f64,
    /// Matched in-window references weighted by 1/n with n the full count.
    pub fractional_sum_window_all_n: f64,
    pub avg_refs_per_citing_doc: f64,
    pub avg_window_refs_per_citing_doc: f64,
}

impl ProcessingStats {
    pub fn to_tsv(&self) -> String {
        let rows: [(&str, String, String); 7] = [
            ("documents", self.n_documents.to_string(), self.n_documents.to_string()),
            (
                "documents_with_refs",
                self.n_documents_with_refs.to_string(),
                self.n_documents_with_refs.to_string(),
            ),
            (
                "cited_references",
                self.n_refs_total.to_string(),
                self.n_refs_window_raw.to_string(),
            ),
            (
                "abbreviated_journal_titles",
                self.n_journal_citations.to_string(),
                self.n_journal_citations_window.to_string(),
            ),
            (
                "abbreviated_journal_titles_matching",
                self.n_journal_citations_matched.to_string(),
                self.n_journal_citations_window_matched.to_string(),
            ),
            (
                "cited_references_after_matching",
                self.n_refs_matched.to_string(),
                self.n_refs_in_window.to_string(),
            ),
            (
                "cited_references_fractionally_counted",
                crate::fixed6(self.fractional_sum_all),
                format!(
                    "{} ({})",
                    crate::fixed6(self.fractional_sum_window),
                    crate::fixed6(self.fractional_sum_window_all_n)
                ),
            ),
        ];
        let mut out = String::from("row\tall_years\twindow\n");
        for (name, a, w) in rows {
            out.push_str(&format!("{name}\t{a}\t{w}\n"));
        }
        out.push_str(&format!(
            "references_with_year\t{}\t\n",
            self.n_refs_with_year
        ));
        out.push_str(&format!(
            "average_refs_per_paper\t{}\t{}\n",
            crate::fixed6(self.avg_refs_per_citing_doc),
            crate::fixed6(self.avg_window_refs_per_citing_doc)
        ));
        out
    }
}

pub fn compute_processing_stats(
    corpus: &[DocumentRecord],
    master: &JournalMaster,
    window: YearRange,
) -> ProcessingStats {
    let mut s = ProcessingStats::default();
    let mut frac_all = NeumaierSum::new();
    let mut frac_window = NeumaierSum::new();
    let mut frac_window_all_n = NeumaierSum::new();

    for doc in corpus {
        s.n_documents += 1;
        if !doc.refs.is_empty() {
            s.n_documents_with_refs += 1;
        }
        let n_all = doc.n_refs_total.max(doc.refs.len() as u32) as u64;
        let mut matched_all = 0u64;
        let mut matched_window = 0u64;
        let mut window_raw = 0u64;
        let mut titles: HashMap<String, (bool, bool)> = HashMap::new();
        for r in &doc.refs {
            s.n_refs_total += 1;
            let Some(year) = r.cited_year else { continue };
            s.n_refs_with_year += 1;
            let in_window = window.contains(year);
            if in_window {
                window_raw += 1;
            }
            let norm = normalize_abbrev(&r.cited_journal_abbrev);
            let matched = master.alias_index.contains_key(&norm);
            let slot = titles.entry(norm).or_insert((false, false));
            slot.0 = matched;
            slot.1 |= in_window;
            if matched {
                matched_all += 1;
                if in_window {
                    matched_window += 1;
                }
            }
        }
        for (matched, in_window) in titles.values() {
            s.n_journal_citations += 1;
            if *matched {
                s.n_journal_citations_matched += 1;
            }
            if *in_window {
                s.n_journal_citations_window += 1;
                if *matched {
                    s.n_journal_citations_window_matched += 1;
                }
            }
        }
        s.n_refs_matched += matched_all;
        s.n_refs_in_window += matched_window;
        s.n_refs_window_raw += window_raw;
        if n_all > 0 {
            frac_all += matched_all as f64 / n_all as f64;
            frac_window_all_n += matched_window as f64 / n_all as f64;
        }
        if window_raw > 0 {
            frac_window += matched_window as f64 / window_raw as f64;
        }
    }
    s.fractional_sum_all = frac_all.value();
    s.fractional_sum_window = frac_window.value();
    s.fractional_sum_window_all_n = frac_window_all_n.value();
    if s.fractional_sum_all > 0.0 {
        s.avg_refs_per_citing_doc = s.n_refs_matched as f64 / s.fractional_sum_all;
    }
    if s.fractional_sum_window > 0.0 {
        s.avg_window_refs_per_citing_doc = s.n_refs_in_window as f64 / s.fractional_sum_window;
    }
    s
}
