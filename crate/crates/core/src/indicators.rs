//! Quasi-impact factors and fractional c/p ratios.

use crate::corpus::{DocumentRecord, JournalMaster, YearRange};
use crate::counting::{accumulate, NormalizationScope};
use crate::error::{Error, Result};

/// Citations in the numerator divided by the citable items of the two
/// window years.
pub fn quasi_if(numerator: f64, citable_y1: u64, citable_y2: u64) -> Result<f64> {
    quasi_if_window(numerator, &[citable_y1, citable_y2])
}

/// Quasi-IF for an arbitrary window (e.g. five years).
pub fn quasi_if_window(numerator: f64, citable: &[u64]) -> Result<f64> {
    let denominator: u64 = citable.iter().sum();
    if denominator == 0 {
        return Err(Error::InsufficientData("zero citable items in window".into()));
    }
    check_numerator(numerator)?;
    Ok(numerator / denominator as f64)
}

/// Fractional total cites (all cited years) per publication.
pub fn cp_ratio(total_fractional_cites: f64, publications: u64) -> Result<f64> {
    if publications == 0 {
        return Err(Error::InsufficientData("zero publications".into()));
    }
    check_numerator(total_fractional_cites)?;
    Ok(total_fractional_cites / publications as f64)
}

fn check_numerator(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("numerator {x} must be finite and non-negative")))
    }
}

/// How the fractional numerator is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FractionalScope {
    /// Divide by the number of references cited in the window.
    #[default]
    WindowRefs,
    /// Divide by the full reference count.
    AllRefs,
}

/// Which publications form the c/p denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CpPublications {
    /// Citable items summed over every year in the master.
    #[default]
    AllYears,
    CitingYear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorOptions {
    pub window_len: u32,
    pub fractional_scope: FractionalScope,
    pub matched_only: bool,
    pub cp_publications: CpPublications,
}

impl Default for IndicatorOptions {
    fn default() -> Self {
        Self {
            window_len: 2,
            fractional_scope: FractionalScope::WindowRefs,
            matched_only: false,
            cp_publications: CpPublications::AllYears,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRow {
    pub journal_id: String,
    pub field_id: Option<String>,
    pub reference_if: Option<f64>,
    pub quasi_if_integer: f64,
    pub quasi_if_fractional: f64,
    pub cp_fractional: Option<f64>,
    pub denominator_citable: u64,
    pub citations_integer: u64,
    pub citations_fractional: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExclusionReason {
    MissingCitableItems(Vec<i32>),
    ZeroNumerator,
}

impl std::fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExclusionReason::MissingCitableItems(years) => {
                let ys: Vec<String> = years.iter().map(i32::to_string).collect();
                write!(f, "no citable items for {}", ys.join(","))
            }
            ExclusionReason::ZeroNumerator => write!(f, "no citations in window"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub journal_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTable {
    pub citing_year: i32,
    pub window: YearRange,
    pub rows: Vec<IndicatorRow>,
    pub exclusions: Vec<Exclusion>,
}

impl IndicatorTable {
    pub fn row(&self, journal_id: &str) -> Option<&IndicatorRow> {
        self.rows
            .binary_search_by(|r| r.journal_id.as_str().cmp(journal_id))
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "journal_id",
            "reference_if",
            "quasi_if_integer",
            "quasi_if_fractional",
            "cp_fractional",
            "denominator_citable",
            "field_id",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.journal_id.clone(),
                r.reference_if.map(crate::fixed6).unwrap_or_default(),
                crate::fixed6(r.quasi_if_integer),
                crate::fixed6(r.quasi_if_fractional),
                r.cp_fractional.map(crate::fixed6).unwrap_or_default(),
                r.denominator_citable.to_string(),
                r.field_id.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn exclusions_tsv(&self) -> String {
        let mut out = String::from("journal_id\treason\n");
        for e in &self.exclusions {
            out.push_str(&format!("{}\t{}\n", e.journal_id, e.reason));
        }
        out
    }
}

/// Per-journal indicators for documents published in `citing_year`.
///
/// A row exists only for journals with non-zero citable items in every
/// window year and at least one citation in the window; every other master
/// journal is listed in `exclusions`.
pub fn build_indicator_table(
    corpus: &[DocumentRecord],
    master: &JournalMaster,
    citing_year: i32,
    opts: &IndicatorOptions,
) -> Result<IndicatorTable> {
    let window = YearRange::preceding(citing_year, opts.window_len)?;
    let citing: Vec<DocumentRecord> = corpus
        .iter()
        .filter(|d| d.pub_year == citing_year)
        .cloned()
        .collect();

    let window_scope = NormalizationScope::window_refs(window).matched_only(opts.matched_only);
    let integer = accumulate(&citing, master, &window_scope, Some(window), false);
    let fractional = match opts.fractional_scope {
        FractionalScope::WindowRefs => integer.clone(),
        FractionalScope::AllRefs => accumulate(
            &citing,
            master,
            &NormalizationScope::all_refs().matched_only(opts.matched_only),
            Some(window),
            false,
        ),
    };
    let total_cites = accumulate(
        &citing,
        master,
        &NormalizationScope::all_refs().matched_only(opts.matched_only),
        None,
        false,
    );

    let mut rows = Vec::new();
    let mut exclusions = Vec::new();
    for (key, entry) in master.iter() {
        let missing: Vec<i32> = window
            .years()
            .filter(|y| entry.citable_items.get(y).copied().unwrap_or(0) == 0)
            .collect();
        if !missing.is_empty() {
            exclusions.push(Exclusion {
                journal_id: entry.journal_id.clone(),
                reason: ExclusionReason::MissingCitableItems(missing),
            });
            continue;
        }
        let citations_integer = integer.integer(key);
        if citations_integer == 0 {
            exclusions.push(Exclusion {
                journal_id: entry.journal_id.clone(),
                reason: ExclusionReason::ZeroNumerator,
            });
            continue;
        }
        let citable: Vec<u64> = window.years().map(|y| entry.citable_items[&y]).collect();
        let citations_fractional = fractional.fractional(key);
        let publications = match opts.cp_publications {
            CpPublications::AllYears => entry.citable_total(),
            CpPublications::CitingYear => entry.citable_items.get(&citing_year).copied().unwrap_or(0),
        };
        rows.push(IndicatorRow {
            journal_id: entry.journal_id.clone(),
            field_id: entry.field_id.clone(),
            reference_if: entry.reference_if,
            quasi_if_integer: quasi_if_window(citations_integer as f64, &citable)?,
            quasi_if_fractional: quasi_if_window(citations_fractional, &citable)?,
            cp_fractional: cp_ratio(total_cites.fractional(key), publications).ok(),
            denominator_citable: citable.iter().sum(),
            citations_integer,
            citations_fractional,
        });
    }
    Ok(IndicatorTable {
        citing_year,
        window,
        rows,
        exclusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocType, JournalEntry, RawReference};
    use std::collections::BTreeMap;

    #[test]
    fn quasi_if_examples() {
        assert_eq!(quasi_if(4.5, 10, 8).unwrap(), 0.25);
        assert_eq!(quasi_if(0.0, 10, 8).unwrap(), 0.0);
        assert!(quasi_if(1.0, 0, 0).is_err());
        assert!(quasi_if(-1.0, 1, 0).is_err());
    }

    #[test]
    fn cp_examples() {
        assert_eq!(cp_ratio(12.0, 4).unwrap(), 3.0);
        assert_eq!(cp_ratio(0.0, 4).unwrap(), 0.0);
        assert!(cp_ratio(3.0, 0).is_err());
    }

    fn fixture() -> (Vec<DocumentRecord>, JournalMaster) {
        let mut a = JournalEntry::new("A", "A");
        a.citable_items = BTreeMap::from([(2006, 10), (2007, 8), (2008, 2)]);
        a.field_id = Some("f1".into());
        let mut b = JournalEntry::new("B", "B");
        b.citable_items = BTreeMap::from([(2007, 8)]);
        let mut c = JournalEntry::new("C", "C");
        c.citable_items = BTreeMap::from([(2006, 1), (2007, 1)]);
        let master = JournalMaster::from_entries(vec![a, b, c]).unwrap();
        let r = |j: &str, y: i32| RawReference {
            cited_journal_abbrev: j.into(),
            cited_year: Some(y),
        };
        let docs = vec![
            DocumentRecord {
                doc_id: "1".into(),
                journal_abbrev: "A".into(),
                pub_year: 2008,
                doc_type: DocType::Article,
                n_refs_total: 4,
                refs: vec![r("A", 2007), r("A", 2006), r("B", 2007), r("A", 1990)],
            },
            DocumentRecord {
                doc_id: "2".into(),
                journal_abbrev: "B".into(),
                pub_year: 2007,
                doc_type: DocType::Article,
                n_refs_total: 1,
                refs: vec![r("C", 2006)],
            },
        ];
        (docs, master)
    }

    #[test]
    fn table_with_exclusions() {
        let (docs, master) = fixture();
        let t = build_indicator_table(&docs, &master, 2008, &IndicatorOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 1);
        let a = &t.rows[0];
        assert_eq!(a.journal_id, "A");
        assert_eq!(a.denominator_citable, 18);
        assert_eq!(a.quasi_if_integer, 2.0 / 18.0);
        // window refs: A,A,B -> A gets 2/3
        assert_eq!(a.quasi_if_fractional, (2.0 / 3.0) / 18.0);
        // total cites all years with n = 4: A gets 3/4, publications 20
        assert_eq!(a.cp_fractional, Some(0.75 / 20.0));
        assert_eq!(
            t.exclusions,
            vec![
                Exclusion {
                    journal_id: "B".into(),
                    reason: ExclusionReason::MissingCitableItems(vec![2006])
                },
                Exclusion {
                    journal_id: "C".into(),
                    reason: ExclusionReason::ZeroNumerator
                },
            ]
        );
        assert_eq!(
            t.to_csv(),
            "journal_id,reference_if,quasi_if_integer,quasi_if_fractional,cp_fractional,denominator_citable,field_id\n\
             A,,0.111111,0.037037,0.037500,18,f1\n"
        );
    }

    #[test]
    fn all_refs_scope_and_citing_year_cp() {
        let (docs, master) = fixture();
        let opts = IndicatorOptions {
            fractional_scope: FractionalScope::AllRefs,
            cp_publications: CpPublications::CitingYear,
            ..Default::default()
        };
        let t = build_indicator_table(&docs, &master, 2008, &opts).unwrap();
        assert_eq!(t.rows[0].quasi_if_fractional, 0.5 / 18.0);
        assert_eq!(t.rows[0].cp_fractional, Some(0.75 / 2.0));
    }

    #[test]
    fn empty_corpus_gives_empty_table() {
        let (_, master) = fixture();
        let t = build_indicator_table(&[], &master, 2008, &IndicatorOptions::default()).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.exclusions.len(), 3);
    }
}
