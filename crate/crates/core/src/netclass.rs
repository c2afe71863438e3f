//! Journal networks: citation graphs, significance networks (an edge joins
//! two journals whose fractional-citation distributions do not differ
//! significantly), density reports over a two-class partition, and Pajek
//! export.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{DocumentRecord, JournalMaster, YearRange};
use crate::counting::{accumulate, aggregate_doc_refs, NormalizationScope};
use crate::error::{Error, Result};
use crate::stats::{GroupSample, PosthocTest};

#[derive(Debug, Clone, PartialEq)]
pub struct JournalGraph {
    nodes: Vec<String>,
    directed: bool,
    /// Undirected edges are stored with `i < j`.
    edges: BTreeMap<(usize, usize), f64>,
}

impl JournalGraph {
    /// A graph on the given journals (sorted, duplicates removed) and no
    /// edges.
    pub fn new<I, S>(nodes: I, directed: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = nodes.into_iter().map(Into::into).collect();
        Self {
            nodes: set.into_iter().collect(),
            directed,
            edges: BTreeMap::new(),
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    fn index_or_err(&self, id: &str) -> Result<usize> {
        self.node_index(id)
            .ok_or_else(|| Error::InvalidInput(format!("{id:?} is not a node of the graph")))
    }

    fn key(&self, i: usize, j: usize) -> (usize, usize) {
        if self.directed || i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    /// Adds `w` to the edge `from → to` (or `{from, to}`), creating it if
    /// needed. Undirected graphs reject self-loops.
    pub fn add_edge(&mut self, from: &str, to: &str, w: f64) -> Result<()> {
        let i = self.index_or_err(from)?;
        let j = self.index_or_err(to)?;
        if !self.directed && i == j {
            return Err(Error::InvalidInput(format!(
                "self-loop on {from:?} in an undirected graph"
            )));
        }
        *self.edges.entry(self.key(i, j)).or_insert(0.0) += w;
        Ok(())
    }

    pub fn edge_weight(&self, from: &str, to: &str) -> Option<f64> {
        let i = self.node_index(from)?;
        let j = self.node_index(to)?;
        self.edges.get(&self.key(i, j)).copied()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edge_weight(from, to).is_some()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// `(from, to, weight)` in node order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.edges
            .iter()
            .map(|(&(i, j), &w)| (self.nodes[i].as_str(), self.nodes[j].as_str(), w))
    }

    /// Number of weakly connected components.
    pub fn n_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(i, j) in self.edges.keys() {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
            }
        }
        (0..self.nodes.len()).filter(|&x| find(&mut parent, x) == x).count()
    }

    /// Nodes with no incident edge other than a self-loop.
    pub fn isolated(&self) -> Vec<&str> {
        let mut touched = vec![false; self.nodes.len()];
        for &(i, j) in self.edges.keys() {
            if i != j {
                touched[i] = true;
                touched[j] = true;
            }
        }
        self.nodes
            .iter()
            .zip(touched)
            .filter(|(_, t)| !t)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Directed graph among `journals` weighted by reference counts: an arc
/// `A → B` of weight `w` means documents published in `A` carry `w`
/// matched references to `B` (cited within `cited_window` if given).
/// Self-citations appear as self-loops. No threshold is applied.
pub fn citation_graph(
    corpus: &[DocumentRecord],
    master: &JournalMaster,
    journals: &[&str],
    cited_window: Option<YearRange>,
) -> Result<JournalGraph> {
    if journals.is_empty() {
        return Err(Error::InvalidInput("citation graph needs at least one journal".into()));
    }
    for j in journals {
        if master.key_of(j).is_none() {
            return Err(Error::InvalidInput(format!("{j:?} is not in the journal master")));
        }
    }
    let mut graph = JournalGraph::new(journals.iter().copied(), true);
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for doc in corpus {
        let Some(citing) = master.match_journal(&doc.journal_abbrev) else {
            continue;
        };
        let citing_id = master.journal_id(citing);
        if graph.node_index(citing_id).is_none() {
            continue;
        }
        for ((cited, _), k) in aggregate_doc_refs(doc, master, cited_window) {
            let cited_id = master.journal_id(cited);
            if graph.node_index(cited_id).is_some() {
                *counts
                    .entry((citing_id.to_string(), cited_id.to_string()))
                    .or_insert(0) += k as u64;
            }
        }
    }
    for ((from, to), w) in counts {
        graph.add_edge(&from, &to, w as f64)?;
    }
    Ok(graph)
}

/// What each citing document contributes to a journal's sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Number of references to the journal.
    Integer,
    /// Fractional weight `k / n`.
    Fractional,
}

/// Per-journal samples, one observation per citing document that cites the
/// journal, in corpus order. These are the groups compared when building
/// significance networks.
pub fn journal_samples(
    corpus: &[DocumentRecord],
    master: &JournalMaster,
    journals: &[&str],
    scope: &NormalizationScope,
    cited_window: Option<YearRange>,
    kind: SampleKind,
) -> Result<Vec<GroupSample>> {
    let tally = accumulate(corpus, master, scope, cited_window, true);
    journals
        .iter()
        .map(|j| {
            let key = master
                .key_of(j)
                .ok_or_else(|| Error::InvalidInput(format!("{j:?} is not in the journal master")))?;
            let values = tally
                .get(key)
                .and_then(|e| match kind {
                    SampleKind::Integer => e.per_doc_counts(),
                    SampleKind::Fractional => e.per_doc_weights(),
                })
                .unwrap_or_default();
            Ok(GroupSample::new(*j, values))
        })
        .collect()
}

/// Undirected graph with an edge between every pair of groups whose
/// post-hoc comparison is not significant at `alpha`.
pub fn significance_graph(
    samples: &[GroupSample],
    alpha: f64,
    test: PosthocTest,
) -> Result<JournalGraph> {
    let ids: BTreeSet<&str> = samples.iter().map(|s| s.group_id.as_str()).collect();
    if ids.len() != samples.len() {
        return Err(Error::InvalidInput("duplicate group ids".into()));
    }
    let rows = test.run(samples, alpha)?;
    let mut graph = JournalGraph::new(ids, false);
    for r in rows.iter().filter(|r| !r.significant && r.group_i < r.group_j) {
        graph.add_edge(&r.group_i, &r.group_j, 1.0)?;
    }
    Ok(graph)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScopeDensity {
    pub label: String,
    pub n: usize,
    pub edges: usize,
    /// `None` when the scope has fewer than two nodes.
    pub density: Option<f64>,
    /// See [`average_degree`]. The plain undirected average degree is half
    /// of this.
    pub average_degree: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub complete: ScopeDensity,
    pub a: ScopeDensity,
    pub b: ScopeDensity,
    pub between_edges: usize,
    /// `cross edges / (n_a · n_b)`.
    pub between_density: Option<f64>,
    /// Scopes whose density is undefined.
    pub flags: Vec<String>,
}

/// All-degree average for an undirected density over `n` nodes: each tie
/// is read as a pair of reciprocal arcs and counted at both endpoints, so
/// the result is `2 · density · (n − 1)`.
pub fn average_degree(density: f64, n: usize) -> f64 {
    2.0 * density * n.saturating_sub(1) as f64
}

fn scope(label: &str, n: usize, edges: usize, flags: &mut Vec<String>) -> ScopeDensity {
    let (density, average_degree) = if n >= 2 {
        let d = edges as f64 / (n * (n - 1) / 2) as f64;
        (Some(d), Some(average_degree(d, n)))
    } else {
        flags.push(format!("class {label:?} has {n} node(s); within density undefined"));
        (None, None)
    };
    ScopeDensity {
        label: label.to_string(),
        n,
        edges,
        density,
        average_degree,
    }
}

/// Densities of the complete graph, each of the two partition classes and
/// the bipartite block between them. Classes are ordered by label.
pub fn density_report(
    graph: &JournalGraph,
    partition: &BTreeMap<String, String>,
) -> Result<DensityReport> {
    if graph.is_directed() {
        return Err(Error::InvalidInput("density report needs an undirected graph".into()));
    }
    let mut class = Vec::with_capacity(graph.nodes().len());
    for node in graph.nodes() {
        let label = partition
            .get(node)
            .ok_or_else(|| Error::InvalidInput(format!("partition does not cover {node:?}")))?;
        class.push(label.as_str());
    }
    let labels: BTreeSet<&str> = partition.values().map(String::as_str).collect();
    let labels: Vec<&str> = labels.into_iter().collect();
    if labels.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "partition must have exactly 2 classes, got {}",
            labels.len()
        )));
    }
    let (la, lb) = (labels[0], labels[1]);
    let n_a = class.iter().filter(|c| **c == la).count();
    let n_b = class.len() - n_a;
    let (mut e_a, mut e_b, mut e_between) = (0, 0, 0);
    for &(i, j) in graph.edges.keys() {
        match (class[i] == la, class[j] == la) {
            (true, true) => e_a += 1,
            (false, false) => e_b += 1,
            _ => e_between += 1,
        }
    }
    let mut flags = Vec::new();
    let complete = scope("complete", class.len(), graph.n_edges(), &mut flags);
    let a = scope(la, n_a, e_a, &mut flags);
    let b = scope(lb, n_b, e_b, &mut flags);
    let between_density = (n_a > 0 && n_b > 0).then(|| e_between as f64 / (n_a * n_b) as f64);
    Ok(DensityReport {
        complete,
        a,
        b,
        between_edges: e_between,
        between_density,
        flags,
    })
}

/// Density reports as CSV, one row per named graph.
pub fn density_csv(reports: &[(&str, &DensityReport)]) -> String {
    let opt = |v: Option<f64>| v.map(crate::fixed6).unwrap_or_default();
    let mut out = String::from(
        "graph,n,density,average_degree,a_label,a_n,a_density,a_average_degree,b_label,b_n,b_density,b_average_degree,between_density\n",
    );
    for (name, r) in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            name,
            r.complete.n,
            opt(r.complete.density),
            opt(r.complete.average_degree),
            r.a.label,
            r.a.n,
            opt(r.a.density),
            opt(r.a.average_degree),
            r.b.label,
            r.b.n,
            opt(r.b.density),
            opt(r.b.average_degree),
            opt(r.between_density),
        ));
    }
    out
}

/// Pajek `.net` text: quoted labels, 1-based vertices in node order, then
/// `*Arcs` (directed) or `*Edges` (undirected) with weights.
pub fn export_pajek(graph: &JournalGraph) -> String {
    let mut out = format!("*Vertices {}\n", graph.nodes.len());
    for (i, n) in graph.nodes.iter().enumerate() {
        out.push_str(&format!("{} \"{}\"\n", i + 1, n.replace('"', "'")));
    }
    out.push_str(if graph.directed { "*Arcs\n" } else { "*Edges\n" });
    for (&(i, j), w) in &graph.edges {
        out.push_str(&format!("{} {} {}\n", i + 1, j + 1, w));
    }
    out
}

/// Reads the subset of Pajek written by [`export_pajek`].
pub fn parse_pajek(text: &str) -> Result<JournalGraph> {
    let err = |line: usize, reason: &str| Error::Parse {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let n: usize = header
        .strip_prefix("*Vertices")
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected *Vertices N"))?;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, line) = lines.next().ok_or_else(|| err(ln, "missing vertex lines"))?;
        let (_, rest) = line.split_once(' ').ok_or_else(|| err(ln, "bad vertex line"))?;
        let label = rest
            .trim()
            .strip_prefix('"')
            .and_then(|r| r.strip_suffix('"'))
            .ok_or_else(|| err(ln, "vertex label must be quoted"))?;
        labels.push(label.to_string());
    }
    let (ln, kind) = lines.next().ok_or_else(|| err(ln, "missing *Arcs/*Edges"))?;
    let directed = match kind {
        "*Arcs" => true,
        "*Edges" => false,
        _ => return Err(err(ln, "expected *Arcs or *Edges")),
    };
    let mut graph = JournalGraph::new(labels.iter().cloned(), directed);
    for (ln, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [a, b, w] = parts[..] else {
            return Err(err(ln, "expected `from to weight`"));
        };
        let idx = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|i| (1..=n).contains(i))
                .ok_or_else(|| err(ln, "vertex number out of range"))
        };
        let w: f64 = w.parse().map_err(|_| err(ln, "bad weight"))?;
        let (a, b) = (idx(a)?, idx(b)?);
        graph.add_edge(&labels[a - 1], &labels[b - 1], w)?;
    }
    Ok(graph)
}
