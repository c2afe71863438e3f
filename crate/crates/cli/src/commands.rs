use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};

use fraccite::corpus::{parse_corpus, parse_journal_master, ParseMode, ParsedCorpus};
use fraccite::counting::accumulate;
use fraccite::glmm::{field_map, run_model_suite};
use fraccite::indicators::build_indicator_table;
use fraccite::netclass::{
    citation_graph, density_csv, density_report, export_pajek, journal_samples, significance_graph,
    SampleKind,
};
use fraccite::simgen::{generate, SimSpec};
use fraccite::stats::{
    anova_oneway, correlation_matrix, descriptives, ks_normality, kruskal_wallis,
    kruskal_wallis_permutation, levene, pairwise_csv, Df, LeveneCenter, OmnibusResult,
};
use fraccite::{
    fixed6, DocumentRecord, GroupSample, IndicatorTable, JournalMaster, NormalizationScope, YearRange,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{self, sha256_hex, Manifest};

/// Loaded inputs and the output directory of one invocation.
pub struct Run {
    cfg: RunConfig,
    params: String,
    inputs: String,
    parsed: ParsedCorpus,
    master: JournalMaster,
    window: YearRange,
    manifest: Manifest,
    table: Option<IndicatorTable>,
}

fn read_input(path: &Path) -> Result<(String, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let hash = sha256_hex(&bytes);
    let text = String::from_utf8(bytes).map_err(|_| {
        CliError::Module(fraccite::Error::InvalidInput(format!(
            "{} is not UTF-8",
            path.display()
        )))
    })?;
    Ok((text, hash))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

impl Run {
    pub fn open(config_path: &Path) -> Result<Self, CliError> {
        let (cfg, params, config_hash) = RunConfig::load(config_path)?;
        info!(
            "fraccite {} config {} sha256={config_hash}",
            env!("CARGO_PKG_VERSION"),
            config_path.display()
        );
        let window = YearRange::preceding(cfg.citing_year, cfg.window)
            .map_err(|e| CliError::Config(e.to_string()))?;

        let (master_text, master_hash) = read_input(&cfg.master)?;
        let master = parse_journal_master(&master_text)?;
        let (corpus_text, corpus_hash) = read_input(&cfg.corpus)?;
        let mode = if cfg.strict { ParseMode::Strict } else { ParseMode::Lenient };
        let parsed = parse_corpus(&corpus_text, mode)?;
        info!(
            "{} documents, {} rejected lines, {} journals",
            parsed.records.len(),
            parsed.rejections.len(),
            master.len()
        );

        create_dir(&cfg.out_dir)?;
        let manifest = Manifest::load(&cfg.out_dir)?;
        let inputs = format!(
            "config={config_hash},corpus={corpus_hash},master={master_hash}"
        );
        Ok(Self {
            cfg,
            params,
            inputs,
            parsed,
            master,
            window,
            manifest,
            table: None,
        })
    }

    fn write(&mut self, command: &str, file: &str, contents: &str) -> Result<(), CliError> {
        let path = self.cfg.out_dir.join(file);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.manifest.record(
            file,
            manifest::Entry {
                sha256: sha256_hex(contents.as_bytes()),
                command: command.to_string(),
                inputs: self.inputs.clone(),
                params: self.params.clone(),
            },
        );
        info!("wrote {}", path.display());
        Ok(())
    }

    pub fn finish(self) -> Result<(), CliError> {
        self.manifest.save(&self.cfg.out_dir)
    }

    fn citing_docs(&self) -> Vec<DocumentRecord> {
        self.parsed
            .records
            .iter()
            .filter(|d| d.pub_year == self.cfg.citing_year)
            .cloned()
            .collect()
    }

    fn scope(&self) -> NormalizationScope {
        let scope = match self.cfg.fractional_scope {
            crate::config::ScopeName::WindowRefs => NormalizationScope::window_refs(self.window),
            crate::config::ScopeName::AllRefs => NormalizationScope::all_refs(),
        };
        scope.matched_only(self.cfg.matched_only)
    }

    fn table(&mut self) -> Result<&IndicatorTable, CliError> {
        if self.table.is_none() {
            let t = build_indicator_table(
                &self.parsed.records,
                &self.master,
                self.cfg.citing_year,
                &self.cfg.indicator_options(),
            )?;
            self.table = Some(t);
        }
        Ok(self.table.as_ref().expect("table just built"))
    }

    pub fn stats(&mut self) -> Result<(), CliError> {
        let docs = self.citing_docs();
        let stats = fraccite::corpus::compute_processing_stats(&docs, &self.master, self.window);
        self.write("stats", "processing_stats.tsv", &stats.to_tsv())?;
        let report = self.parsed.rejection_report();
        self.write("stats", "rejections.tsv", &report)
    }

    pub fn tally(&mut self) -> Result<(), CliError> {
        let docs = self.citing_docs();
        let tally = accumulate(&docs, &self.master, &self.scope(), Some(self.window), false);
        let tsv = tally.to_tsv(&self.master);
        self.write("tally", "tally.tsv", &tsv)
    }

    pub fn indicators(&mut self) -> Result<(), CliError> {
        let table = self.table()?;
        let (csv, excl) = (table.to_csv(), table.exclusions_tsv());
        if !table.exclusions.is_empty() {
            info!("{} journals excluded from the indicator table", table.exclusions.len());
        }
        self.write("indicators", "indicators.csv", &csv)?;
        self.write("indicators", "exclusions.tsv", &excl)
    }

    /// Correlations among the indicators, over journals that have every
    /// included indicator. The reference IF column is included when any
    /// journal carries one.
    pub fn correlate(&mut self) -> Result<(), CliError> {
        let table = self.table()?;
        let with_ref = table.rows.iter().any(|r| r.reference_if.is_some());
        let mut cols: Vec<(&str, Vec<f64>)> = Vec::new();
        if with_ref {
            cols.push(("reference_if", Vec::new()));
        }
        cols.push(("quasi_if_integer", Vec::new()));
        cols.push(("quasi_if_fractional", Vec::new()));
        cols.push(("cp_fractional", Vec::new()));
        for r in &table.rows {
            let mut values = Vec::with_capacity(cols.len());
            if with_ref {
                let Some(v) = r.reference_if else { continue };
                values.push(v);
            }
            let Some(cp) = r.cp_fractional else { continue };
            values.extend([r.quasi_if_integer, r.quasi_if_fractional, cp]);
            for (c, v) in cols.iter_mut().zip(values) {
                c.1.push(v);
            }
        }
        let slices: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (*n, v.as_slice())).collect();
        let matrix = correlation_matrix(&slices)?;
        info!("correlations over {} journals", matrix.n);
        let csv = matrix.to_csv();
        self.write("correlate", "correlations.csv", &csv)
    }

    fn samples(&self, journals: &[String], kind: SampleKind) -> Result<Vec<GroupSample>, CliError> {
        let docs = self.citing_docs();
        let ids: Vec<&str> = journals.iter().map(String::as_str).collect();
        Ok(journal_samples(
            &docs,
            &self.master,
            &ids,
            &self.scope(),
            Some(self.window),
            kind,
        )?)
    }

    pub fn posthoc(&mut self) -> Result<(), CliError> {
        let journals = self.cfg.posthoc_journals.clone();
        if journals.len() < 2 {
            return Err(CliError::Config("posthoc needs at least 2 posthoc_journals".into()));
        }
        let groups = self.samples(&journals, SampleKind::Fractional)?;

        let mut desc = String::from("group\tn\tmean\tsd\tmedian\n");
        for g in &groups {
            let d = descriptives(&g.observations)?;
            let sd = d.sd().map(fixed6).unwrap_or_default();
            desc.push_str(&format!(
                "{}\t{}\t{}\t{sd}\t{}\n",
                g.group_id,
                d.n,
                fixed6(d.mean),
                fixed6(d.median)
            ));
        }

        let mut omnibus = String::from("test\tgroup\tstatistic\tdf1\tdf2\tp_value\tdegenerate\n");
        let mut push = |group: &str, r: &OmnibusResult| {
            let (df1, df2) = match r.df {
                Df::One(a) => (fixed6(a), String::new()),
                Df::Two(a, b) => (fixed6(a), fixed6(b)),
            };
            omnibus.push_str(&format!(
                "{}\t{group}\t{}\t{df1}\t{df2}\t{}\t{}\n",
                r.test_name,
                fixed6(r.statistic),
                fixed6(r.p_value),
                r.degenerate
            ));
        };
        push("all", &anova_oneway(&groups)?);
        push("all", &levene(&groups, LeveneCenter::Mean)?);
        push("all", &kruskal_wallis(&groups)?);
        if self.cfg.permutations > 0 {
            push(
                "all",
                &kruskal_wallis_permutation(&groups, self.cfg.permutations, self.cfg.seed)?,
            );
        }
        for g in &groups {
            match ks_normality(&g.observations) {
                Ok(r) => push(&g.group_id, &r),
                Err(e) => warn!("normality test skipped for {}: {e}", g.group_id),
            }
        }

        let rows = self.cfg.posthoc().run(&groups, self.cfg.alpha)?;
        let csv = pairwise_csv(&rows)?;
        self.write("posthoc", "descriptives.tsv", &desc)?;
        self.write("posthoc", "omnibus.tsv", &omnibus)?;
        self.write("posthoc", "posthoc.csv", &csv)
    }

    pub fn network(&mut self) -> Result<(), CliError> {
        let partition: BTreeMap<String, String> = self.cfg.partition.clone();
        if partition.len() < 2 {
            return Err(CliError::Config("network needs a partition over at least 2 journals".into()));
        }
        let journals: Vec<String> = partition.keys().cloned().collect();
        let ids: Vec<&str> = journals.iter().map(String::as_str).collect();
        let docs = self.citing_docs();
        let citations = citation_graph(&docs, &self.master, &ids, Some(self.window))?;

        let test = self.cfg.posthoc();
        let integer = significance_graph(
            &self.samples(&journals, SampleKind::Integer)?,
            self.cfg.alpha,
            test,
        )?;
        let fractional = significance_graph(
            &self.samples(&journals, SampleKind::Fractional)?,
            self.cfg.alpha,
            test,
        )?;
        let r_int = density_report(&integer, &partition)?;
        let r_frac = density_report(&fractional, &partition)?;
        for flag in r_int.flags.iter().chain(&r_frac.flags) {
            warn!("{flag}");
        }
        let density = density_csv(&[("integer", &r_int), ("fractional", &r_frac)]);

        self.write("network", "citation.net", &export_pajek(&citations))?;
        self.write("network", "significance_integer.net", &export_pajek(&integer))?;
        self.write("network", "significance_fractional.net", &export_pajek(&fractional))?;
        self.write("network", "density.csv", &density)
    }

    pub fn models(&mut self) -> Result<(), CliError> {
        let opts = self.cfg.suite_options();
        let table = self.table()?;
        let fields = field_map(table);
        let suite = run_model_suite(table, &fields, &opts)?;
        for m in &suite.models {
            if !m.fit.converged {
                warn!("{} did not converge", m.model);
            }
        }
        let (csv, notes) = (suite.to_csv(), suite.notes());
        self.write("models", "models.csv", &csv)?;
        self.write("models", "models_notes.txt", &notes)
    }

    pub fn pipeline(&mut self) -> Result<(), CliError> {
        self.stats()?;
        self.tally()?;
        self.indicators()?;
        self.correlate()?;
        self.posthoc()?;
        self.network()?;
        self.models()
    }
}

/// Journals for the generated run config: post-hoc groups taken round-robin
/// across fields, and a partition made of the first two fields (or the two
/// halves of a single field).
fn simulated_selection(spec: &SimSpec) -> (Vec<String>, BTreeMap<String, String>) {
    use fraccite::simgen::journal_id;
    const POSTHOC: usize = 5;
    const PER_CLASS: u32 = 10;

    let mut posthoc = Vec::new();
    let max_j = spec.fields.iter().map(|f| f.n_journals).max().unwrap_or(0);
    'outer: for j in 1..=max_j {
        for f in &spec.fields {
            if j <= f.n_journals {
                posthoc.push(journal_id(&f.field_id, j));
                if posthoc.len() == POSTHOC {
                    break 'outer;
                }
            }
        }
    }

    let mut partition = BTreeMap::new();
    if spec.fields.len() >= 2 {
        for f in &spec.fields[..2] {
            for j in 1..=f.n_journals.min(PER_CLASS) {
                partition.insert(journal_id(&f.field_id, j), f.field_id.clone());
            }
        }
    } else if let Some(f) = spec.fields.first() {
        let n = f.n_journals.min(2 * PER_CLASS);
        for j in 1..=n {
            let half = if j <= n / 2 { "a" } else { "b" };
            partition.insert(journal_id(&f.field_id, j), format!("{}-{half}", f.field_id));
        }
    }
    (posthoc, partition)
}

/// Writes `corpus.jsonl`, `master.tsv` and a `run.toml` that points at them.
pub fn simulate(spec_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let (text, spec_hash) = read_input(spec_path)?;
    let spec = SimSpec::from_toml(&text).map_err(|e| CliError::Config(e.to_string()))?;
    info!(
        "fraccite {} simulate {} sha256={spec_hash}",
        env!("CARGO_PKG_VERSION"),
        spec_path.display()
    );
    let generated = generate(&spec)?;
    info!(
        "generated {} documents in {} journals",
        generated.documents.len(),
        generated.master.len()
    );

    let (posthoc_journals, partition) = simulated_selection(&spec);
    let run = RunConfig {
        corpus: PathBuf::from("corpus.jsonl"),
        master: PathBuf::from("master.tsv"),
        out_dir: PathBuf::from("results"),
        citing_year: spec.last_year,
        window: 2,
        fractional_scope: Default::default(),
        matched_only: false,
        cp_publications: Default::default(),
        alpha: 0.05,
        quadrature_nodes: 15,
        seed: spec.seed,
        permutations: 0,
        strict: false,
        posthoc_test: Default::default(),
        posthoc_journals,
        partition,
        model_family: Default::default(),
        zero_handling: Default::default(),
        log_offset: None,
        threads: None,
    };
    let run_toml = toml::to_string(&run).map_err(|e| CliError::Config(e.to_string()))?;

    create_dir(out_dir)?;
    let mut manifest = Manifest::load(out_dir)?;
    let inputs = format!("spec={spec_hash}");
    let params = serde_json::json!({ "seed": spec.seed, "spec": file_name(spec_path) }).to_string();
    let files = [
        ("corpus.jsonl", fraccite::corpus::serialize_corpus(&generated.documents)),
        ("master.tsv", generated.master.to_tsv()),
        ("run.toml", run_toml),
    ];
    for (name, contents) in &files {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        manifest.record(
            name,
            manifest::Entry {
                sha256: sha256_hex(contents.as_bytes()),
                command: "simulate".into(),
                inputs: inputs.clone(),
                params: params.clone(),
            },
        );
        info!("wrote {}", path.display());
    }
    manifest.save(out_dir)
}
