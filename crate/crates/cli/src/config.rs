use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fraccite::glmm::{ModelFamily, SuiteOptions, ZeroHandling};
use fraccite::indicators::{CpPublications, FractionalScope, IndicatorOptions};
use fraccite::stats::PosthocTest;

use crate::error::CliError;
use crate::manifest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeName {
    #[default]
    WindowRefs,
    AllRefs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpName {
    #[default]
    AllYears,
    CitingYear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosthocName {
    #[default]
    DunnettC,
    TukeyHsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    #[default]
    Poisson,
    LogNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroName {
    #[default]
    Error,
    Exclude,
    Offset,
}

fn default_window() -> u32 {
    2
}

fn default_alpha() -> f64 {
    0.05
}

fn default_nodes() -> usize {
    15
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Run configuration, read from TOML. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub master: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub citing_year: i32,
    #[serde(default = "default_window")]
    pub window: u32,
    #[serde(default)]
    pub fractional_scope: ScopeName,
    #[serde(default)]
    pub matched_only: bool,
    #[serde(default)]
    pub cp_publications: CpName,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    /// Seeds the Kruskal-Wallis permutation test.
    #[serde(default)]
    pub seed: u64,
    /// Kruskal-Wallis relabellings; 0 skips the permutation p-value.
    #[serde(default)]
    pub permutations: usize,
    /// Abort on the first malformed corpus line.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub posthoc_test: PosthocName,
    /// Journals compared by the post-hoc tests.
    #[serde(default)]
    pub posthoc_journals: Vec<String>,
    /// Two-class journal partition for the network densities; its keys are
    /// the network's nodes.
    #[serde(default)]
    pub partition: BTreeMap<String, String>,
    #[serde(default)]
    pub model_family: FamilyName,
    #[serde(default)]
    pub zero_handling: ZeroName,
    #[serde(default)]
    pub log_offset: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses the file and resolves its paths. Also returns the sha256 of the
    /// file and the parsed settings as compact JSON (paths as written), both
    /// used in the manifest.
    pub fn load(path: &Path) -> Result<(Self, String, String), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
        let mut cfg = Self::parse(text)?;
        let params = serde_json::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.corpus = base.join(&cfg.corpus);
        cfg.master = base.join(&cfg.master);
        cfg.out_dir = base.join(&cfg.out_dir);
        Ok((cfg, params, sha256_hex(&bytes)))
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.window < 1 {
            return bad("window must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if self.quadrature_nodes < 1 {
            return bad("quadrature_nodes must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        match (self.zero_handling, self.log_offset) {
            (ZeroName::Offset, None) => return bad("zero_handling = \"offset\" needs log_offset".into()),
            (ZeroName::Offset, Some(e)) if !(e > 0.0) => {
                return bad(format!("log_offset must be positive, got {e}"))
            }
            (ZeroName::Error | ZeroName::Exclude, Some(_)) => {
                return bad("log_offset is only used with zero_handling = \"offset\"".into())
            }
            _ => {}
        }
        Ok(())
    }

    pub fn indicator_options(&self) -> IndicatorOptions {
        IndicatorOptions {
            window_len: self.window,
            fractional_scope: match self.fractional_scope {
                ScopeName::WindowRefs => FractionalScope::WindowRefs,
                ScopeName::AllRefs => FractionalScope::AllRefs,
            },
            matched_only: self.matched_only,
            cp_publications: match self.cp_publications {
                CpName::AllYears => CpPublications::AllYears,
                CpName::CitingYear => CpPublications::CitingYear,
            },
        }
    }

    pub fn posthoc(&self) -> PosthocTest {
        match self.posthoc_test {
            PosthocName::DunnettC => PosthocTest::DunnettC,
            PosthocName::TukeyHsd => PosthocTest::TukeyHsd,
        }
    }

    pub fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            family: match self.model_family {
                FamilyName::Poisson => ModelFamily::Poisson,
                FamilyName::LogNormal => ModelFamily::LogNormal,
            },
            n_quadrature: self.quadrature_nodes,
            zero_handling: match self.zero_handling {
                ZeroName::Error => ZeroHandling::Error,
                ZeroName::Exclude => ZeroHandling::ExcludeZeros,
                ZeroName::Offset => ZeroHandling::Offset(self.log_offset.unwrap_or(0.0)),
            },
        }
    }
}
