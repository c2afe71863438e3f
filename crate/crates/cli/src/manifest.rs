//! `manifest.tsv`: one line per output file with its hash, the command that
//! wrote it, the hashes of its inputs and the run parameters.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const FILE_NAME: &str = "manifest.tsv";
const HEADER: &str = "file\tsha256\tcommand\tinputs\tparams";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub sha256: String,
    pub command: String,
    pub inputs: String,
    pub params: String,
}

/// Manifest lines keyed by output file name.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: BTreeMap<String, Entry>,
}

impl Manifest {
    /// Reads an existing manifest so that lines for files not rewritten by
    /// this run survive.
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(FILE_NAME);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(e) => return Err(CliError::io(&path, e)),
        };
        let mut entries = BTreeMap::new();
        for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
            let cols: Vec<&str> = line.splitn(5, '\t').collect();
            if cols.len() != 5 {
                return Err(CliError::Config(format!("{}: malformed line {line:?}", path.display())));
            }
            entries.insert(
                cols[0].to_string(),
                Entry {
                    sha256: cols[1].to_string(),
                    command: cols[2].to_string(),
                    inputs: cols[3].to_string(),
                    params: cols[4].to_string(),
                },
            );
        }
        Ok(Self { entries })
    }

    pub fn record(&mut self, file: &str, entry: Entry) {
        self.entries.insert(file.to_string(), entry);
    }

    pub fn render(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for (file, e) in &self.entries {
            out.push_str(&format!(
                "{file}\t{}\t{}\t{}\t{}\n",
                e.sha256, e.command, e.inputs, e.params
            ));
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(FILE_NAME);
        std::fs::write(&path, self.render()).map_err(|e| CliError::io(&path, e))
    }
}
