//! Report assembly. Everything is rendered into memory first and written
//! only once a job has finished, so a failed run leaves no partial files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// A named CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Reads a table written by one of the library's CSV writers.
    pub fn from_csv(name: &str, bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r.records().map(|rec| Ok(rec?.iter().map(str::to_string).collect())).collect::<Result<_>>()?;
        Ok(Self { name: name.into(), header, rows })
    }

    /// CSV text preceded by a comment line carrying the config hash and seed.
    pub fn render(&self, config_hash: &str, seed: u64) -> Result<Vec<u8>> {
        let mut out = format!("# config_sha256={config_hash} seed={seed}\n").into_bytes();
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }
}

/// Shortest round-trip decimal form, `NaN` and `inf` spelled out.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// One assertion of a job.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// What a scenario hands back to the runner.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn new<T: Serialize>(results: &T) -> Result<Self> {
        Ok(Self { results: serde_json::to_value(results)?, checks: Vec::new(), tables: Vec::new() })
    }

    pub fn check(mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        self.checks.push(Check::new(name, pass, detail));
        self
    }

    pub fn table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// A finished run, rendered and ready to be written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: String,
    pub summary: Value,
    pub files: Vec<(String, Vec<u8>)>,
    /// True when assertions failed in a job whose checks are gating.
    pub failed: bool,
}

impl RunOutput {
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| &b[..])
    }
}
