//! Artifact writers. Bodies depend only on the config and the seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::Run;

/// Provenance block shared by CSV comment headers and JSON reports.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub constants: BTreeMap<String, f64>,
}

impl Header {
    pub fn new(run: &Run) -> anyhow::Result<Self> {
        Ok(Header {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: julia_thermo::VERSION,
            command: run.command.name(),
            seed: run.seed,
            config: serde_json::to_value(run)?,
            constants: BTreeMap::new(),
        })
    }

    pub fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }

    fn comment_lines(&self) -> anyhow::Result<String> {
        let mut s = String::new();
        writeln!(s, "# {} {} (core {})", self.tool, self.version, self.core_version)?;
        writeln!(s, "# command = {}", self.command)?;
        writeln!(s, "# seed = {}", self.seed)?;
        writeln!(s, "# config = {}", serde_json::to_string(&self.config)?)?;
        for (k, v) in &self.constants {
            writeln!(s, "# {k} = {v}")?;
        }
        Ok(s)
    }
}

/// CSV table; cells are preformatted strings.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn target(dir: &Path, name: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

pub fn write_csv(dir: &Path, name: &str, header: &Header, table: &Table) -> anyhow::Result<PathBuf> {
    let mut s = header.comment_lines()?;
    s.push_str(&table.columns.join(","));
    s.push('\n');
    for row in &table.rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    let path = target(dir, name)?;
    std::fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, header: &Header, body: &T) -> anyhow::Result<PathBuf> {
    #[derive(Serialize)]
    struct Report<'a, T> {
        header: &'a Header,
        #[serde(flatten)]
        body: &'a T,
    }
    let path = target(dir, name)?;
    let text = serde_json::to_string_pretty(&Report { header, body })?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
