//! Structured command reports and on-disk outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Tolerances};

/// Error raised for invalid configurations; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// One named comparison of a measured value against a bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// Passes when value ≤ tolerance; NaN fails.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance, detail: String::new() }
    }

    /// Passes when value ≥ bound; NaN fails.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, tolerance: bound, passed: value >= bound, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// A rectangular table written as `<command>_<name>.csv`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub data: BTreeMap<String, serde_json::Value>,
    #[serde(skip)]
    pub tables: BTreeMap<String, Table>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
    /// Extra artifacts already written by the command.
    #[serde(skip)]
    pub artifacts: Vec<PathBuf>,
}

impl Report {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            tolerances: config.tolerances.clone(),
            checks: Vec::new(),
            data: BTreeMap::new(),
            tables: BTreeMap::new(),
            timings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn data(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report data serializes");
        self.data.insert(key.to_string(), v);
    }

    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.insert(name.to_string(), table);
    }

    /// Runs a stage and records its wall time.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Appends another report with its check names prefixed.
    pub fn merge(&mut self, prefix: &str, mut other: Report) {
        for c in other.checks.iter_mut() {
            c.name = format!("{prefix}.{}", c.name);
        }
        self.absorb(prefix, other);
    }

    /// Appends another report, keeping check names and prefixing the rest.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        self.checks.extend(other.checks);
        for (k, v) in other.data {
            self.data.insert(format!("{prefix}.{k}"), v);
        }
        for (k, t) in other.tables {
            self.tables.insert(format!("{prefix}_{k}"), t);
        }
        for (k, t) in other.timings {
            self.timings.push((format!("{prefix}.{k}"), t));
        }
        self.artifacts.extend(other.artifacts);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandEntry {
    pub passed: bool,
    pub checks: BTreeMap<String, bool>,
    pub files: Vec<String>,
}

/// Per-directory run manifest. Entries are keyed by command so repeated
/// runs with the same configuration give identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub commands: BTreeMap<String, CommandEntry>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv(path: &Path, columns: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes the report JSON and CSVs, the resolved configuration, and
/// updates the manifest and timing files. Returns the paths written.
pub fn write_outputs(report: &Report, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let cmd = &report.command;
    let mut files = Vec::new();

    let json = dir.join(format!("{cmd}.json"));
    write_json(&json, report)?;
    files.push(json);

    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), format!("{:e}", c.value), format!("{:e}", c.tolerance), c.passed.to_string()])
        .collect();
    let csv_path = dir.join(format!("{cmd}.csv"));
    write_csv(&csv_path, &["check", "value", "tolerance", "passed"].map(String::from), &rows)?;
    files.push(csv_path);

    for (name, t) in &report.tables {
        let p = dir.join(format!("{cmd}_{name}.csv"));
        write_csv(&p, &t.columns, &t.rows)?;
        files.push(p);
    }
    files.extend(report.artifacts.iter().cloned());

    let resolved = dir.join("resolved_config.json");
    std::fs::write(&resolved, config.canonical_json() + "\n")?;

    let manifest_path = dir.join("manifest.json");
    let mut manifest = std::fs::read_to_string(&manifest_path)
        .ok()
        .and_then(|s| serde_json::from_str::<RunManifest>(&s).ok())
        .filter(|m| m.config_hash == report.config_hash)
        .unwrap_or_else(|| RunManifest {
            config_hash: report.config_hash.clone(),
            version: report.version.clone(),
            commands: BTreeMap::new(),
        });
    manifest.commands.insert(
        cmd.clone(),
        CommandEntry {
            passed: report.passed(),
            checks: report.checks.iter().map(|c| (c.name.clone(), c.passed)).collect(),
            files: files.iter().map(|p| file_name(p)).collect(),
        },
    );
    write_json(&manifest_path, &manifest)?;

    // Wall times vary between runs, so they live apart from the
    // deterministic outputs.
    let timings_path = dir.join("timings.json");
    let mut timings: BTreeMap<String, BTreeMap<String, f64>> =
        std::fs::read_to_string(&timings_path).ok().and_then(|s| serde_json::from_str(&s).ok()).unwrap_or_default();
    timings.insert(cmd.clone(), report.timings.iter().cloned().collect());
    write_json(&timings_path, &timings)?;

    files.push(resolved);
    files.push(manifest_path);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_never_passes() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
        assert!(!Check::at_least("x", f64::NAN, 0.0).passed);
        assert!(Check::at_most("x", 1.0, 1.0).passed);
    }

    #[test]
    fn merge_prefixes_names() {
        let cfg = ExperimentConfig::default();
        let mut a = Report::new("a", &cfg);
        let mut b = Report::new("b", &cfg);
        b.check(Check::at_most("inner", 0.0, 1.0));
        b.data("k", 1);
        a.merge("sub", b);
        assert_eq!(a.checks[0].name, "sub.inner");
        assert!(a.data.contains_key("sub.k"));
    }
}
