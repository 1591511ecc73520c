//! Result serialization: the summary bundle, fixed-precision trace tables,
//! and the reproduction report.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// One summary line: an analytic prediction next to its empirical estimate.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRecord {
    pub name: String,
    pub unit: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

impl SummaryRecord {
    /// An analytic value with no sampled counterpart.
    pub fn analytic(name: &str, unit: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            predicted: Some(value),
            empirical: None,
            standard_error: None,
            trials: None,
        }
    }

    /// A prediction paired with a Monte Carlo estimate.
    pub fn estimated(
        name: &str,
        unit: &str,
        predicted: Option<f64>,
        empirical: f64,
        standard_error: f64,
        trials: usize,
    ) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            predicted,
            empirical: Some(empirical),
            standard_error: Some(standard_error),
            trials: Some(trials),
        }
    }
}

/// The full result of one experiment run.
#[derive(Debug, Serialize)]
pub struct ResultBundle<C: Serialize> {
    pub scenario: String,
    pub artifact_version: String,
    pub config_hash: String,
    pub config: C,
    pub records: Vec<SummaryRecord>,
    /// Scenario-specific structured extras (filter matrices, verdicts, ...).
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

impl<C: Serialize> ResultBundle<C> {
    pub fn new(scenario: &str, config: C) -> Result<Self> {
        let config_hash = crate::config::config_hash(&config)?;
        Ok(Self {
            scenario: scenario.into(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            config_hash,
            config,
            records: Vec::new(),
            extra: serde_json::Value::Null,
        })
    }

    /// Writes `summary.json` into the output directory.
    pub fn write_summary(&self, out: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        let path = out.join("summary.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// A value in a trace table: integer step indices stay integers, floats are
/// written with 17 significant digits for exact round-trips.
#[derive(Debug, Clone, Copy)]
pub enum TraceValue {
    Step(usize),
    Value(f64),
}

impl TraceValue {
    fn render(self) -> String {
        match self {
            TraceValue::Step(s) => s.to_string(),
            TraceValue::Value(v) => format!("{v:.16e}"),
        }
    }
}

/// Writes `trace_<name>.csv` with the given header and rows.
pub fn write_trace(
    out: &Path,
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<TraceValue>>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let path = out.join(format!("trace_{name}.csv"));
    let mut w = csv::Writer::from_path(&path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(TraceValue::render))?;
    }
    w.flush()?;
    Ok(path)
}

/// One acceptance check in a reproduction report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub target: String,
    pub observed: String,
    pub tolerance: String,
    pub pass: bool,
}

impl CheckRow {
    pub fn numeric(target: &str, observed: f64, tolerance: &str, pass: bool) -> Self {
        Self {
            target: target.into(),
            observed: format!("{observed:.4}"),
            tolerance: tolerance.into(),
            pass,
        }
    }
}

/// Writes `report.md` with one table per suite.
pub fn write_report(out: &Path, suites: &[(String, Vec<CheckRow>)]) -> Result<PathBuf> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let path = out.join("report.md");
    let mut text = String::from("# Reproduction report\n");
    for (suite, rows) in suites {
        text.push_str(&format!("\n## {suite}\n\n"));
        text.push_str("| target | observed | tolerance | verdict |\n");
        text.push_str("| --- | --- | --- | --- |\n");
        for r in rows {
            text.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                r.target,
                r.observed,
                r.tolerance,
                if r.pass { "pass" } else { "FAIL" }
            ));
        }
    }
    let total: usize = suites.iter().map(|(_, r)| r.len()).sum();
    let passed: usize = suites
        .iter()
        .map(|(_, r)| r.iter().filter(|c| c.pass).count())
        .sum();
    text.push_str(&format!("\n{passed}/{total} checks passed.\n"));
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Mean, standard error and total count over per-chunk means, used to attach
/// sampling uncertainty to Monte Carlo estimators that only report a single
/// average.
pub fn chunked_mean(chunks: &[f64], trials_per_chunk: usize) -> (f64, f64, usize) {
    let n = chunks.len().max(1) as f64;
    let mean = chunks.iter().sum::<f64>() / n;
    let var = if chunks.len() > 1 {
        chunks.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt(), chunks.len() * trials_per_chunk)
}
