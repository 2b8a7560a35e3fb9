//! Score reports: canonical JSON plus a Markdown table projection.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ssim,
    Fid,
    StoryScore,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Ssim => "ssim",
            MetricKind::Fid => "fid",
            MetricKind::StoryScore => "story_score",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format '{other}'"))),
        }
    }
}

/// One labelled line of a report table; scores keep insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub scores: IndexMap<String, f64>,
}

impl ReportRow {
    pub fn new(label: impl Into<String>) -> Self {
        ReportRow {
            label: label.into(),
            scores: IndexMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.scores.insert(name.to_owned(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tool_version: String,
    pub command: String,
    pub metric: MetricKind,
    pub parameters: IndexMap<String, serde_json::Value>,
    pub rows: Vec<ReportRow>,
    /// Per-pair or per-input breakdown backing the rows.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    pub timestamp: String,
}

impl ScoreReport {
    pub fn new(command: impl Into<String>, metric: MetricKind, timestamp: impl Into<String>) -> Self {
        ScoreReport {
            tool_version: TOOL_VERSION.to_owned(),
            command: command.into(),
            metric,
            parameters: IndexMap::new(),
            rows: Vec::new(),
            details: serde_json::Value::Null,
            timestamp: timestamp.into(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(key.to_owned(), value.into());
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let report: ScoreReport = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = e
                .path()
                .iter()
                .map(|s| format!("/{s}"))
                .collect::<String>();
            Error::Schema {
                pointer,
                message: e.inner().to_string(),
            }
        })?;
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Markdown => self.to_markdown(),
        }
    }

    /// Table of rows with scores rounded to two decimals.
    pub fn to_markdown(&self) -> String {
        let mut columns: Vec<&str> = Vec::new();
        for row in &self.rows {
            for key in row.scores.keys() {
                if !columns.contains(&key.as_str()) {
                    columns.push(key);
                }
            }
        }
        let mut out = String::from("| Model |");
        for c in &columns {
            out.push_str(&format!(" {} |", column_title(c)));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(columns.len()));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("| {} |", row.label.replace('|', "\\|")));
            for c in &columns {
                match row.scores.get(*c) {
                    Some(v) => out.push_str(&format!(" {v:.2} |")),
                    None => out.push_str(" |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn column_title(key: &str) -> String {
    match key {
        "similarity" => "Similarity Score".into(),
        "plot" => "Plot Score".into(),
        "story" => "Story Score".into(),
        "ssim" => "SSIM".into(),
        "fid" => "FID".into(),
        other => other.to_owned(),
    }
}

/// Stacks the rows of same-kind reports into one table sorted by label.
pub fn merge_reports(
    reports: &[ScoreReport],
    timestamp: impl Into<String>,
) -> Result<ScoreReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("at least one report is required"))?;
    if let Some(other) = reports.iter().find(|r| r.metric != first.metric) {
        return Err(Error::invalid(format!(
            "cannot merge {} and {} reports",
            first.metric, other.metric
        )));
    }
    let mut merged = ScoreReport::new("report", first.metric, timestamp);
    let mut rows: Vec<ReportRow> = reports.iter().flat_map(|r| r.rows.clone()).collect();
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    merged.rows = rows;
    merged.details = serde_json::Value::Array(
        reports
            .iter()
            .map(|r| {
                serde_json::json!({
                    "command": r.command,
                    "timestamp": r.timestamp,
                    "parameters": r.parameters,
                })
            })
            .collect(),
    );
    Ok(merged)
}
