use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{GroupMetrics, SampleOutcome, Summary};

/// Percentages are stored already rounded to this many decimals, so every
/// format renders the same numbers.
pub const PERCENT_DECIMALS: i32 = 2;

pub fn percent(x: f64) -> f64 {
    let scale = 10f64.powi(PERCENT_DECIMALS);
    (x * 100.0 * scale).round() / scale
}

/// Headline metrics in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub loc_acc: f64,
    pub max_f1: f64,
    pub ap: f64,
    /// Confidence threshold achieving `max_f1`; `None` when it is minus
    /// infinity, i.e. every sample is predicted.
    pub best_delta: Option<f64>,
}

impl From<Summary> for MetricRow {
    fn from(s: Summary) -> Self {
        MetricRow {
            loc_acc: percent(s.loc_acc),
            max_f1: percent(s.max_f1),
            ap: percent(s.ap),
            best_delta: s.best_delta.is_finite().then_some(s.best_delta),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub positives: usize,
    pub negatives: usize,
    /// `None` marks a group without positives.
    pub metrics: Option<MetricRow>,
    /// Ids of the outcomes the row was computed from.
    pub members: Vec<String>,
}

impl From<GroupMetrics> for GroupRow {
    fn from(g: GroupMetrics) -> Self {
        GroupRow {
            group: g.group,
            positives: g.positives,
            negatives: g.negatives,
            metrics: g.summary.map(MetricRow::from),
            members: g.members,
        }
    }
}

/// Settings that, together with the outcomes, determine every number in
/// the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub gamma: f64,
    pub delta_policy: String,
    pub threshold_mode: String,
    pub ogl_weight: Option<f64>,
    pub seed: u64,
    pub tau: f64,
    pub frame: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config: ReportConfig,
    pub positives: usize,
    pub negatives: usize,
    /// `None` when the evaluated set has no positives.
    pub global: Option<MetricRow>,
    pub by_size: Vec<GroupRow>,
    pub by_negative_type: Vec<GroupRow>,
    pub notes: Vec<String>,
    pub outcomes: Vec<SampleOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            _ => Err(Error::InvalidHyperparameter(format!(
                "unknown report format `{s}` (json, csv or table)"
            ))),
        }
    }
}

impl std::fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Table => "table",
        })
    }
}

const EMPTY: &str = "-";

fn cells(m: Option<&MetricRow>) -> [String; 3] {
    match m {
        Some(m) => [
            format!("{:.2}", m.loc_acc),
            format!("{:.2}", m.max_f1),
            format!("{:.2}", m.ap),
        ],
        None => [EMPTY.into(), EMPTY.into(), EMPTY.into()],
    }
}

fn rows(report: &ReportDocument) -> Vec<[String; 7]> {
    let mut out = Vec::new();
    let [l, f, a] = cells(report.global.as_ref());
    out.push([
        "global".into(),
        "all".into(),
        report.positives.to_string(),
        report.negatives.to_string(),
        l,
        f,
        a,
    ]);
    for (scope, groups) in [
        ("size", &report.by_size),
        ("negative-type", &report.by_negative_type),
    ] {
        for g in groups.iter() {
            let [l, f, a] = cells(g.metrics.as_ref());
            out.push([
                scope.into(),
                g.group.clone(),
                g.positives.to_string(),
                g.negatives.to_string(),
                l,
                f,
                a,
            ]);
        }
    }
    out
}

const HEADER: [&str; 7] = [
    "scope",
    "group",
    "positives",
    "negatives",
    "loc_acc",
    "max_f1",
    "ap",
];

/// Serializes `report`; output depends only on the report's contents.
pub fn emit_report(report: &ReportDocument, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s =
                serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut s = HEADER.join(",");
            s.push('\n');
            for r in rows(report) {
                s.push_str(&r.join(","));
                s.push('\n');
            }
            Ok(s)
        }
        ReportFormat::Table => {
            let c = &report.config;
            let mut s = String::new();
            let _ = writeln!(s, "gamma          {}", c.gamma);
            let _ = writeln!(s, "delta          {}", c.delta_policy);
            let _ = writeln!(s, "threshold      {}", c.threshold_mode);
            let _ = writeln!(
                s,
                "ogl weight     {}",
                c.ogl_weight.map_or(EMPTY.to_string(), |w| w.to_string())
            );
            let _ = writeln!(s, "seed           {}", c.seed);
            let _ = writeln!(s, "tau            {}", c.tau);
            let _ = writeln!(s, "frame          {}x{}", c.frame[0], c.frame[1]);
            for n in &report.notes {
                let _ = writeln!(s, "note           {n}");
            }
            s.push('\n');
            let body = rows(report);
            let mut widths: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
            for r in &body {
                for (w, cell) in widths.iter_mut().zip(r) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut line = |cells: Vec<&str>| {
                let parts: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(k, (cell, &w))| {
                        if k < 2 {
                            format!("{cell:<w$}")
                        } else {
                            format!("{cell:>w$}")
                        }
                    })
                    .collect();
                let _ = writeln!(s, "{}", parts.join("  ").trim_end());
            };
            line(HEADER.to_vec());
            for r in &body {
                line(r.iter().map(String::as_str).collect());
            }
            Ok(s)
        }
    }
}
