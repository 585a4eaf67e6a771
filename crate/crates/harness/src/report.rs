use std::fmt::Write as _;
use std::io::IsTerminal;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Jsonl,
    #[default]
    Summary,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("cell {policy}/{scenario}: outcome rates do not sum to 1")]
    Inconsistent { policy: String, scenario: String },
}

/// Whether terminal output may use ANSI styling.
pub fn color_enabled() -> bool {
    std::env::var_os("MITIGATOR_NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

pub fn bold(text: &str, color: bool) -> String {
    if color {
        format!("\x1b[1m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

const COLUMNS: [&str; 9] = [
    "policy",
    "scenario",
    "trials",
    "mitigated",
    "mean_steps",
    "steps_se",
    "disengaged",
    "exhausted",
    "truncated",
];

/// Renders `report`. The summary table is plain text; styling is added only
/// when `color` is set.
pub fn emit_report(report: &MetricsReport, format: Format, color: bool) -> Result<String, ReportError> {
    for c in &report.cells {
        if !c.outcomes_consistent() {
            return Err(ReportError::Inconsistent {
                policy: c.policy.clone(),
                scenario: c.scenario.clone(),
            });
        }
    }
    let mut out = String::new();
    match format {
        Format::Jsonl => {
            for c in &report.cells {
                out.push_str(&serde_json::to_string(c).expect("metrics serialize"));
                out.push('\n');
            }
        }
        Format::Summary => {
            let rows: Vec<[String; 9]> = report
                .cells
                .iter()
                .map(|c| {
                    [
                        c.policy.clone(),
                        c.scenario.clone(),
                        c.trials.to_string(),
                        format!("{:.4}", c.mitigation_rate),
                        fmt_opt(c.mean_steps_to_resolution),
                        fmt_opt(c.steps_se),
                        format!("{:.4}", c.disengagement_rate),
                        format!("{:.4}", c.exhaustion_rate),
                        format!("{:.4}", c.truncation_rate),
                    ]
                })
                .collect();
            let mut widths = COLUMNS.map(str::len);
            for r in &rows {
                for (w, cell) in widths.iter_mut().zip(r) {
                    *w = (*w).max(cell.len());
                }
            }
            let line = |cells: &[&str]| {
                let mut s = String::new();
                for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                    if i > 0 {
                        s.push_str("  ");
                    }
                    if i < 2 {
                        let _ = write!(s, "{cell:<w$}");
                    } else {
                        let _ = write!(s, "{cell:>w$}");
                    }
                }
                s.trim_end().to_string()
            };
            out.push_str(&bold(&line(&COLUMNS), color));
            out.push('\n');
            for r in &rows {
                let cells: Vec<&str> = r.iter().map(String::as_str).collect();
                out.push_str(&line(&cells));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{CellMetrics, TrialOutcome, TrialSummary};
    use mitigator_core::confusion::InductionType;

    fn cell() -> CellMetrics {
        let t = TrialSummary {
            trial: 0,
            outcome: TrialOutcome::Resolved,
            acts: 2,
            turns: 2,
            act_counts: [1, 1, 0, 0, 0, 0, 0],
        };
        CellMetrics::from_trials("default", "complex", InductionType::ComplexInformation, &[t])
    }

    #[test]
    fn empty_report_is_header_only() {
        let out = emit_report(&MetricsReport::default(), Format::Summary, false).unwrap();
        assert_eq!(out.lines().count(), 1);
        assert!(out.starts_with("policy"));
        assert_eq!(
            emit_report(&MetricsReport::default(), Format::Jsonl, false).unwrap(),
            ""
        );
    }

    #[test]
    fn single_cell_jsonl() {
        let report = MetricsReport { cells: vec![cell()] };
        let out = emit_report(&report, Format::Jsonl, false).unwrap();
        assert_eq!(out.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        for key in [
            "mitigation_rate",
            "mean_steps_to_resolution",
            "disengagement_rate",
            "exhaustion_rate",
            "act_histogram",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let keys: Vec<&str> = out.split("\":").map(|s| s.rsplit('"').next().unwrap()).collect();
        let rate = keys.iter().position(|k| *k == "mitigation_rate").unwrap();
        let steps = keys.iter().position(|k| *k == "mean_steps_to_resolution").unwrap();
        assert!(rate < steps);
        assert_eq!(v["act_histogram"]["restatement"], 1);
    }

    #[test]
    fn inconsistent_rates_rejected() {
        let mut c = cell();
        c.truncated = 1;
        let report = MetricsReport { cells: vec![c] };
        assert!(emit_report(&report, Format::Summary, false).is_err());
    }

    #[test]
    fn summary_has_no_escape_codes_without_color() {
        let report = MetricsReport { cells: vec![cell()] };
        let out = emit_report(&report, Format::Summary, false).unwrap();
        assert!(!out.contains('\x1b'));
        assert!(emit_report(&report, Format::Summary, true).unwrap().contains('\x1b'));
    }
}
