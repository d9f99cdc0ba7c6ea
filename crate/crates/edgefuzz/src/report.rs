//! Run reports: the coverage / call-count / debug-success / bug-tally
//! summary a pipeline run emits, in JSON and human-readable text forms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::synth::{ProgramStatus, SynthesisEntry};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DebugSuccess {
    pub succeeded: u64,
    pub failed: u64,
    /// succeeded / (succeeded + failed); omitted when nothing was debugged.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

impl DebugSuccess {
    pub fn new(succeeded: u64, failed: u64) -> Self {
        let denominator = succeeded + failed;
        DebugSuccess {
            succeeded,
            failed,
            rate: (denominator > 0).then(|| succeeded as f64 / denominator as f64),
        }
    }

    /// Tallies synthesis entries: a successful debug is an API whose first
    /// program was invalid but that ended up valid; a failed debug never
    /// produced a valid program.
    pub fn from_entries(entries: &[SynthesisEntry]) -> Self {
        let mut succeeded = 0;
        let mut failed = 0;
        for entry in entries {
            match entry.status {
                ProgramStatus::Valid if entry.llm_calls > 1 => succeeded += 1,
                ProgramStatus::Valid => {}
                ProgramStatus::Failed => failed += 1,
            }
        }
        DebugSuccess::new(succeeded, failed)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub api_total: usize,
    pub api_covered: usize,
    pub llm_calls_by_stage: BTreeMap<String, u64>,
    pub debug_success: DebugSuccess,
    pub bugs_by_class: BTreeMap<String, usize>,
    pub wall_time_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(format!("unknown report format `{other}` (json|text)")),
        }
    }
}

/// Renders a report with stable field order in both formats.
pub fn emit_report(report: &RunReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut bytes =
                serde_json::to_vec_pretty(report).expect("report serialization is infallible");
            bytes.push(b'\n');
            bytes
        }
        ReportFormat::Text => render_text(report).into_bytes(),
    }
}

fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("== Run report ==\n");
    out.push_str(&format!("seed: {}\n", report.seed));
    out.push_str(&format!("wall time: {:.2} s\n", report.wall_time_s));

    out.push_str("\nAPI coverage\n");
    out.push_str("  Cov    Times  Under Test\n");
    let times: u64 = report.llm_calls_by_stage.values().sum();
    out.push_str(&format!(
        "  {:<6} {:<6} {}\n",
        report.api_covered, times, report.api_total
    ));

    out.push_str("\nDebug success\n");
    out.push_str("  Successful debug  Failed debug  Success rate\n");
    match report.debug_success.rate {
        Some(rate) => out.push_str(&format!(
            "  {:<17} {:<13} {:.2}%\n",
            report.debug_success.succeeded,
            report.debug_success.failed,
            rate * 100.0
        )),
        None => out.push_str(&format!(
            "  {:<17} {:<13}\n",
            report.debug_success.succeeded, report.debug_success.failed
        )),
    }

    out.push_str("\nLLM calls by stage\n");
    if report.llm_calls_by_stage.is_empty() {
        out.push_str("  (none)\n");
    }
    for (stage, calls) in &report.llm_calls_by_stage {
        out.push_str(&format!("  {stage:<12} {calls}\n"));
    }

    out.push_str("\nBugs by class\n");
    if report.bugs_by_class.is_empty() {
        out.push_str("  (none)\n");
    }
    for (class, count) in &report.bugs_by_class {
        out.push_str(&format!("  {class:<24} {count}\n"));
    }
    out
}
