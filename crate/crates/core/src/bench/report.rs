use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, MeanStd, RunResult, SummaryStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Md,
}

impl FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Md),
            other => Err(BenchError::UnknownFormat(other.to_string())),
        }
    }
}

/// Machine-readable report; the `json` format is exactly this, serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: String,
    pub summary: SummaryStats,
    pub tasks: Vec<RunResult>,
}

fn pct(m: &MeanStd) -> String {
    format!("{:.1} ± {:.1}", m.mean * 100.0, m.std * 100.0)
}

pub fn render_report(report: &BenchReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(report).expect("report serializes");
            v.push(b'\n');
            v
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["run", "task_id", "full_score", "accuracy", "exact_match", "levenshtein", "codebleu"])
                .expect("in-memory write");
            for r in &report.tasks {
                let t = &r.result;
                w.write_record([
                    r.run.to_string(),
                    t.task_id.clone(),
                    format!("{:.6}", t.best_full_score),
                    (t.accuracy as u8).to_string(),
                    (t.exact_match as u8).to_string(),
                    format!("{:.6}", t.levenshtein_norm),
                    t.codebleu.map(|c| format!("{c:.6}")).unwrap_or_default(),
                ])
                .expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
        ReportFormat::Md => {
            let s = &report.summary;
            let codebleu: Vec<f64> = report.tasks.iter().filter_map(|r| r.result.codebleu).collect();
            let mut out = String::new();
            let _ = writeln!(out, "Runs: {}, tasks per run: {}\n", s.runs, s.tasks);
            let mut head = "| Model | Full score (%) | Accuracy (%) | Exact match (%) | nLD (%) |".to_string();
            let mut rule = "|---|---|---|---|---|".to_string();
            let mut row = format!(
                "| {} | {} | {} | {} | {} |",
                report.model,
                pct(&s.full_score),
                pct(&s.accuracy),
                pct(&s.exact_match),
                pct(&s.levenshtein)
            );
            if !codebleu.is_empty() {
                head.push_str(" CodeBLEU (%) |");
                rule.push_str("---|");
                let m = codebleu.iter().sum::<f64>() / codebleu.len() as f64;
                let _ = write!(row, " {:.1} |", m * 100.0);
            }
            let _ = writeln!(out, "{head}\n{rule}\n{row}");
            out.into_bytes()
        }
    }
}
