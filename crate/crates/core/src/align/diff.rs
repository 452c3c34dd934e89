//! Side-by-side rendering of an aligned trace pair.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Alignment, MatchReport, OpTag};
use crate::trace::PvEvent;

/// One line of the side-by-side view. `None` marks a gap on that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffRow {
    pub gt: Option<usize>,
    pub pred: Option<usize>,
    pub value_match: bool,
}

pub fn diff_rows(al: &Alignment, report: &MatchReport) -> Vec<DiffRow> {
    let mut verdicts = report.pairs.iter();
    let mut rows = Vec::with_capacity(al.total_pairs());
    for op in &al.opcodes {
        match op.tag {
            OpTag::Equal | OpTag::Replace => {
                for _ in 0..op.gt.len() {
                    let v = verdicts.next().expect("one verdict per aligned pair");
                    rows.push(DiffRow { gt: Some(v.gt), pred: Some(v.pred), value_match: v.value_match });
                }
            }
            OpTag::Delete => rows.extend(op.gt.clone().map(|g| DiffRow { gt: Some(g), pred: None, value_match: false })),
            OpTag::Insert => rows.extend(op.pred.clone().map(|p| DiffRow { gt: None, pred: Some(p), value_match: false })),
        }
    }
    rows
}

fn cells(e: Option<&PvEvent>) -> [String; 3] {
    match e {
        Some(e) => [e.pv_name.clone(), format!("{:.6}", e.timestamp), format_value(e.value)],
        None => [String::new(), String::new(), String::new()],
    }
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Two-column table (ground truth left, prediction right) with a per-row
/// match mark, followed by a count summary.
pub fn render_diff(gt: &[PvEvent], pred: &[PvEvent], al: &Alignment, report: &MatchReport) -> String {
    let rows: Vec<([String; 3], [String; 3], bool)> = diff_rows(al, report)
        .into_iter()
        .map(|r| {
            (
                cells(r.gt.map(|i| &gt[i])),
                cells(r.pred.map(|i| &pred[i])),
                r.value_match,
            )
        })
        .collect();

    let header = ["pv", "timestamp", "value"];
    let mut w = [0usize; 6];
    for (k, h) in header.iter().enumerate() {
        w[k] = h.len();
        w[k + 3] = h.len();
    }
    for (l, r, _) in &rows {
        for k in 0..3 {
            w[k] = w[k].max(l[k].chars().count());
            w[k + 3] = w[k + 3].max(r[k].chars().count());
        }
    }

    let mut out = String::new();
    let line = |out: &mut String, l: &[&str; 3], r: &[&str; 3], mark: &str| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$}  {:>w2$}  | {:<w3$}  {:>w4$}  {:>w5$}  {}",
            l[0], l[1], l[2], r[0], r[1], r[2], mark,
            w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3], w4 = w[4], w5 = w[5]
        );
    };
    let _ = writeln!(out, "Ground truth vs predicted");
    line(&mut out, &header, &header, "");
    for (l, r, ok) in &rows {
        let l = [l[0].as_str(), l[1].as_str(), l[2].as_str()];
        let r = [r[0].as_str(), r[1].as_str(), r[2].as_str()];
        line(&mut out, &l, &r, if *ok { "✓" } else { "✗" });
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Ground Truth: {} log entries", gt.len());
    let _ = writeln!(out, "Predicted: {} log entries", pred.len());
    let _ = writeln!(out, "Matches: {}", report.n_value_matches);
    let _ = writeln!(out, "Mismatches: {}", report.n_total_pairs - report.n_value_matches);
    let _ = writeln!(out, "Difference: {} entries", gt.len().abs_diff(pred.len()));
    out
}
