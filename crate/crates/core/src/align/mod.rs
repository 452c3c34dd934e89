//! Trace alignment.
//!
//! Two event sequences are aligned by recursive longest-matching-block search
//! (gestalt pattern matching, no junk heuristic): take the longest run of
//! equal keys, then recurse on what lies left and right of it. Ties go to the
//! run starting earliest in the ground truth, then earliest in the prediction.
//! Stretches between matched runs become `replace` for the overlapping part
//! and `delete`/`insert` for the excess.

mod diff;

use std::collections::HashMap;
use std::hash::Hash;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{diff_rows, render_diff, DiffRow};

use crate::trace::PvEvent;

/// Default value tolerance for a pair to count as a match.
pub const VALUE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpTag {
    Equal,
    Replace,
    Delete,
    Insert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opcode {
    pub tag: OpTag,
    pub gt: Range<usize>,
    pub pred: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub opcodes: Vec<Opcode>,
    pub gt_len: usize,
    pub pred_len: usize,
}

impl Alignment {
    /// Aligned (gt, pred) index pairs: equal blocks plus the index-wise
    /// pairing inside replace blocks.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.opcodes
            .iter()
            .filter(|op| matches!(op.tag, OpTag::Equal | OpTag::Replace))
            .flat_map(|op| op.gt.clone().zip(op.pred.clone()))
    }

    /// Length of the aligned sequence, insertions and deletions included.
    pub fn total_pairs(&self) -> usize {
        self.opcodes
            .iter()
            .map(|op| op.gt.len().max(op.pred.len()))
            .sum()
    }
}

/// What two events are compared on when searching for matching blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    /// pv name only; values are checked pairwise afterwards.
    #[default]
    Name,
    /// pv name plus value quantized to 1e-3.
    NameValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventKey {
    pub pv_name: String,
    pub qvalue: Option<i64>,
}

impl EventKey {
    pub fn of(e: &PvEvent, mode: KeyMode) -> Self {
        Self {
            pv_name: e.pv_name.clone(),
            qvalue: match mode {
                KeyMode::Name => None,
                KeyMode::NameValue => Some(quantize(e.value)),
            },
        }
    }
}

pub fn event_keys(events: &[PvEvent], mode: KeyMode) -> Vec<EventKey> {
    events.iter().map(|e| EventKey::of(e, mode)).collect()
}

/// Value on the 1e-3 grid, ties to even.
pub fn quantize(v: f64) -> i64 {
    (v * 1e3).round_ties_even() as i64
}

pub fn align<T: Eq + Hash>(gt: &[T], pred: &[T]) -> Alignment {
    let mut b2j: HashMap<&T, Vec<usize>> = HashMap::new();
    for (j, item) in pred.iter().enumerate() {
        b2j.entry(item).or_default().push(j);
    }

    let mut blocks = Vec::new();
    let mut queue = vec![(0, gt.len(), 0, pred.len())];
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        let (i, j, k) = longest_match(gt, &b2j, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        blocks.push((i, j, k));
        if alo < i && blo < j {
            queue.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            queue.push((i + k, ahi, j + k, bhi));
        }
    }
    blocks.sort_unstable();

    let mut opcodes = Vec::new();
    let (mut i, mut j) = (0, 0);
    for (ai, bj, size) in blocks.into_iter().chain(std::iter::once((gt.len(), pred.len(), 0))) {
        push_gap(&mut opcodes, i..ai, j..bj);
        if size > 0 {
            match opcodes.last_mut() {
                Some(Opcode { tag: OpTag::Equal, gt, pred }) if gt.end == ai && pred.end == bj => {
                    gt.end += size;
                    pred.end += size;
                }
                _ => opcodes.push(Opcode {
                    tag: OpTag::Equal,
                    gt: ai..ai + size,
                    pred: bj..bj + size,
                }),
            }
        }
        i = ai + size;
        j = bj + size;
    }
    Alignment {
        opcodes,
        gt_len: gt.len(),
        pred_len: pred.len(),
    }
}

fn push_gap(out: &mut Vec<Opcode>, gt: Range<usize>, pred: Range<usize>) {
    let common = gt.len().min(pred.len());
    if common > 0 {
        out.push(Opcode {
            tag: OpTag::Replace,
            gt: gt.start..gt.start + common,
            pred: pred.start..pred.start + common,
        });
    }
    if gt.len() > common {
        out.push(Opcode {
            tag: OpTag::Delete,
            gt: gt.start + common..gt.end,
            pred: pred.end..pred.end,
        });
    }
    if pred.len() > common {
        out.push(Opcode {
            tag: OpTag::Insert,
            gt: gt.end..gt.end,
            pred: pred.start + common..pred.end,
        });
    }
}

/// Longest run `gt[i..i+k] == pred[j..j+k]` inside the window, earliest `i`
/// then earliest `j` on ties. Returns `(alo, blo, 0)` when nothing matches.
fn longest_match<T: Eq + Hash>(
    gt: &[T],
    b2j: &HashMap<&T, Vec<usize>>,
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let mut best = (alo, blo, 0);
    // run length of the match ending at (i - 1, j), keyed by j
    let mut prev: HashMap<usize, usize> = HashMap::new();
    for (i, item) in gt.iter().enumerate().take(ahi).skip(alo) {
        let mut cur = HashMap::new();
        if let Some(js) = b2j.get(item) {
            for &j in js {
                if j < blo {
                    continue;
                }
                if j >= bhi {
                    break;
                }
                let k = if j > 0 { prev.get(&(j - 1)).copied().unwrap_or(0) } else { 0 } + 1;
                cur.insert(j, k);
                if k > best.2 {
                    best = (i + 1 - k, j + 1 - k, k);
                }
            }
        }
        prev = cur;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub gt: usize,
    pub pred: usize,
    pub value_match: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub n_value_matches: usize,
    pub n_total_pairs: usize,
    /// Value-matched (gt, pred) index pairs in sequence order.
    pub matched_pairs: Vec<(usize, usize)>,
    /// Verdict for every aligned pair, matched or not.
    pub pairs: Vec<PairVerdict>,
}

impl MatchReport {
    /// Fraction of aligned positions that match; 1 when both sides are empty.
    pub fn rate(&self) -> f64 {
        if self.n_total_pairs == 0 {
            1.0
        } else {
            self.n_value_matches as f64 / self.n_total_pairs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("alignment covers {al_gt}/{al_pred} events but {gt}/{pred} were given")]
    LengthMismatch {
        al_gt: usize,
        al_pred: usize,
        gt: usize,
        pred: usize,
    },
}

fn pair_matches(g: &PvEvent, p: &PvEvent, tol: f64) -> bool {
    g.pv_name == p.pv_name && (g.value - p.value).abs() <= tol
}

/// Count value matches over the aligned pairs. A pair matches when the pv
/// names are equal and the values differ by at most `tol`.
pub fn match_report(
    al: &Alignment,
    gt: &[PvEvent],
    pred: &[PvEvent],
    tol: f64,
) -> Result<MatchReport, AlignError> {
    if al.gt_len != gt.len() || al.pred_len != pred.len() {
        return Err(AlignError::LengthMismatch {
            al_gt: al.gt_len,
            al_pred: al.pred_len,
            gt: gt.len(),
            pred: pred.len(),
        });
    }
    let pairs: Vec<PairVerdict> = al
        .pairs()
        .map(|(g, p)| PairVerdict {
            gt: g,
            pred: p,
            value_match: pair_matches(&gt[g], &pred[p], tol),
        })
        .collect();
    let matched_pairs: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|v| v.value_match)
        .map(|v| (v.gt, v.pred))
        .collect();
    Ok(MatchReport {
        n_value_matches: matched_pairs.len(),
        n_total_pairs: al.total_pairs(),
        matched_pairs,
        pairs,
    })
}

/// Align two event lists and count matches in one go.
pub fn compare_events(gt: &[PvEvent], pred: &[PvEvent], mode: KeyMode, tol: f64) -> (Alignment, MatchReport) {
    let al = align(&event_keys(gt, mode), &event_keys(pred, mode));
    let report = match_report(&al, gt, pred, tol).expect("alignment built from these events");
    (al, report)
}

/// Strict state equivalence: same length, no insertions or deletions, and
/// every aligned pair agrees on name and value.
pub fn exact_pv_match(gt: &[PvEvent], pred: &[PvEvent], mode: KeyMode, tol: f64) -> bool {
    if gt.len() != pred.len() {
        return false;
    }
    let (al, report) = compare_events(gt, pred, mode, tol);
    al.opcodes
        .iter()
        .all(|op| matches!(op.tag, OpTag::Equal | OpTag::Replace))
        && report.n_value_matches == gt.len()
}

/// Timestamps of the value-matched pairs, `(t_gt, t_pred)`, in order.
pub fn matched_timestamps(report: &MatchReport, gt: &[PvEvent], pred: &[PvEvent]) -> Vec<(f64, f64)> {
    report
        .matched_pairs
        .iter()
        .map(|&(g, p)| (gt[g].timestamp, pred[p].timestamp))
        .collect()
}
