//! Text-level baselines compared alongside the trace scores.

use crate::dsl::canonicalize;

/// Candidate equals some ground truth once comments and whitespace runs are
/// normalized away.
pub fn exact_match(candidate: &str, ground_truths: &[impl AsRef<str>]) -> bool {
    let c = canonicalize(candidate);
    ground_truths.iter().any(|g| canonicalize(g.as_ref()) == c)
}

/// Character edit distance between the canonical forms, divided by the longer
/// length. 0 for identical texts, 1 for nothing in common.
pub fn levenshtein_norm(a: &str, b: &str) -> f64 {
    let (a, b) = (canonicalize(a), canonicalize(b));
    let len = a.chars().count().max(b.chars().count());
    if len == 0 {
        return 0.0;
    }
    strsim::levenshtein(&a, &b) as f64 / len as f64
}
