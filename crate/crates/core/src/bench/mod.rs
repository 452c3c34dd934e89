//! Dataset harness: load tasks, run candidates against every ground truth
//! through a trace cache, aggregate over runs and render reports.

mod cache;
mod dataset;
mod evaluate;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::TraceCache;
pub use dataset::{load_candidates, load_dataset, parse_candidates, parse_dataset, TaskRecord, MAX_GROUND_TRUTHS};
pub use evaluate::{Evaluator, ProgramFailure, TaskResult};
pub use report::{render_report, BenchReport, ReportFormat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("dataset line {line}{}: field `{field}`: {message}", task.as_ref().map(|t| format!(" (task {t})")).unwrap_or_default())]
    Dataset {
        line: usize,
        task: Option<String>,
        field: String,
        message: String,
    },
    #[error("no candidate for task `{0}`")]
    MissingCandidate(String),
    #[error("nothing to aggregate")]
    Empty,
    #[error("unknown report format `{0}` (expected json, csv or md)")]
    UnknownFormat(String),
    #[error("invalid option: {0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

/// One evaluated (run, task) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: u32,
    pub result: TaskResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.max(0.0).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub runs: usize,
    pub tasks: usize,
    pub full_score: MeanStd,
    pub accuracy: MeanStd,
    pub exact_match: MeanStd,
    pub levenshtein: MeanStd,
}

/// Average over tasks within each run, then mean ± population std across runs.
pub fn aggregate(results: &[RunResult]) -> Result<SummaryStats, BenchError> {
    if results.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut by_run: BTreeMap<u32, Vec<&TaskResult>> = BTreeMap::new();
    for r in results {
        by_run.entry(r.run).or_default().push(&r.result);
    }
    let per_run = |f: &dyn Fn(&TaskResult) -> f64| -> Vec<f64> {
        by_run
            .values()
            .map(|rs| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64)
            .collect()
    };
    let as_f = |b: bool| if b { 1.0 } else { 0.0 };
    let tasks = by_run.values().map(Vec::len).max().unwrap_or(0);
    Ok(SummaryStats {
        runs: by_run.len(),
        tasks,
        full_score: MeanStd::of(&per_run(&|r| r.best_full_score)),
        accuracy: MeanStd::of(&per_run(&|r| as_f(r.accuracy))),
        exact_match: MeanStd::of(&per_run(&|r| as_f(r.exact_match))),
        levenshtein: MeanStd::of(&per_run(&|r| r.levenshtein_norm)),
    })
}

/// Evaluate every task for `runs` runs. Run `r` uses seed `base_seed + r` and
/// the `r`-th candidate program for the task, cycling when fewer were given.
/// Results come back ordered by (run, task id) whatever the parallelism.
pub fn run_bench(
    evaluator: &Evaluator,
    tasks: &[TaskRecord],
    candidates: &BTreeMap<String, Vec<String>>,
    runs: u32,
    base_seed: u64,
    parallel: usize,
) -> Result<Vec<RunResult>, BenchError> {
    if runs == 0 {
        return Err(BenchError::Usage("runs must be at least 1".into()));
    }
    let mut jobs = Vec::new();
    for t in tasks {
        let progs = candidates
            .get(&t.task_id)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| BenchError::MissingCandidate(t.task_id.clone()))?;
        for run in 0..runs {
            jobs.push((run, t, &progs[run as usize % progs.len()]));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| BenchError::Usage(e.to_string()))?;
    let mut out: Vec<RunResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(run, task, src)| RunResult {
                run,
                result: evaluator.evaluate(task, src, base_seed.wrapping_add(run as u64)),
            })
            .collect()
    });
    out.sort_by(|a, b| (a.run, &a.result.task_id).cmp(&(b.run, &b.result.task_id)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: &str, full: f64, acc: bool) -> TaskResult {
        TaskResult {
            task_id: id.into(),
            seed: 0,
            per_gt: vec![],
            best_gt: 0,
            best_full_score: full,
            accuracy: acc,
            exact_match: acc,
            levenshtein_norm: 1.0 - full,
            candidate_error: None,
            gt_errors: vec![],
            codebleu: None,
        }
    }

    #[test]
    fn single_run_has_zero_std() {
        let rs = vec![RunResult { run: 0, result: result("a", 0.5, true) }];
        let s = aggregate(&rs).unwrap();
        assert_eq!(s.full_score, MeanStd { mean: 0.5, std: 0.0 });
    }

    #[test]
    fn spread_across_runs() {
        let rs: Vec<RunResult> = [0.5, 0.6, 0.7]
            .iter()
            .enumerate()
            .map(|(i, &f)| RunResult { run: i as u32, result: result("a", f, false) })
            .collect();
        let s = aggregate(&rs).unwrap();
        let expect_std = ((0.01 + 0.0 + 0.01) / 3.0f64).sqrt();
        assert!((s.full_score.mean - 0.6).abs() < 1e-12);
        assert!((s.full_score.std - expect_std).abs() < 1e-12);
        assert!((s.full_score.std - 0.0816).abs() < 1e-4);
    }

    #[test]
    fn task_means_within_run() {
        let rs = vec![
            RunResult { run: 0, result: result("a", 1.0, true) },
            RunResult { run: 0, result: result("b", 0.0, false) },
        ];
        let s = aggregate(&rs).unwrap();
        assert_eq!(s.accuracy.mean, 0.5);
        assert_eq!((s.runs, s.tasks), (1, 2));
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(aggregate(&[]), Err(BenchError::Empty));
    }

    #[test]
    fn perfect_everywhere() {
        let rs: Vec<RunResult> = (0..3).map(|r| RunResult { run: r, result: result("a", 1.0, true) }).collect();
        let s = aggregate(&rs).unwrap();
        assert_eq!(s.full_score.mean, 1.0);
        assert_eq!(s.accuracy.mean, 1.0);
        assert_eq!(s.exact_match.mean, 1.0);
    }

    #[test]
    fn missing_candidate() {
        let t = parse_dataset(r#"{"task_id":"a","prompt":"p","ground_truths":["acquire()"]}"#).unwrap();
        let ev = Evaluator::new(Default::default());
        let err = run_bench(&ev, &t, &BTreeMap::new(), 1, 0, 1).unwrap_err();
        assert_eq!(err, BenchError::MissingCandidate("a".into()));
    }

    #[test]
    fn ordering_is_independent_of_parallelism() {
        let t = parse_dataset(
            "{\"task_id\":\"b\",\"prompt\":\"\",\"ground_truths\":[\"measure(1)\"]}\n{\"task_id\":\"a\",\"prompt\":\"\",\"ground_truths\":[\"sleep(1)\"]}",
        )
        .unwrap();
        let c: BTreeMap<String, Vec<String>> =
            [("a".to_string(), vec!["sleep(1)".to_string()]), ("b".to_string(), vec!["measure(2)".to_string()])]
                .into();
        let ev = Evaluator::new(Default::default());
        let one = run_bench(&ev, &t, &c, 2, 7, 1).unwrap();
        let four = run_bench(&ev, &t, &c, 2, 7, 4).unwrap();
        assert_eq!(one, four);
        let order: Vec<(u32, &str)> = one.iter().map(|r| (r.run, r.result.task_id.as_str())).collect();
        assert_eq!(order, vec![(0, "a"), (0, "b"), (1, "a"), (1, "b")]);
    }
}
