use serde::{Deserialize, Serialize};

use super::{TaskRecord, TraceCache};
use crate::dsl::{execute, parse, Limits};
use crate::scoring::{exact_match, grade_traces, levenshtein_norm, temperature_involved, ScoreBreakdown, ScoringConfig};
use crate::simenv::{EnvConfig, Environment, StateSnapshot};
use crate::trace::{ExecutionTrace, TraceFilter};
use crate::CANDIDATE_SEED_SALT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub seed: u64,
    /// One breakdown per ground truth, in dataset order.
    pub per_gt: Vec<ScoreBreakdown>,
    pub best_gt: usize,
    pub best_full_score: f64,
    pub accuracy: bool,
    pub exact_match: bool,
    pub levenshtein_norm: f64,
    pub candidate_error: Option<String>,
    pub gt_errors: Vec<Option<String>>,
    /// Pass-through from an external CodeBLEU scorer, if supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebleu: Option<f64>,
}

/// Why a program produced no gradable trace.
#[derive(Debug, Clone, PartialEq)]
pub enum ProgramFailure {
    Parse(String),
    Setup(String),
}

impl std::fmt::Display for ProgramFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Parse(m) | Self::Setup(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluator {
    pub env: EnvConfig,
    pub snapshot: Option<StateSnapshot>,
    pub scoring: ScoringConfig,
    pub limits: Limits,
    pub cache: Option<TraceCache>,
}

impl Evaluator {
    pub fn new(env: EnvConfig) -> Self {
        Self {
            env,
            snapshot: None,
            scoring: ScoringConfig::default(),
            limits: Limits::default(),
            cache: None,
        }
    }

    pub fn with_cache(mut self, cache: TraceCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_snapshot(mut self, snapshot: StateSnapshot) -> Self {
        self.snapshot = Some(snapshot);
        self
    }

    /// Run `source` in a fresh environment, through the cache when one is
    /// configured. A runtime error still yields the partial trace, with the
    /// error recorded in its metadata.
    pub fn run_program(&self, source: &str, seed: u64) -> Result<ExecutionTrace, ProgramFailure> {
        let key = self
            .cache
            .as_ref()
            .map(|_| TraceCache::key(source, &self.env, self.snapshot.as_ref(), &self.limits, seed));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(t) = cache.get(key) {
                return Ok(t);
            }
        }
        let prog = parse(source).map_err(|e| ProgramFailure::Parse(e.to_string()))?;
        let mut env =
            Environment::new(self.env.clone().with_seed(seed)).map_err(|e| ProgramFailure::Setup(e.to_string()))?;
        if let Some(s) = &self.snapshot {
            env.load_snapshot(s).map_err(|e| ProgramFailure::Setup(e.to_string()))?;
        }
        let trace = execute(&prog, &mut env, self.limits).trace;
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            // a failed write only costs a re-run later
            let _ = cache.put(key, &trace);
        }
        Ok(trace)
    }

    /// Grade `candidate` against every ground truth of `task`. Never fails:
    /// problems are folded into the result as zero scores and error strings.
    pub fn evaluate(&self, task: &TaskRecord, candidate: &str, seed: u64) -> TaskResult {
        let filter = match &task.tracked_pvs {
            Some(pvs) => TraceFilter::only(pvs.iter().cloned()),
            None => TraceFilter::all(),
        };
        let cand = self.run_program(candidate, seed ^ CANDIDATE_SEED_SALT);
        let candidate_error = match &cand {
            Ok(t) => t.meta.error.clone(),
            Err(e) => Some(e.to_string()),
        };
        // crashed before doing anything: nothing to grade
        let cand = cand.ok().filter(|t| !(t.events.is_empty() && t.meta.error.is_some()));

        let mut per_gt = Vec::with_capacity(task.ground_truths.len());
        let mut gt_errors = Vec::with_capacity(task.ground_truths.len());
        for gt_src in &task.ground_truths {
            let gt = match self.run_program(gt_src, seed) {
                Ok(t) => t,
                Err(e) => {
                    gt_errors.push(Some(e.to_string()));
                    per_gt.push(ScoreBreakdown::zero(task.has_temperature.unwrap_or(false)));
                    continue;
                }
            };
            gt_errors.push(gt.meta.error.clone());
            let involved = task
                .has_temperature
                .unwrap_or_else(|| temperature_involved(&gt, &self.env));
            let b = match &cand {
                Some(c) => {
                    grade_traces(&gt.filter(&filter), &c.filter(&filter), &self.env, &self.scoring, Some(involved))
                        .breakdown
                }
                None => ScoreBreakdown::zero(involved),
            };
            per_gt.push(b);
        }

        let best_gt = per_gt
            .iter()
            .enumerate()
            .fold(0, |best, (i, b)| if b.full_score > per_gt[best].full_score { i } else { best });
        let levenshtein = task
            .ground_truths
            .iter()
            .map(|g| levenshtein_norm(candidate, g))
            .fold(f64::INFINITY, f64::min);
        TaskResult {
            task_id: task.task_id.clone(),
            seed,
            best_full_score: per_gt.get(best_gt).map_or(0.0, |b| b.full_score),
            accuracy: per_gt.iter().any(|b| b.accuracy),
            exact_match: exact_match(candidate, &task.ground_truths),
            levenshtein_norm: if levenshtein.is_finite() { levenshtein } else { 1.0 },
            best_gt,
            per_gt,
            candidate_error,
            gt_errors,
            codebleu: None,
        }
    }
}
