//! Browser bindings: run a program on the twin, grade a candidate against a
//! ground truth, and stretch a trace's timing to watch the timing score react.
//! Every entry point returns a JSON string; errors come back as `{"error": …}`.

use envtrace::align::diff_rows;
use envtrace::dsl::{run_source, Limits};
use envtrace::scoring::{grade_traces, ScoringConfig};
use envtrace::{EnvConfig, ExecutionTrace, PvEvent};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn env_config(jitter: f64, seed: u64) -> Result<EnvConfig, String> {
    let cfg = EnvConfig::default().with_jitter(jitter).with_seed(seed);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(source: &str, cfg: &EnvConfig) -> Result<(ExecutionTrace, Option<String>), String> {
    let exec = run_source(source, cfg, None, Limits::default()).map_err(|e| e.to_string())?;
    Ok((exec.trace, exec.error.map(|e| e.to_string())))
}

fn event_json(e: &PvEvent) -> Value {
    json!({ "pv": e.pv_name, "value": e.value, "t": e.timestamp })
}

fn to_string(v: Result<Value, String>) -> String {
    v.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

pub fn run_json(source: &str, jitter: f64, seed: u64) -> Result<Value, String> {
    let cfg = env_config(jitter, seed)?;
    let (trace, runtime_error) = run(source, &cfg)?;
    Ok(json!({
        "events": trace.events.iter().map(event_json).collect::<Vec<_>>(),
        "temperature": trace.temperature_log.iter().map(|s| [s.time, s.temperature]).collect::<Vec<_>>(),
        "duration": trace.meta.duration,
        "runtime_error": runtime_error,
    }))
}

fn grade_pair(gt: &ExecutionTrace, cand: &ExecutionTrace, cfg: &EnvConfig) -> Value {
    let g = grade_traces(gt, cand, cfg, &ScoringConfig::default(), None);
    let rows: Vec<Value> = diff_rows(&g.alignment, &g.report)
        .into_iter()
        .map(|r| {
            json!({
                "gt": r.gt.map(|i| event_json(&gt.events[i])),
                "pred": r.pred.map(|i| event_json(&cand.events[i])),
                "match": r.value_match,
            })
        })
        .collect();
    let matched: Vec<[f64; 2]> = g
        .report
        .matched_pairs
        .iter()
        .map(|&(i, j)| [gt.events[i].timestamp, cand.events[j].timestamp])
        .collect();
    json!({
        "rows": rows,
        "matched_times": matched,
        "breakdown": g.breakdown,
        "summary": g.breakdown.summary(),
    })
}

pub fn grade_json(gt_source: &str, cand_source: &str, jitter: f64, seed: u64) -> Result<Value, String> {
    let cfg = env_config(jitter, seed)?;
    let (gt, gt_err) = run(gt_source, &cfg).map_err(|e| format!("ground truth: {e}"))?;
    let cand_cfg = cfg.clone().with_seed(seed ^ envtrace::CANDIDATE_SEED_SALT);
    let mut out = match run(cand_source, &cand_cfg) {
        Ok((cand, cand_err)) => {
            let mut v = grade_pair(&gt, &cand, &cfg);
            v["candidate_error"] = json!(cand_err);
            v
        }
        Err(e) => json!({
            "rows": [],
            "matched_times": [],
            "breakdown": envtrace::ScoreBreakdown::zero(false),
            "summary": "",
            "candidate_error": e,
        }),
    };
    out["gt_error"] = json!(gt_err);
    Ok(out)
}

/// Grade a trace against a copy of itself whose timestamps are scaled by
/// `stretch` about the first event.
pub fn stretch_json(source: &str, stretch: f64) -> Result<Value, String> {
    if !(stretch.is_finite() && stretch > 0.0) {
        return Err("stretch must be a positive number".into());
    }
    let cfg = env_config(0.0, 0)?;
    let (gt, _) = run(source, &cfg)?;
    let t0 = gt.events.first().map_or(0.0, |e| e.timestamp);
    let mut cand = gt.clone();
    for e in &mut cand.events {
        e.timestamp = t0 + (e.timestamp - t0) * stretch;
    }
    for s in &mut cand.temperature_log {
        s.time *= stretch;
    }
    let mut v = grade_pair(&gt, &cand, &cfg);
    v["timing"] = v["breakdown"]["timing"].clone();
    Ok(v)
}

#[wasm_bindgen]
pub fn run_program(source: &str, jitter: f64, seed: u32) -> String {
    to_string(run_json(source, jitter, seed as u64))
}

#[wasm_bindgen]
pub fn grade(gt_source: &str, cand_source: &str, jitter: f64, seed: u32) -> String {
    to_string(grade_json(gt_source, cand_source, jitter, seed as u64))
}

#[wasm_bindgen]
pub fn stretch_timing(source: &str, stretch: f64) -> String {
    to_string(stretch_json(source, stretch))
}
