//! Component scores, the weighted full score and the strict accuracy verdict.

mod baselines;
mod temperature;
mod timing;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use baselines::{exact_match, levenshtein_norm};
pub use temperature::{temp_components, temp_score, TempScore};
pub use timing::{timing_score, TimingScore};

use crate::align::{compare_events, matched_timestamps, Alignment, KeyMode, MatchReport, OpTag};
use crate::simenv::EnvConfig;
use crate::trace::ExecutionTrace;

/// Slack on threshold comparisons so that values sitting on a boundary up to
/// float noise (a slope of 1.2000000000000002) still pass.
pub const BOUNDARY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_pv_temp: f64,
    pub w_pv: f64,
    pub w_timing: f64,
    pub w_temp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub r2_min: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub duration_tol: f64,
    pub mape_tol: f64,
    pub temp_mae_max: f64,
    pub temp_final_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub weights: Weights,
    pub tau_duration: f64,
    pub tau_mape: f64,
    /// Temperature error scale, °C.
    pub lambda: f64,
    pub value_tol: f64,
    pub thresholds: Thresholds,
    pub key_mode: KeyMode,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            weights: Weights { w_pv_temp: 0.6, w_pv: 0.8, w_timing: 0.2, w_temp: 0.2 },
            tau_duration: 0.25,
            tau_mape: 1.0,
            lambda: 15.0,
            value_tol: 1e-3,
            thresholds: Thresholds {
                r2_min: 0.90,
                slope_lo: 0.8,
                slope_hi: 1.2,
                duration_tol: 0.25,
                mape_tol: 1.0,
                temp_mae_max: 5.0,
                temp_final_max: 5.0,
            },
            key_mode: KeyMode::Name,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), String> {
        let w = &self.weights;
        for (name, v) in [
            ("weights.w_pv_temp", w.w_pv_temp),
            ("weights.w_pv", w.w_pv),
            ("weights.w_timing", w.w_timing),
            ("weights.w_temp", w.w_temp),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if (w.w_pv_temp + w.w_timing + w.w_temp - 1.0).abs() > 1e-9 {
            return Err("weights.w_pv_temp + w_timing + w_temp must be 1".into());
        }
        if (w.w_pv + w.w_timing - 1.0).abs() > 1e-9 {
            return Err("weights.w_pv + w_timing must be 1".into());
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("tau_duration", self.tau_duration),
            ("tau_mape", self.tau_mape),
            ("lambda", self.lambda),
            ("value_tol", self.value_tol),
            ("thresholds.duration_tol", t.duration_tol),
            ("thresholds.mape_tol", t.mape_tol),
            ("thresholds.temp_mae_max", t.temp_mae_max),
            ("thresholds.temp_final_max", t.temp_final_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        if t.slope_lo > t.slope_hi {
            return Err("thresholds.slope_lo exceeds slope_hi".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub pv_match_rate: f64,
    pub n_value_matches: usize,
    pub n_total_pairs: usize,
    pub exact_pv_match: bool,
    pub timing: TimingScore,
    pub temp: Option<TempScore>,
    pub temperature_involved: bool,
    pub full_score: f64,
    pub accuracy: bool,
}

impl ScoreBreakdown {
    /// Score of a candidate that produced nothing to compare.
    pub fn zero(temperature_involved: bool) -> Self {
        Self {
            pv_match_rate: 0.0,
            n_value_matches: 0,
            n_total_pairs: 0,
            exact_pv_match: false,
            timing: TimingScore::zero(),
            temp: temperature_involved.then(TempScore::empty),
            temperature_involved,
            full_score: 0.0,
            accuracy: false,
        }
    }

    /// Plain-text summary in the style of the annotated examples.
    pub fn summary(&self) -> String {
        let flag = |b: bool| if b { "True" } else { "False" };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "PV match rate: {:.2}% ({}/{})",
            self.pv_match_rate * 100.0,
            self.n_value_matches,
            self.n_total_pairs
        );
        let _ = writeln!(s, "Exact PV match: {}", flag(self.exact_pv_match));
        let _ = writeln!(s, "Timing match: {} (score: {:.3})", flag(self.timing.pass), self.timing.composite);
        if let Some(t) = &self.temp {
            let _ = writeln!(s, "Temperature match: {} (score: {:.3})", flag(t.pass), t.composite);
        }
        let _ = writeln!(s, "Full match: {} (score: {:.3})", flag(self.accuracy), self.full_score);
        s
    }
}

/// Combine component scores into the weighted full score and accuracy.
/// A missing `temp` on a temperature task counts as a failed temperature
/// component.
pub fn full_score(
    report: &MatchReport,
    exact_pv_match: bool,
    timing: TimingScore,
    temp: Option<TempScore>,
    temperature_involved: bool,
    cfg: &ScoringConfig,
) -> ScoreBreakdown {
    let rate = report.rate();
    let w = &cfg.weights;
    let (full, temp, temp_ok) = if temperature_involved {
        let t = temp.unwrap_or_else(TempScore::empty);
        let full = w.w_pv_temp * rate + w.w_timing * timing.composite + w.w_temp * t.composite;
        let ok = t.pass;
        (full, Some(t), ok)
    } else {
        (w.w_pv * rate + w.w_timing * timing.composite, None, true)
    };
    ScoreBreakdown {
        pv_match_rate: rate,
        n_value_matches: report.n_value_matches,
        n_total_pairs: report.n_total_pairs,
        exact_pv_match,
        accuracy: exact_pv_match && timing.pass && temp_ok,
        timing,
        temp,
        temperature_involved,
        full_score: full.clamp(0.0, 1.0),
    }
}

/// Whether the ground truth exercises the temperature stage: it writes the
/// setpoint or power pv, or its readback log moves.
pub fn temperature_involved(gt: &ExecutionTrace, env: &EnvConfig) -> bool {
    let t = &env.temperature;
    if gt
        .events
        .iter()
        .any(|e| e.pv_name == t.setpoint_pv || e.pv_name == t.power_pv)
    {
        return true;
    }
    let mut temps = gt.temperature_log.iter().map(|s| s.temperature);
    match temps.next() {
        Some(first) => temps.any(|v| (v - first).abs() > 1e-9),
        None => false,
    }
}

/// Everything produced by grading one trace against one ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Grade {
    pub alignment: Alignment,
    pub report: MatchReport,
    pub breakdown: ScoreBreakdown,
}

/// Align, score timing and temperature, and combine. `temp_override` replaces
/// the trace-derived temperature detection when set.
pub fn grade_traces(
    gt: &ExecutionTrace,
    pred: &ExecutionTrace,
    env: &EnvConfig,
    cfg: &ScoringConfig,
    temp_override: Option<bool>,
) -> Grade {
    let (alignment, report) = compare_events(&gt.events, &pred.events, cfg.key_mode, cfg.value_tol);
    let exact = gt.events.len() == pred.events.len()
        && alignment
            .opcodes
            .iter()
            .all(|op| matches!(op.tag, OpTag::Equal | OpTag::Replace))
        && report.n_value_matches == gt.events.len();
    let timing = timing_score(&matched_timestamps(&report, &gt.events, &pred.events), cfg);
    let involved = temp_override.unwrap_or_else(|| temperature_involved(gt, env));
    let temp = involved.then(|| temp_score(&gt.temperature_log, &pred.temperature_log, cfg));
    let breakdown = full_score(&report, exact, timing, temp, involved, cfg);
    Grade { alignment, report, breakdown }
}
