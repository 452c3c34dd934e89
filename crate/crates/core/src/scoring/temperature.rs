use serde::{Deserialize, Serialize};

use super::{ScoringConfig, BOUNDARY_SLACK};
use crate::trace::TempSample;

const W_MAE: f64 = 0.7;
const W_FINAL: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempScore {
    /// Mean absolute error over the compared grid, °C. `None` if a log is empty.
    pub mae: Option<f64>,
    /// Difference between the two final samples, °C.
    pub final_diff: Option<f64>,
    pub s_mae: f64,
    pub s_final: f64,
    pub composite: f64,
    pub pass: bool,
}

impl TempScore {
    pub fn empty() -> Self {
        Self { mae: None, final_diff: None, s_mae: 0.0, s_final: 0.0, composite: 0.0, pass: false }
    }
}

/// Score from already computed errors.
pub fn temp_components(mae: f64, final_diff: f64, cfg: &ScoringConfig) -> TempScore {
    let s_mae = (-mae / cfg.lambda).exp();
    let s_final = (-final_diff / cfg.lambda).exp();
    TempScore {
        mae: Some(mae),
        final_diff: Some(final_diff),
        s_mae,
        s_final,
        composite: W_MAE * s_mae + W_FINAL * s_final,
        pass: mae <= cfg.thresholds.temp_mae_max + BOUNDARY_SLACK
            && final_diff <= cfg.thresholds.temp_final_max + BOUNDARY_SLACK,
    }
}

/// Compare two temperature profiles. The prediction is interpolated linearly
/// at every ground-truth sample time that falls inside both logs' time span.
/// If no sample does, the final-sample difference stands in for the MAE.
pub fn temp_score(gt: &[TempSample], pred: &[TempSample], cfg: &ScoringConfig) -> TempScore {
    let (Some(g_last), Some(p_last)) = (gt.last(), pred.last()) else {
        return TempScore::empty();
    };
    let final_diff = (g_last.temperature - p_last.temperature).abs();
    let lo = gt[0].time.max(pred[0].time);
    let hi = g_last.time.min(p_last.time);

    let mut sum = 0.0;
    let mut n = 0usize;
    for s in gt {
        if s.time < lo - 1e-9 || s.time > hi + 1e-9 {
            continue;
        }
        sum += (s.temperature - interpolate(pred, s.time)).abs();
        n += 1;
    }
    let mae = if n == 0 { final_diff } else { sum / n as f64 };
    temp_components(mae, final_diff, cfg)
}

/// Piecewise-linear value of `log` at `t`, held constant past either end.
fn interpolate(log: &[TempSample], t: f64) -> f64 {
    let k = log.partition_point(|s| s.time < t);
    if k == 0 {
        return log[0].temperature;
    }
    if k == log.len() {
        return log[k - 1].temperature;
    }
    let (a, b) = (log[k - 1], log[k]);
    let span = b.time - a.time;
    if span <= 0.0 {
        return b.temperature;
    }
    a.temperature + (b.temperature - a.temperature) * (t - a.time) / span
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(points: &[(f64, f64)]) -> Vec<TempSample> {
        points.iter().map(|&(time, temperature)| TempSample { time, temperature }).collect()
    }

    #[test]
    fn identical_logs() {
        let l = log(&[(0.0, 25.0), (1.0, 25.5), (2.0, 26.0)]);
        let s = temp_score(&l, &l, &ScoringConfig::default());
        assert_eq!(s.composite, 1.0);
        assert!(s.pass);
    }

    #[test]
    fn constant_offset_of_fifteen() {
        let g = log(&[(0.0, 25.0), (1.0, 30.0), (2.0, 35.0)]);
        let p = log(&[(0.0, 40.0), (1.0, 45.0), (2.0, 50.0)]);
        let s = temp_score(&g, &p, &ScoringConfig::default());
        assert!((s.mae.unwrap() - 15.0).abs() < 1e-12);
        assert!((s.composite - (-1.0f64).exp()).abs() < 1e-12);
        assert!(!s.pass);
    }

    #[test]
    fn boundary_five_passes() {
        let s = temp_components(5.0, 5.0, &ScoringConfig::default());
        assert!((s.composite - (-1.0f64 / 3.0).exp()).abs() < 1e-12);
        assert!(s.pass);
    }

    #[test]
    fn interpolation_on_gt_grid() {
        let g = log(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        let p = log(&[(0.0, 0.0), (2.0, 4.0)]);
        let s = temp_score(&g, &p, &ScoringConfig::default());
        // pred at t = 0, 1, 2 is 0, 2, 4
        assert!((s.mae.unwrap() - 1.0).abs() < 1e-12);
        assert!((s.final_diff.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_clipped() {
        let g = log(&[(0.0, 10.0), (1.0, 10.0), (5.0, 30.0)]);
        let p = log(&[(0.0, 10.0), (1.0, 10.0)]);
        let s = temp_score(&g, &p, &ScoringConfig::default());
        assert_eq!(s.mae, Some(0.0));
        assert_eq!(s.final_diff, Some(20.0));
    }

    #[test]
    fn disjoint_logs_fall_back_to_final_difference() {
        let g = log(&[(0.0, 10.0)]);
        let p = log(&[(3.0, 13.0)]);
        let s = temp_score(&g, &p, &ScoringConfig::default());
        assert_eq!(s.mae, Some(3.0));
    }

    #[test]
    fn empty_log() {
        let l = log(&[(0.0, 25.0)]);
        let s = temp_score(&l, &[], &ScoringConfig::default());
        assert_eq!(s, TempScore::empty());
        assert_eq!(temp_score(&[], &l, &ScoringConfig::default()).composite, 0.0);
    }
}
