use serde::{Deserialize, Serialize};

use super::{ScoringConfig, BOUNDARY_SLACK};

const W_R2: f64 = 0.4;
const W_SLOPE: f64 = 0.2;
const W_DURATION: f64 = 0.2;
const W_MAPE: f64 = 0.2;

/// Ground-truth intervals at or below this are skipped in MAPE.
const MIN_INTERVAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingScore {
    pub n_pairs: usize,
    pub r2: f64,
    pub slope: f64,
    pub intercept: f64,
    /// `None` when the ground-truth span is zero but the prediction's is not.
    pub rel_duration: Option<f64>,
    pub mape: f64,
    pub s_r2: f64,
    pub s_slope: f64,
    pub s_duration: f64,
    pub s_mape: f64,
    pub composite: f64,
    pub pass: bool,
}

impl TimingScore {
    pub fn zero() -> Self {
        Self {
            n_pairs: 0,
            r2: 0.0,
            slope: 0.0,
            intercept: 0.0,
            rel_duration: None,
            mape: 0.0,
            s_r2: 0.0,
            s_slope: 0.0,
            s_duration: 0.0,
            s_mape: 0.0,
            composite: 0.0,
            pass: false,
        }
    }

    fn perfect(n_pairs: usize) -> Self {
        Self {
            n_pairs,
            r2: 1.0,
            slope: 1.0,
            intercept: 0.0,
            rel_duration: Some(0.0),
            mape: 0.0,
            s_r2: 1.0,
            s_slope: 1.0,
            s_duration: 1.0,
            s_mape: 1.0,
            composite: 1.0,
            pass: true,
        }
    }
}

/// Score the relative timing of matched events, given as `(t_gt, t_pred)`
/// pairs in sequence order.
///
/// Both series are shifted to start at zero and `t_pred = a + b·t_gt` is
/// fitted by least squares. With fewer than two pairs there is no timing
/// evidence and the score is perfect.
pub fn timing_score(pairs: &[(f64, f64)], cfg: &ScoringConfig) -> TimingScore {
    let n = pairs.len();
    if n < 2 {
        return TimingScore::perfect(n);
    }
    let (g0, p0) = pairs[0];
    let x: Vec<f64> = pairs.iter().map(|p| p.0 - g0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1 - p0).collect();

    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(&y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let flat = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        hi - lo <= MIN_INTERVAL
    };
    let (x_flat, y_flat) = (flat(&x), flat(&y));

    let slope = match (x_flat, y_flat) {
        (false, _) => sxy / sxx,
        (true, true) => 1.0,
        (true, false) => 0.0,
    };
    let intercept = my - slope * mx;
    let r2 = if n == 2 {
        1.0
    } else {
        match (x_flat, y_flat) {
            (false, false) => (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0),
            (true, true) => 1.0,
            _ => 0.0,
        }
    };

    let dur_gt = x[n - 1];
    let dur_pred = y[n - 1];
    let rel_duration = if dur_gt > MIN_INTERVAL {
        Some((dur_pred - dur_gt).abs() / dur_gt)
    } else if dur_pred.abs() <= MIN_INTERVAL {
        Some(0.0)
    } else {
        None
    };

    let mut ape_sum = 0.0;
    let mut ape_n = 0usize;
    for k in 1..n {
        let dg = x[k] - x[k - 1];
        if dg > MIN_INTERVAL {
            let dp = y[k] - y[k - 1];
            ape_sum += (dp - dg).abs() / dg;
            ape_n += 1;
        }
    }
    let mape = if ape_n == 0 { 0.0 } else { ape_sum / ape_n as f64 };

    let s_r2 = r2;
    let s_slope = (1.0 - (slope - 1.0).abs()).max(0.0);
    let s_duration = rel_duration.map_or(0.0, |r| (1.0 - r / cfg.tau_duration).max(0.0));
    let s_mape = (1.0 - mape / cfg.tau_mape).max(0.0);
    let composite = W_R2 * s_r2 + W_SLOPE * s_slope + W_DURATION * s_duration + W_MAPE * s_mape;

    let th = &cfg.thresholds;
    let pass = r2 >= th.r2_min - BOUNDARY_SLACK
        && slope >= th.slope_lo - BOUNDARY_SLACK
        && slope <= th.slope_hi + BOUNDARY_SLACK
        && rel_duration.is_some_and(|r| r <= th.duration_tol + BOUNDARY_SLACK)
        && mape <= th.mape_tol + BOUNDARY_SLACK;

    TimingScore {
        n_pairs: n,
        r2,
        slope,
        intercept,
        rel_duration,
        mape,
        s_r2,
        s_slope,
        s_duration,
        s_mape,
        composite,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScoringConfig {
        ScoringConfig::default()
    }

    fn stretched(k: f64) -> Vec<(f64, f64)> {
        [0.0, 1.0, 3.0, 4.5, 7.0].iter().map(|&t| (t, k * t)).collect()
    }

    #[test]
    fn identical_times() {
        let s = timing_score(&stretched(1.0), &cfg());
        assert_eq!(s.composite, 1.0);
        assert!(s.pass);
    }

    #[test]
    fn stretch_by_one_point_two() {
        let s = timing_score(&stretched(1.2), &cfg());
        assert!((s.slope - 1.2).abs() < 1e-12);
        assert!((s.r2 - 1.0).abs() < 1e-12);
        assert!((s.rel_duration.unwrap() - 0.2).abs() < 1e-12);
        assert!((s.mape - 0.2).abs() < 1e-12);
        assert!((s.composite - 0.76).abs() < 1e-12);
        assert!(s.pass);
    }

    #[test]
    fn stretch_past_bounds_fails() {
        let s = timing_score(&stretched(1.3), &cfg());
        assert!(!s.pass);
        assert_eq!(s.s_duration, 0.0);
    }

    #[test]
    fn degenerate_sizes() {
        assert!(timing_score(&[], &cfg()).pass);
        assert_eq!(timing_score(&[(3.0, 9.0)], &cfg()).composite, 1.0);
        let two = timing_score(&[(0.0, 0.0), (1.0, 1.5)], &cfg());
        assert_eq!(two.r2, 1.0);
        assert!((two.slope - 1.5).abs() < 1e-12);
    }

    #[test]
    fn simultaneous_gt_events() {
        let s = timing_score(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)], &cfg());
        assert_eq!((s.r2, s.slope, s.rel_duration), (1.0, 1.0, Some(0.0)));
        assert!(s.pass);
        let s = timing_score(&[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)], &cfg());
        assert_eq!((s.r2, s.slope, s.rel_duration), (0.0, 0.0, None));
        assert!(!s.pass);
    }

    #[test]
    fn zero_interval_excluded_from_mape() {
        let s = timing_score(&[(0.0, 0.0), (1.0, 1.0), (1.0, 1.5), (2.0, 2.0)], &cfg());
        // intervals (1,1) and (1,0.5) count; the zero gt interval is skipped
        assert!((s.mape - 0.25).abs() < 1e-12);
    }

    #[test]
    fn flat_prediction() {
        let s = timing_score(&[(0.0, 5.0), (1.0, 5.0), (2.0, 5.0)], &cfg());
        assert_eq!(s.slope, 0.0);
        assert_eq!(s.r2, 0.0);
        assert!(!s.pass);
    }
}
