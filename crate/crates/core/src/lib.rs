//! Execution-trace evaluation for instrument control programs.
//!
//! Programs written in a small DSL run against a deterministic digital twin
//! of a beamline endstation. The resulting PV event traces are aligned against
//! ground-truth traces and scored on event correctness, relative timing and
//! temperature behaviour. The `bench` module drives whole datasets.
//!
//! ```
//! use envtrace::scoring::grade_traces;
//! use envtrace::{run_source, EnvConfig, Limits, ScoringConfig};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let env = EnvConfig::default();
//! let gt = run_source("move_rel(x, 5.8)\nalign()", &env, None, Limits::default())?.trace;
//! let cand = run_source("move_rel(x, 5.8)\nmeasure(0.5)", &env, None, Limits::default())?.trace;
//! let g = grade_traces(&gt, &cand, &env, &ScoringConfig::default(), None);
//! assert!(g.breakdown.full_score < 1.0);
//! println!("{}", g.breakdown.summary());
//! # Ok(())
//! # }
//! ```

pub mod align;
#[cfg(feature = "bench")]
pub mod bench;
pub mod dsl;
pub mod scoring;
pub mod simenv;
pub mod trace;

pub use align::{align, compare_events, exact_pv_match, match_report, Alignment, KeyMode, MatchReport};
pub use dsl::{parse, run_source, Limits, Program};
pub use scoring::{full_score, temp_score, timing_score, ScoreBreakdown, ScoringConfig};
pub use simenv::{Command, EnvConfig, Environment, StateSnapshot};
pub use trace::{ExecutionTrace, PvEvent, TempSample};

/// Mixed into the seed for candidate runs so that, under jitter, a candidate
/// identical to its ground truth does not replay the exact same noise.
pub const CANDIDATE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
