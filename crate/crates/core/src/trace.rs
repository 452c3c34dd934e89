//! Execution traces: the ordered state changes a program produced on the twin,
//! plus the sampled temperature profile, and their line-delimited JSON form.
//!
//! File layout (`.trace.jsonl`), one JSON object per line:
//!
//! ```text
//! {"envtrace":1,"program_digest":"9f2c…","seed":0,"duration":75.3}
//! {"pv":"SIM:DET:AcquireTime","value":1,"t":0}
//! {"pv":"SIM:DET:Acquire","value":1,"t":5}
//! {"section":"temperature"}
//! {"t":0,"T":25}
//! ```
//!
//! Timestamps are kept at microsecond precision both in memory and on disk.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

/// One observed state change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvEvent {
    pub pv_name: String,
    pub value: f64,
    pub timestamp: f64,
}

impl PvEvent {
    pub fn new(pv_name: impl Into<String>, value: f64, timestamp: f64) -> Self {
        Self {
            pv_name: pv_name.into(),
            value,
            timestamp,
        }
    }
}

/// One temperature readback sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempSample {
    pub time: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    /// Hex SHA-256 of the canonicalized source, empty when the trace was not
    /// produced from a program (e.g. transcribed fixtures).
    pub program_digest: String,
    pub seed: u64,
    /// Final virtual clock of the run, seconds.
    pub duration: f64,
    /// Runtime error that cut the run short, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub events: Vec<PvEvent>,
    pub temperature_log: Vec<TempSample>,
    pub meta: TraceMeta,
}

/// Round a timestamp to the microsecond grid traces are stored on.
pub fn quantize_time(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// Selects which pvs take part in scoring. Empty means all of them.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceFilter {
    pub tracked_pvs: BTreeSet<String>,
}

impl TraceFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn only<I, S>(pvs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tracked_pvs: pvs.into_iter().map(Into::into).collect(),
        }
    }

    pub fn keeps(&self, pv: &str) -> bool {
        self.tracked_pvs.is_empty() || self.tracked_pvs.contains(pv)
    }
}

impl ExecutionTrace {
    /// Events restricted to the filter's pvs; temperature log and meta untouched.
    pub fn filter(&self, f: &TraceFilter) -> ExecutionTrace {
        ExecutionTrace {
            events: self
                .events
                .iter()
                .filter(|e| f.keeps(&e.pv_name))
                .cloned()
                .collect(),
            temperature_log: self.temperature_log.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str("{\"envtrace\":");
        let _ = write!(out, "{FORMAT_VERSION}");
        out.push_str(",\"program_digest\":");
        out.push_str(&json_string(&self.meta.program_digest));
        let _ = write!(out, ",\"seed\":{}", self.meta.seed);
        out.push_str(",\"duration\":");
        out.push_str(&fmt_num(quantize_time(self.meta.duration)));
        if let Some(err) = &self.meta.error {
            out.push_str(",\"error\":");
            out.push_str(&json_string(err));
        }
        out.push_str("}\n");
        for e in &self.events {
            out.push_str("{\"pv\":");
            out.push_str(&json_string(&e.pv_name));
            out.push_str(",\"value\":");
            out.push_str(&fmt_num(e.value));
            out.push_str(",\"t\":");
            out.push_str(&fmt_num(quantize_time(e.timestamp)));
            out.push_str("}\n");
        }
        out.push_str("{\"section\":\"temperature\"}\n");
        for s in &self.temperature_log {
            out.push_str("{\"t\":");
            out.push_str(&fmt_num(quantize_time(s.time)));
            out.push_str(",\"T\":");
            out.push_str(&fmt_num(s.temperature));
            out.push_str("}\n");
        }
        out.into_bytes()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<ExecutionTrace, TraceError> {
        let text = std::str::from_utf8(bytes).map_err(|_| TraceError::Utf8)?;
        let mut lines: Vec<&str> = text.split('\n').collect();
        // a single trailing newline terminates the last record
        if lines.last() == Some(&"") {
            lines.pop();
        }
        let mut iter = lines.into_iter().enumerate().map(|(i, l)| (i + 1, l));

        let (_, first) = iter.next().ok_or(TraceError::Empty)?;
        let header: HeaderLine = parse_line(1, first)?;
        if header.envtrace != FORMAT_VERSION {
            return Err(TraceError::Line {
                line: 1,
                message: format!("unsupported format version {}", header.envtrace),
            });
        }
        let mut trace = ExecutionTrace {
            events: Vec::new(),
            temperature_log: Vec::new(),
            meta: TraceMeta {
                program_digest: header.program_digest,
                seed: header.seed,
                duration: quantize_time(header.duration),
                error: header.error,
            },
        };

        let mut in_temperature = false;
        let mut last_t = f64::NEG_INFINITY;
        for (line, raw) in iter {
            if !in_temperature {
                if let Ok(SectionLine { section }) = serde_json::from_str::<SectionLine>(raw) {
                    if section != "temperature" {
                        return Err(TraceError::Line {
                            line,
                            message: format!("unknown section {section:?}"),
                        });
                    }
                    in_temperature = true;
                    last_t = f64::NEG_INFINITY;
                    continue;
                }
                let ev: EventLine = parse_line(line, raw)?;
                let t = quantize_time(ev.t);
                check_time(line, t, last_t, false)?;
                check_finite(line, "value", ev.value)?;
                last_t = t;
                trace.events.push(PvEvent::new(ev.pv, ev.value, t));
            } else {
                let s: SampleLine = parse_line(line, raw)?;
                let t = quantize_time(s.t);
                check_time(line, t, last_t, true)?;
                check_finite(line, "T", s.temperature)?;
                last_t = t;
                trace.temperature_log.push(TempSample {
                    time: t,
                    temperature: s.temperature,
                });
            }
        }
        if !in_temperature {
            return Err(TraceError::MissingTemperatureSection);
        }
        Ok(trace)
    }
}

fn check_time(line: usize, t: f64, last: f64, strict: bool) -> Result<(), TraceError> {
    if !t.is_finite() || t < 0.0 {
        return Err(TraceError::Line {
            line,
            message: format!("timestamp {t} is not a finite non-negative number"),
        });
    }
    if t < last || (strict && t == last) {
        return Err(TraceError::Line {
            line,
            message: format!("timestamp {t} goes backwards (previous {last})"),
        });
    }
    Ok(())
}

fn check_finite(line: usize, field: &str, v: f64) -> Result<(), TraceError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(TraceError::Line {
            line,
            message: format!("{field} is not finite"),
        })
    }
}

fn parse_line<'a, T: Deserialize<'a>>(line: usize, raw: &'a str) -> Result<T, TraceError> {
    serde_json::from_str(raw).map_err(|e| TraceError::Line {
        line,
        message: e.to_string(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    envtrace: u32,
    program_digest: String,
    seed: u64,
    duration: f64,
    #[serde(default)]
    error: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SectionLine {
    section: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    pv: String,
    value: f64,
    t: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    t: f64,
    #[serde(rename = "T")]
    temperature: f64,
}

/// Integral values print without a fractional part, everything else uses the
/// shortest round-trip representation.
pub(crate) fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        match serde_json::Number::from_f64(v) {
            Some(n) => n.to_string(),
            None => "null".to_string(),
        }
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("trace document is not valid UTF-8")]
    Utf8,
    #[error("trace document is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("trace document has no temperature section")]
    MissingTemperatureSection,
}
