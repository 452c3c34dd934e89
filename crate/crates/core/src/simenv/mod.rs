//! Control-logic digital twin.
//!
//! A virtually clocked stand-in for a beamline endstation: motor axes, an
//! area detector and a temperature stage. Commands block until done, device
//! state persists between commands, and every pv write that actually changes a
//! value is recorded as a [`PvEvent`]. The temperature readback is sampled on a
//! fixed grid into a separate log instead of producing discrete events.

mod config;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{AxisConfig, DetectorConfig, EnvConfig, JitterConfig, StateSnapshot, TemperatureConfig};

use crate::trace::{quantize_time, ExecutionTrace, PvEvent, TempSample, TraceMeta};

/// Writes closer than this to the current value are not changes.
pub const CHANGE_EPSILON: f64 = 1e-12;

/// Slack for sample-boundary and tolerance comparisons on the virtual clock.
const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    MoveAbs { axis: String, target: f64 },
    MoveRel { axis: String, delta: f64 },
    SetExposure { duration: f64 },
    Acquire,
    SetTemperature { target: f64 },
    WaitTemperature { tolerance: f64, timeout: f64 },
    SetPower { on: bool },
    Sleep { duration: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
    #[error("invalid environment state: {0}")]
    State(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("axis `{axis}` target {target} outside soft limits [{lo}, {hi}]")]
    SoftLimit { axis: String, target: f64, lo: f64, hi: f64 },
    #[error("temperature did not reach {setpoint} (readback {readback:.3}) within {timeout} s")]
    TemperatureTimeout { setpoint: f64, readback: f64, timeout: f64 },
    #[error("invalid command: {0}")]
    InvalidCommand(String),
}

pub struct Environment {
    config: EnvConfig,
    clock: f64,
    pv_table: BTreeMap<String, f64>,
    events: Vec<PvEvent>,
    temperature_log: Vec<TempSample>,
    readback: f64,
    next_sample: u64,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self, SimError> {
        config.validate()?;
        let pv_table = config
            .initial_pv_values()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let t0 = config.temperature.initial_temperature;
        let rng = ChaCha8Rng::seed_from_u64(config.jitter.seed);
        Ok(Self {
            config,
            clock: 0.0,
            pv_table,
            events: Vec::new(),
            temperature_log: vec![TempSample { time: 0.0, temperature: t0 }],
            readback: t0,
            next_sample: 1,
            rng,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn pv(&self, name: &str) -> Option<f64> {
        self.pv_table.get(name).copied()
    }

    pub fn events(&self) -> &[PvEvent] {
        &self.events
    }

    pub fn temperature_log(&self) -> &[TempSample] {
        &self.temperature_log
    }

    pub fn readback(&self) -> f64 {
        self.readback
    }

    fn setpoint(&self) -> f64 {
        self.pv_table[&self.config.temperature.setpoint_pv]
    }

    /// Preload device state. Must happen before the first command.
    pub fn load_snapshot(&mut self, snap: &StateSnapshot) -> Result<(), SimError> {
        if !self.events.is_empty() || self.clock > 0.0 {
            return Err(SimError::State(
                "snapshot must be loaded before any command runs".into(),
            ));
        }
        for (pv, &value) in &snap.pvs {
            if !self.pv_table.contains_key(pv) {
                return Err(SimError::Snapshot(format!("unknown pv `{pv}`")));
            }
            if !value.is_finite() {
                return Err(SimError::Snapshot(format!("value for `{pv}` is not finite")));
            }
            if let Some(axis) = self.config.axes.iter().find(|a| &a.pv_name == pv) {
                if let Some([lo, hi]) = axis.soft_limits {
                    if value < lo || value > hi {
                        return Err(SimError::Snapshot(format!(
                            "`{pv}` = {value} outside soft limits [{lo}, {hi}]"
                        )));
                    }
                }
            }
        }
        if let Some(t) = snap.temperature {
            if !t.is_finite() {
                return Err(SimError::Snapshot("temperature is not finite".into()));
            }
        }

        for (pv, &value) in &snap.pvs {
            self.pv_table.insert(pv.clone(), value);
        }
        let rb_pv = self.config.temperature.readback_pv.clone();
        if let Some(t) = snap.temperature {
            self.pv_table.insert(rb_pv.clone(), t);
        }
        self.readback = self.pv_table[&rb_pv];
        self.temperature_log = vec![TempSample { time: 0.0, temperature: self.readback }];
        Ok(())
    }

    /// Run one command to completion, returning the events it produced.
    pub fn apply(&mut self, cmd: &Command) -> Result<Vec<PvEvent>, SimError> {
        let start = self.events.len();
        self.apply_inner(cmd)?;
        Ok(self.events[start..].to_vec())
    }

    fn apply_inner(&mut self, cmd: &Command) -> Result<(), SimError> {
        match cmd {
            Command::MoveAbs { axis, target } => self.move_axis(axis, *target, false),
            Command::MoveRel { axis, delta } => self.move_axis(axis, *delta, true),
            Command::SetExposure { duration } => {
                let d = non_negative("exposure", *duration)?;
                let pv = self.config.detector.exposure_pv.clone();
                self.write_pv(&pv, d);
                Ok(())
            }
            Command::Acquire => {
                let det = self.config.detector.clone();
                let exposure = self.pv_table[&det.exposure_pv];
                self.advance(det.trigger_overhead);
                self.write_pv(&det.acquire_pv, 1.0);
                self.advance(exposure);
                self.write_pv(&det.acquire_pv, 0.0);
                Ok(())
            }
            Command::SetTemperature { target } => {
                let t = finite("temperature target", *target)?;
                let pv = self.config.temperature.setpoint_pv.clone();
                self.write_pv(&pv, t);
                Ok(())
            }
            Command::WaitTemperature { tolerance, timeout } => {
                let tol = finite("tolerance", *tolerance)?;
                let timeout = finite("timeout", *timeout)?;
                if tol <= 0.0 || timeout <= 0.0 {
                    return Err(SimError::InvalidCommand(
                        "wait_temp tolerance and timeout must be > 0".into(),
                    ));
                }
                self.wait_temperature(tol, timeout)
            }
            Command::SetPower { on } => {
                let pv = self.config.temperature.power_pv.clone();
                self.write_pv(&pv, if *on { 1.0 } else { 0.0 });
                Ok(())
            }
            Command::Sleep { duration } => {
                let d = non_negative("sleep duration", *duration)?;
                self.advance(d);
                Ok(())
            }
        }
    }

    fn move_axis(&mut self, axis: &str, amount: f64, relative: bool) -> Result<(), SimError> {
        let amount = finite("move target", amount)?;
        let ax = self
            .config
            .axis(axis)
            .ok_or_else(|| SimError::UnknownAxis(axis.to_string()))?
            .clone();
        let current = self.pv_table[&ax.pv_name];
        let target = if relative { current + amount } else { amount };
        if !target.is_finite() {
            return Err(SimError::InvalidCommand(format!("move target for `{axis}` overflows")));
        }
        if let Some([lo, hi]) = ax.soft_limits {
            if target < lo || target > hi {
                return Err(SimError::SoftLimit {
                    axis: axis.to_string(),
                    target,
                    lo,
                    hi,
                });
            }
        }
        self.advance(ax.move_overhead + (target - current).abs() / ax.velocity);
        self.write_pv(&ax.pv_name, target);
        Ok(())
    }

    fn wait_temperature(&mut self, tol: f64, timeout: f64) -> Result<(), SimError> {
        let rate = self.config.temperature.ramp_rate;
        let setpoint = self.setpoint();
        let mut waited = 0.0;
        loop {
            let gap = (self.readback - setpoint).abs();
            if gap <= tol + TIME_EPSILON {
                return Ok(());
            }
            let need = (gap - tol) / rate;
            if waited + need > timeout + TIME_EPSILON {
                self.advance(timeout - waited);
                return Err(SimError::TemperatureTimeout {
                    setpoint,
                    readback: self.readback,
                    timeout,
                });
            }
            let before = self.clock;
            self.advance(need);
            waited += self.clock - before;
        }
    }

    fn write_pv(&mut self, pv: &str, value: f64) {
        let slot = self.pv_table.get_mut(pv).expect("pv belongs to config");
        if (*slot - value).abs() <= CHANGE_EPSILON {
            return;
        }
        *slot = value;
        self.events.push(PvEvent::new(pv, value, self.clock));
    }

    /// Advance the virtual clock by `dt` seconds (jitter-scaled), ramping the
    /// temperature readback and logging it at every sample boundary crossed.
    pub fn advance(&mut self, dt: f64) {
        if dt.is_nan() || dt <= 0.0 {
            return;
        }
        let bound = self.config.jitter.bound;
        let u = if bound > 0.0 {
            self.rng.random_range(-bound..=bound)
        } else {
            0.0
        };
        let eff = dt * (1.0 + u);

        let start = self.clock;
        let end = start + eff;
        let from = self.readback;
        let to = self.setpoint();
        let rate = self.config.temperature.ramp_rate;
        let interval = self.config.temperature.sample_interval;
        loop {
            let tk = self.next_sample as f64 * interval;
            if tk > end + TIME_EPSILON {
                break;
            }
            let s = (tk - start).clamp(0.0, eff);
            self.temperature_log.push(TempSample {
                time: tk,
                temperature: ramp(from, to, rate, s),
            });
            self.next_sample += 1;
        }
        self.readback = ramp(from, to, rate, eff);
        self.clock = end;
        let rb = self.config.temperature.readback_pv.clone();
        self.pv_table.insert(rb, self.readback);
    }

    /// Snapshot the run so far as a trace.
    pub fn take_trace(&self) -> ExecutionTrace {
        let rb = &self.config.temperature.readback_pv;
        ExecutionTrace {
            events: self
                .events
                .iter()
                .filter(|e| &e.pv_name != rb)
                .map(|e| PvEvent::new(e.pv_name.clone(), e.value, quantize_time(e.timestamp)))
                .collect(),
            temperature_log: self
                .temperature_log
                .iter()
                .map(|s| TempSample {
                    time: quantize_time(s.time),
                    temperature: s.temperature,
                })
                .collect(),
            meta: TraceMeta {
                program_digest: String::new(),
                seed: self.config.jitter.seed,
                duration: quantize_time(self.clock),
                error: None,
            },
        }
    }
}

/// Linear saturating ramp from `from` toward `to` after `s` seconds.
fn ramp(from: f64, to: f64, rate: f64, s: f64) -> f64 {
    let gap = to - from;
    let step = rate * s;
    if gap.abs() <= step {
        to
    } else {
        from + gap.signum() * step
    }
}

fn finite(what: &str, v: f64) -> Result<f64, SimError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SimError::InvalidCommand(format!("{what} must be finite")))
    }
}

fn non_negative(what: &str, v: f64) -> Result<f64, SimError> {
    let v = finite(what, v)?;
    if v < 0.0 {
        Err(SimError::InvalidCommand(format!("{what} must be >= 0")))
    } else {
        Ok(v)
    }
}
