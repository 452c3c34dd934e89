use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{BinOp, Expr, Program, Stmt, StmtKind, UnaryOp};
use super::plans::{expand_plan, PlanArg, PlanError};
use crate::simenv::{Command, Environment, SimError};
use crate::trace::ExecutionTrace;

/// Slack applied when counting `range` elements, so `range(0, 0.3 + 0.15/2, 0.15)`
/// style endpoints behave like numpy's arange.
pub const RANGE_SLACK: f64 = 1e-12;

pub const DEFAULT_WAIT_TIMEOUT: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_steps: u64,
    pub max_sim_seconds: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_steps: 100_000,
            max_sim_seconds: 86_400.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
}

impl Value {
    fn truthy(self) -> bool {
        match self {
            Value::Bool(b) => b,
            Value::Number(n) => n != 0.0,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeErrorKind {
    #[error("undefined variable `{0}`")]
    UnknownName(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: String, got: usize },
    #[error("type error: {0}")]
    Type(String),
    #[error("arithmetic produced a non-finite value")]
    NonFinite,
    #[error("division by zero")]
    DivisionByZero,
    #[error("`{function}` expects an axis name as argument {index}")]
    ExpectedAxis { function: String, index: usize },
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("`{0}` does not return a value")]
    NoValue(String),
    #[error("range() can only be used as a for-loop iterable")]
    RangeOutsideFor,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step limit of {0} exceeded")]
    StepLimit(u64),
    #[error("simulated time limit of {0} s exceeded")]
    TimeLimit(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub line: usize,
}

/// A run that stopped early, with everything it did before stopping.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeFailure {
    pub error: RuntimeError,
    pub trace: ExecutionTrace,
}

/// Result of running a program: the trace, the commands it issued in order,
/// and the error that stopped it, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub trace: ExecutionTrace,
    pub commands: Vec<Command>,
    pub error: Option<RuntimeError>,
}

pub fn interpret(
    prog: &Program,
    env: &mut Environment,
    limits: Limits,
) -> Result<ExecutionTrace, Box<RuntimeFailure>> {
    let exec = execute(prog, env, limits);
    match exec.error {
        None => Ok(exec.trace),
        Some(error) => Err(Box::new(RuntimeFailure { error, trace: exec.trace })),
    }
}

pub fn execute(prog: &Program, env: &mut Environment, limits: Limits) -> Execution {
    let mut it = Interpreter {
        env,
        limits,
        vars: HashMap::new(),
        steps: 0,
        commands: Vec::new(),
    };
    let error = it.block(&prog.statements).err();
    let mut trace = it.env.take_trace();
    trace.meta.program_digest = prog.digest.clone();
    trace.meta.error = error.as_ref().map(|e| e.to_string());
    Execution {
        trace,
        commands: it.commands,
        error,
    }
}

/// Number of elements `range(start, stop, step)` yields.
pub fn range_len(start: f64, stop: f64, step: f64) -> u64 {
    let n = ((stop - start) / step - RANGE_SLACK).ceil();
    if n.is_finite() && n > 0.0 {
        n as u64
    } else {
        0
    }
}

struct Interpreter<'e> {
    env: &'e mut Environment,
    limits: Limits,
    vars: HashMap<String, Value>,
    steps: u64,
    commands: Vec<Command>,
}

type Res<T> = Result<T, RuntimeError>;

#[derive(Clone, Copy)]
enum Builtin {
    MoveAbs,
    MoveRel,
    SetExposure,
    Acquire,
    SetTemp,
    WaitTemp,
    PowerOn,
    PowerOff,
    Sleep,
    Plan,
    Range,
    Math(fn(&[f64]) -> f64),
}

fn lookup(name: &str) -> Option<(Builtin, usize, usize)> {
    use Builtin::*;
    Some(match name {
        "move_abs" => (MoveAbs, 2, 2),
        "move_rel" => (MoveRel, 2, 2),
        "set_exposure" => (SetExposure, 1, 1),
        "acquire" => (Acquire, 0, 0),
        "set_temp" => (SetTemp, 1, 1),
        "wait_temp" => (WaitTemp, 1, 2),
        "power_on" => (PowerOn, 0, 0),
        "power_off" => (PowerOff, 0, 0),
        "sleep" => (Sleep, 1, 1),
        "measure" => (Plan, 1, 1),
        "align" => (Plan, 0, 0),
        "grid_scan" | "outer_product_scan" => (Plan, 9, 9),
        "range" => (Range, 1, 3),
        "abs" => (Math(|a| a[0].abs()), 1, 1),
        "round" => (Math(|a| a[0].round()), 1, 1),
        "floor" => (Math(|a| a[0].floor()), 1, 1),
        "ceil" => (Math(|a| a[0].ceil()), 1, 1),
        "int" => (Math(|a| a[0].trunc()), 1, 1),
        "min" => (Math(|a| a[0].min(a[1])), 2, 2),
        "max" => (Math(|a| a[0].max(a[1])), 2, 2),
        _ => return None,
    })
}

/// Argument positions that name an axis rather than evaluate to a value.
fn axis_positions(name: &str) -> &'static [usize] {
    match name {
        "move_abs" | "move_rel" => &[0],
        "grid_scan" | "outer_product_scan" => &[0, 4],
        _ => &[],
    }
}

impl Interpreter<'_> {
    fn tick(&mut self, line: usize) -> Res<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return Err(RuntimeError {
                kind: RuntimeErrorKind::StepLimit(self.limits.max_steps),
                line,
            });
        }
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt]) -> Res<()> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Res<()> {
        let line = s.line;
        self.tick(line)?;
        let at = |kind: RuntimeErrorKind| RuntimeError { kind, line };
        match &s.kind {
            StmtKind::Assign { name, expr } => {
                let v = self.eval(expr).map_err(at)?;
                self.vars.insert(name.clone(), v);
            }
            StmtKind::Expr(expr) => match expr {
                Expr::Call { name, args } => {
                    self.call(name, args, line)?;
                }
                other => {
                    self.eval(other).map_err(at)?;
                }
            },
            StmtKind::For { var, iterable, body } => {
                let (start, stop, step) = self.range_args(iterable).map_err(at)?;
                for k in 0..range_len(start, stop, step) {
                    if k > 0 {
                        self.tick(line)?;
                    }
                    let v = start + k as f64 * step;
                    self.vars.insert(var.clone(), Value::Number(v));
                    self.block(body)?;
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval(cond).map_err(at)?.truthy() {
                    self.block(body)?;
                    self.tick(line)?;
                }
            }
            StmtKind::If { cond, then_body, else_body } => {
                if self.eval(cond).map_err(at)?.truthy() {
                    self.block(then_body)?;
                } else if let Some(e) = else_body {
                    self.block(e)?;
                }
            }
        }
        Ok(())
    }

    fn range_args(&mut self, iterable: &Expr) -> Result<(f64, f64, f64), RuntimeErrorKind> {
        let Expr::Call { name, args } = iterable else {
            return Err(RuntimeErrorKind::Type("for-loops iterate over range(...)".into()));
        };
        if name != "range" {
            return Err(RuntimeErrorKind::Type(format!(
                "for-loops iterate over range(...), not `{name}`"
            )));
        }
        let nums = args
            .iter()
            .map(|a| self.number(a))
            .collect::<Result<Vec<_>, _>>()?;
        let (start, stop, step) = match nums.as_slice() {
            [stop] => (0.0, *stop, 1.0),
            [start, stop] => (*start, *stop, 1.0),
            [start, stop, step] => (*start, *stop, *step),
            _ => {
                return Err(RuntimeErrorKind::Arity {
                    name: "range".into(),
                    expected: "1 to 3".into(),
                    got: nums.len(),
                })
            }
        };
        if step == 0.0 {
            return Err(RuntimeErrorKind::InvalidArgument("range() step must not be zero".into()));
        }
        Ok((start, stop, step))
    }

    fn number(&mut self, e: &Expr) -> Result<f64, RuntimeErrorKind> {
        match self.eval(e)? {
            Value::Number(n) => Ok(n),
            Value::Bool(b) => Err(RuntimeErrorKind::Type(format!("expected a number, found {b}"))),
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, RuntimeErrorKind> {
        match e {
            Expr::Number(n) => Ok(Value::Number(*n)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(name) => self
                .vars
                .get(name)
                .copied()
                .ok_or_else(|| RuntimeErrorKind::UnknownName(name.clone())),
            Expr::Unary { op, expr } => {
                let v = self.eval(expr)?;
                match op {
                    UnaryOp::Not => Ok(Value::Bool(!v.truthy())),
                    UnaryOp::Neg => match v {
                        Value::Number(n) => Ok(Value::Number(-n)),
                        Value::Bool(_) => Err(RuntimeErrorKind::Type("cannot negate a boolean".into())),
                    },
                }
            }
            Expr::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs),
            Expr::Call { name, args } => match lookup(name) {
                Some((Builtin::Math(f), lo, hi)) => {
                    check_arity(name, args.len(), lo, hi)?;
                    let nums = args
                        .iter()
                        .map(|a| self.number(a))
                        .collect::<Result<Vec<_>, _>>()?;
                    finite(f(&nums))
                }
                Some((Builtin::Range, ..)) => Err(RuntimeErrorKind::RangeOutsideFor),
                Some(_) => Err(RuntimeErrorKind::NoValue(name.clone())),
                None => Err(RuntimeErrorKind::UnknownFunction(name.clone())),
            },
        }
    }

    fn binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr) -> Result<Value, RuntimeErrorKind> {
        match op {
            BinOp::And => {
                let l = self.eval(lhs)?.truthy();
                return Ok(Value::Bool(l && self.eval(rhs)?.truthy()));
            }
            BinOp::Or => {
                let l = self.eval(lhs)?.truthy();
                return Ok(Value::Bool(l || self.eval(rhs)?.truthy()));
            }
            _ => {}
        }
        let l = self.eval(lhs)?;
        let r = self.eval(rhs)?;
        match (l, r) {
            (Value::Number(a), Value::Number(b)) => match op {
                BinOp::Add => finite(a + b),
                BinOp::Sub => finite(a - b),
                BinOp::Mul => finite(a * b),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(RuntimeErrorKind::DivisionByZero)
                    } else {
                        finite(a / b)
                    }
                }
                BinOp::Rem => {
                    if b == 0.0 {
                        return Err(RuntimeErrorKind::DivisionByZero);
                    }
                    // floored modulo: the result takes the divisor's sign
                    let mut m = a % b;
                    if m != 0.0 && (m < 0.0) != (b < 0.0) {
                        m += b;
                    }
                    finite(m)
                }
                BinOp::Eq => Ok(Value::Bool(a == b)),
                BinOp::Ne => Ok(Value::Bool(a != b)),
                BinOp::Lt => Ok(Value::Bool(a < b)),
                BinOp::Le => Ok(Value::Bool(a <= b)),
                BinOp::Gt => Ok(Value::Bool(a > b)),
                BinOp::Ge => Ok(Value::Bool(a >= b)),
                BinOp::And | BinOp::Or => unreachable!(),
            },
            (Value::Bool(a), Value::Bool(b)) => match op {
                BinOp::Eq => Ok(Value::Bool(a == b)),
                BinOp::Ne => Ok(Value::Bool(a != b)),
                _ => Err(RuntimeErrorKind::Type(format!("unsupported operation {op:?} on booleans"))),
            },
            _ => Err(RuntimeErrorKind::Type(format!(
                "cannot apply {op:?} to a number and a boolean"
            ))),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], line: usize) -> Res<()> {
        let at = |kind: RuntimeErrorKind| RuntimeError { kind, line };
        let (builtin, lo, hi) = lookup(name).ok_or_else(|| at(RuntimeErrorKind::UnknownFunction(name.into())))?;
        check_arity(name, args.len(), lo, hi).map_err(at)?;

        let mut plan_args = Vec::with_capacity(args.len());
        let axes = axis_positions(name);
        for (i, a) in args.iter().enumerate() {
            if axes.contains(&i) {
                let Expr::Var(axis) = a else {
                    return Err(at(RuntimeErrorKind::ExpectedAxis { function: name.into(), index: i }));
                };
                if self.env.config().axis(axis).is_none() {
                    return Err(at(RuntimeErrorKind::UnknownAxis(axis.clone())));
                }
                plan_args.push(PlanArg::Axis(axis.clone()));
            } else {
                plan_args.push(PlanArg::Number(self.number(a).map_err(at)?));
            }
        }
        let num = |i: usize| match plan_args[i] {
            PlanArg::Number(n) => n,
            PlanArg::Axis(_) => unreachable!(),
        };
        let axis0 = || match &plan_args[0] {
            PlanArg::Axis(a) => a.clone(),
            PlanArg::Number(_) => unreachable!(),
        };

        let cmds = match builtin {
            Builtin::MoveAbs => vec![Command::MoveAbs { axis: axis0(), target: num(1) }],
            Builtin::MoveRel => vec![Command::MoveRel { axis: axis0(), delta: num(1) }],
            Builtin::SetExposure => vec![Command::SetExposure { duration: num(0) }],
            Builtin::Acquire => vec![Command::Acquire],
            Builtin::SetTemp => vec![Command::SetTemperature { target: num(0) }],
            Builtin::WaitTemp => vec![Command::WaitTemperature {
                tolerance: num(0),
                timeout: if plan_args.len() > 1 { num(1) } else { DEFAULT_WAIT_TIMEOUT },
            }],
            Builtin::PowerOn => vec![Command::SetPower { on: true }],
            Builtin::PowerOff => vec![Command::SetPower { on: false }],
            Builtin::Sleep => vec![Command::Sleep { duration: num(0) }],
            Builtin::Plan => expand_plan(name, &plan_args).map_err(|e| at(e.into()))?,
            Builtin::Range => return Err(at(RuntimeErrorKind::RangeOutsideFor)),
            // value discarded in statement position
            Builtin::Math(_) => Vec::new(),
        };
        for cmd in cmds {
            self.issue(cmd, line)?;
        }
        Ok(())
    }

    fn issue(&mut self, cmd: Command, line: usize) -> Res<()> {
        self.commands.push(cmd.clone());
        self.env
            .apply(&cmd)
            .map_err(|e| RuntimeError { kind: e.into(), line })?;
        if self.env.clock() > self.limits.max_sim_seconds {
            return Err(RuntimeError {
                kind: RuntimeErrorKind::TimeLimit(self.limits.max_sim_seconds),
                line,
            });
        }
        Ok(())
    }
}

fn check_arity(name: &str, got: usize, lo: usize, hi: usize) -> Result<(), RuntimeErrorKind> {
    if got < lo || got > hi {
        let expected = if lo == hi { lo.to_string() } else { format!("{lo} to {hi}") };
        return Err(RuntimeErrorKind::Arity { name: name.into(), expected, got });
    }
    Ok(())
}

fn finite(v: f64) -> Result<Value, RuntimeErrorKind> {
    if v.is_finite() {
        Ok(Value::Number(v))
    } else {
        Err(RuntimeErrorKind::NonFinite)
    }
}
