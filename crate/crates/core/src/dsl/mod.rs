//! A small imperative language for instrument control programs (`.ictl`).
//!
//! Statements end at a newline or `;`, blocks use braces, `#` starts a comment.
//! Builtin calls lower to twin [`Command`]s; see `docs/dsl.md` for the grammar.
//!
//! ```text
//! for x in range(0, 0.3 + 0.15/2, 0.15) {
//!     for y in range(0, 0.6 + 0.2/2, 0.2) {
//!         move_abs(x, x)
//!         move_abs(y, y)
//!         measure(1)
//!     }
//! }
//! ```

pub mod ast;
mod interp;
mod lexer;
mod parser;
pub mod plans;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use ast::Program;
pub use interp::{
    execute, interpret, range_len, Execution, Limits, RuntimeError, RuntimeErrorKind, RuntimeFailure, Value,
    DEFAULT_WAIT_TIMEOUT,
};
pub use parser::parse;
pub use plans::{expand_plan, PlanArg, PlanError};

use crate::simenv::{EnvConfig, Environment, SimError, StateSnapshot};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { line, column, message: message.into() }
    }
}

/// Whitespace- and comment-insensitive form of a source text: comments
/// stripped, each line trimmed, inner whitespace runs collapsed to one space,
/// blank lines dropped. Token spacing is otherwise preserved, so `a=1` and
/// `a = 1` stay different.
pub fn canonicalize(source: &str) -> String {
    source
        .lines()
        .map(|l| {
            let code = l.split('#').next().unwrap_or("");
            code.split_whitespace().collect::<Vec<_>>().join(" ")
        })
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Hex SHA-256 of the canonical form.
pub fn digest(source: &str) -> String {
    hex::encode(Sha256::digest(canonicalize(source).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Setup(#[from] SimError),
}

/// Parse `source` and execute it in a fresh environment built from `config`,
/// optionally preloaded from `snapshot`.
pub fn run_source(
    source: &str,
    config: &EnvConfig,
    snapshot: Option<&StateSnapshot>,
    limits: Limits,
) -> Result<Execution, RunError> {
    let prog = parse(source)?;
    let mut env = Environment::new(config.clone())?;
    if let Some(s) = snapshot {
        env.load_snapshot(s)?;
    }
    Ok(execute(&prog, &mut env, limits))
}
