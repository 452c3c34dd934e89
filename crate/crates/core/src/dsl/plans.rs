//! Built-in measurement plans: fixed command expansions so that a one-line
//! plan call and its hand-written equivalent produce the same trace.

use thiserror::Error;

use crate::simenv::Command;

/// Axis the alignment routine scans.
pub const ALIGN_AXIS: &str = "z";
pub const ALIGN_EXPOSURE: f64 = 0.5;
pub const ALIGN_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum PlanArg {
    Axis(String),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("unknown plan `{0}`")]
    Unknown(String),
    #[error("plan `{plan}` takes {expected} arguments, got {got}")]
    Arity { plan: String, expected: usize, got: usize },
    #[error("plan `{plan}` argument {index}: {reason}")]
    Argument { plan: String, index: usize, reason: String },
}

pub const PLAN_NAMES: &[&str] = &["grid_scan", "outer_product_scan", "measure", "align"];

pub fn is_plan(name: &str) -> bool {
    PLAN_NAMES.contains(&name)
}

/// Expand a registered plan into the commands it runs.
///
/// * `measure(t)` sets the exposure then acquires once.
/// * `grid_scan(ax1, a, b, n1, ax2, c, d, n2, exposure)` visits the outer
///   product of `n1` evenly spaced points on `[a, b]` and `n2` points on
///   `[c, d]` (endpoints inclusive), moving both axes and measuring at each.
///   `outer_product_scan` is the same plan under its older name.
/// * `align()` rocks the `z` axis through offsets -0.1, 0, +0.1 taking a
///   short exposure at each, returns to the start and takes a final frame.
pub fn expand_plan(name: &str, args: &[PlanArg]) -> Result<Vec<Command>, PlanError> {
    let arity = |expected: usize| {
        if args.len() == expected {
            Ok(())
        } else {
            Err(PlanError::Arity { plan: name.to_string(), expected, got: args.len() })
        }
    };
    match name {
        "measure" => {
            arity(1)?;
            let t = number(name, args, 0)?;
            if t < 0.0 {
                return Err(arg_err(name, 0, "exposure must be >= 0"));
            }
            Ok(vec![Command::SetExposure { duration: t }, Command::Acquire])
        }
        "align" => {
            arity(0)?;
            let z = ALIGN_AXIS.to_string();
            let rel = |delta: f64| Command::MoveRel { axis: z.clone(), delta };
            Ok(vec![
                Command::SetExposure { duration: ALIGN_EXPOSURE },
                rel(-ALIGN_STEP),
                Command::Acquire,
                rel(ALIGN_STEP),
                Command::Acquire,
                rel(ALIGN_STEP),
                Command::Acquire,
                rel(-ALIGN_STEP),
                Command::Acquire,
            ])
        }
        "grid_scan" | "outer_product_scan" => {
            arity(9)?;
            let ax1 = axis(name, args, 0)?;
            let p1 = linspace(name, args, 1)?;
            let ax2 = axis(name, args, 4)?;
            let p2 = linspace(name, args, 5)?;
            let exposure = number(name, args, 8)?;
            if exposure < 0.0 {
                return Err(arg_err(name, 8, "exposure must be >= 0"));
            }
            let mut out = Vec::with_capacity(p1.len() * p2.len() * 4);
            for &a in &p1 {
                for &b in &p2 {
                    out.push(Command::MoveAbs { axis: ax1.clone(), target: a });
                    out.push(Command::MoveAbs { axis: ax2.clone(), target: b });
                    out.push(Command::SetExposure { duration: exposure });
                    out.push(Command::Acquire);
                }
            }
            Ok(out)
        }
        _ => Err(PlanError::Unknown(name.to_string())),
    }
}

fn arg_err(plan: &str, index: usize, reason: &str) -> PlanError {
    PlanError::Argument { plan: plan.to_string(), index, reason: reason.to_string() }
}

fn number(plan: &str, args: &[PlanArg], i: usize) -> Result<f64, PlanError> {
    match &args[i] {
        PlanArg::Number(v) if v.is_finite() => Ok(*v),
        PlanArg::Number(_) => Err(arg_err(plan, i, "must be finite")),
        PlanArg::Axis(_) => Err(arg_err(plan, i, "expected a number, found an axis")),
    }
}

fn axis(plan: &str, args: &[PlanArg], i: usize) -> Result<String, PlanError> {
    match &args[i] {
        PlanArg::Axis(a) => Ok(a.clone()),
        PlanArg::Number(_) => Err(arg_err(plan, i, "expected an axis")),
    }
}

/// `n` points from `start` to `stop` inclusive, read from args `i..i+3`.
fn linspace(plan: &str, args: &[PlanArg], i: usize) -> Result<Vec<f64>, PlanError> {
    let start = number(plan, args, i)?;
    let stop = number(plan, args, i + 1)?;
    let n = number(plan, args, i + 2)?;
    if n < 1.0 || n.fract() != 0.0 {
        return Err(arg_err(plan, i + 2, "point count must be an integer >= 1"));
    }
    let n = n as usize;
    if n == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| if k == n - 1 { stop } else { start + k as f64 * step })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n1: f64, n2: f64) -> Vec<PlanArg> {
        use PlanArg::*;
        vec![
            Axis("x".into()),
            Number(0.0),
            Number(5.0),
            Number(n1),
            Axis("y".into()),
            Number(0.0),
            Number(10.0),
            Number(n2),
            Number(1.0),
        ]
    }

    #[test]
    fn measure_definition() {
        assert_eq!(
            expand_plan("measure", &[PlanArg::Number(1.0)]).unwrap(),
            vec![Command::SetExposure { duration: 1.0 }, Command::Acquire]
        );
    }

    #[test]
    fn grid_scan_visits_outer_product() {
        let cmds = expand_plan("grid_scan", &grid(6.0, 5.0)).unwrap();
        assert_eq!(cmds.len(), 30 * 4);
        let acquires = cmds.iter().filter(|c| **c == Command::Acquire).count();
        assert_eq!(acquires, 30);
        let xs: Vec<f64> = cmds
            .iter()
            .filter_map(|c| match c {
                Command::MoveAbs { axis, target } if axis == "x" => Some(*target),
                _ => None,
            })
            .step_by(5)
            .collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(cmds, expand_plan("outer_product_scan", &grid(6.0, 5.0)).unwrap());
    }

    #[test]
    fn grid_scan_rejects_zero_points() {
        assert!(matches!(
            expand_plan("grid_scan", &grid(0.0, 5.0)),
            Err(PlanError::Argument { index: 3, .. })
        ));
    }

    #[test]
    fn align_is_fixed() {
        let cmds = expand_plan("align", &[]).unwrap();
        assert_eq!(cmds.len(), 9);
        let net: f64 = cmds
            .iter()
            .filter_map(|c| match c {
                Command::MoveRel { delta, .. } => Some(*delta),
                _ => None,
            })
            .sum();
        assert!(net.abs() < 1e-15);
    }

    #[test]
    fn unknown_and_arity() {
        assert!(matches!(expand_plan("nope", &[]), Err(PlanError::Unknown(_))));
        assert!(matches!(expand_plan("align", &[PlanArg::Number(1.0)]), Err(PlanError::Arity { .. })));
    }
}
