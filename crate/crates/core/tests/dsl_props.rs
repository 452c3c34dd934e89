use envtrace::dsl::{execute, parse, range_len, run_source, Limits, RuntimeErrorKind};
use envtrace::simenv::{Command, EnvConfig, Environment};
use proptest::prelude::*;

/// A command together with the source line that should lower to it.
fn statement() -> impl Strategy<Value = (String, Command)> {
    let axis = prop_oneof![Just("x"), Just("y"), Just("z")];
    prop_oneof![
        (axis.clone(), -40.0f64..40.0)
            .prop_map(|(a, t)| (format!("move_abs({a}, {t})"), Command::MoveAbs { axis: a.into(), target: t })),
        (axis, -5.0f64..5.0)
            .prop_map(|(a, d)| (format!("move_rel({a}, {d})"), Command::MoveRel { axis: a.into(), delta: d })),
        (0.0f64..3.0).prop_map(|d| (format!("set_exposure({d})"), Command::SetExposure { duration: d })),
        Just(("acquire()".to_string(), Command::Acquire)),
        (0.0f64..100.0).prop_map(|t| (format!("set_temp({t})"), Command::SetTemperature { target: t })),
        (0.5f64..5.0).prop_map(|tol| (
            format!("wait_temp({tol}, 1000)"),
            Command::WaitTemperature { tolerance: tol, timeout: 1000.0 }
        )),
        Just(("power_on()".to_string(), Command::SetPower { on: true })),
        Just(("power_off()".to_string(), Command::SetPower { on: false })),
        (0.0f64..20.0).prop_map(|d| (format!("sleep({d})"), Command::Sleep { duration: d })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn straight_line_lowering(stmts in proptest::collection::vec(statement(), 0..8)) {
        let src: String = stmts.iter().map(|(s, _)| format!("{s}\n")).collect();
        let expect: Vec<Command> = stmts.into_iter().map(|(_, c)| c).collect();
        let mut env = Environment::new(EnvConfig::default()).unwrap();
        let exec = execute(&parse(&src).unwrap(), &mut env, Limits::default());
        prop_assert!(exec.error.is_none(), "{:?}", exec.error);
        prop_assert_eq!(exec.commands, expect);
    }

    #[test]
    fn fresh_runs_agree(stmts in proptest::collection::vec(statement(), 0..8), seed: u64) {
        let src: String = stmts.iter().map(|(s, _)| format!("{s}\n")).collect();
        let src = format!("for i in range(2) {{\n{src}}}\n");
        let cfg = EnvConfig::default().with_jitter(0.1).with_seed(seed);
        let a = run_source(&src, &cfg, None, Limits::default()).unwrap().trace;
        let b = run_source(&src, &cfg, None, Limits::default()).unwrap().trace;
        prop_assert_eq!(a.serialize(), b.serialize());
    }

    #[test]
    fn range_length(start in -10.0f64..10.0, span in 0.0f64..10.0, step in 0.01f64..3.0) {
        let stop = start + span;
        let src = format!("n = 0\nfor v in range({start}, {stop}, {step}) {{ n = n + 1 }}\nsleep(n)\n");
        let t = run_source(&src, &EnvConfig::default(), None, Limits::default()).unwrap().trace;
        let expect = ((stop - start) / step - 1e-12).ceil().max(0.0);
        prop_assert_eq!(range_len(start, stop, step) as f64, expect);
        prop_assert!((t.meta.duration - expect).abs() < 1e-6);
    }

    #[test]
    fn step_budget(max_steps in 1u64..200) {
        let src = "n = 0\nwhile true { n = n + 1 }";
        let limits = Limits { max_steps, ..Limits::default() };
        let exec = run_source(src, &EnvConfig::default(), None, limits).unwrap();
        let err = exec.error.expect("infinite loop must stop");
        prop_assert!(matches!(err.kind, RuntimeErrorKind::StepLimit(..)), "{:?}", err.kind);
    }
}

#[test]
fn arange_endpoint_idiom() {
    assert_eq!(range_len(0.0, 0.3 + 0.15 / 2.0, 0.15), 3);
    assert_eq!(range_len(0.0, 0.6 + 0.2 / 2.0, 0.2), 4);
}
