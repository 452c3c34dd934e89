//! Acceptance criteria. Runs without the libtest harness so each criterion
//! prints exactly one PASS/FAIL line; any failure makes the binary exit 1.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use envtrace::align::{align, compare_events, matched_timestamps, Alignment, KeyMode, OpTag, VALUE_TOLERANCE};
use envtrace::bench::{aggregate, load_candidates, load_dataset, run_bench, Evaluator, RunResult, TaskRecord, TraceCache};
use envtrace::dsl::{run_source, Limits};
use envtrace::scoring::{full_score, levenshtein_norm, temp_components, timing_score, ScoringConfig};
use envtrace::{EnvConfig, ExecutionTrace};
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn trace(rel: &str) -> ExecutionTrace {
    ExecutionTrace::deserialize(read(rel).as_bytes()).unwrap()
}

fn all_tasks() -> Vec<TaskRecord> {
    ["simple", "complex", "plans"]
        .iter()
        .flat_map(|d| load_dataset(fixtures().join(format!("datasets/{d}.jsonl"))).unwrap())
        .collect()
}

fn check(cond: bool, what: String) -> Result<String, String> {
    if cond {
        Ok(what)
    } else {
        Err(what)
    }
}

// 1
fn event_counts() -> Result<String, String> {
    let start = Instant::now();
    let env = EnvConfig::default();
    let gt = run_source(&read("programs/grid_scan.ictl"), &env, None, Limits::default()).unwrap();
    let pred = run_source(&read("programs/serpentine.ictl"), &env, None, Limits::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(gt.error.is_none() && pred.error.is_none());
    let (n, m) = (gt.trace.events.len(), pred.trace.events.len());
    check(
        n == 38 && m == 36 && secs < 1.0,
        format!("grid scan {n} events (want 38), serpentine {m} (want 36), {secs:.3} s"),
    )
}

// 2
fn fixture_alignment() -> Result<String, String> {
    let gt = trace("traces/si_e_ground_truth.trace.jsonl");
    let pred = trace("traces/si_e_predicted.trace.jsonl");
    let (_, r) = compare_events(&gt.events, &pred.events, KeyMode::Name, VALUE_TOLERANCE);
    let rate = r.rate() * 100.0;
    check(
        (gt.events.len(), pred.events.len()) == (38, 36)
            && r.n_value_matches.abs_diff(24) <= 1
            && r.n_total_pairs == 40
            && (rate - 60.0).abs() <= 2.5,
        format!("{}/{} matched, rate {rate:.2}% (want 24/40, 60.00%)", r.n_value_matches, r.n_total_pairs),
    )
}

// 3
fn fixture_scores() -> Result<String, String> {
    let cfg = ScoringConfig::default();
    let gt = trace("traces/si_e_ground_truth.trace.jsonl");
    let pred = trace("traces/si_e_predicted.trace.jsonl");
    let (_, r) = compare_events(&gt.events, &pred.events, KeyMode::Name, VALUE_TOLERANCE);
    let t = timing_score(&matched_timestamps(&r, &gt.events, &pred.events), &cfg);
    let b = full_score(&r, false, t, None, false, &cfg);

    let g2 = vec![envtrace::PvEvent::new("A", 1.0, 0.0), envtrace::PvEvent::new("B", 1.0, 3.0)];
    let p1 = vec![g2[0].clone()];
    let (_, half) = compare_events(&g2, &p1, KeyMode::Name, VALUE_TOLERANCE);
    let simple = full_score(&half, false, timing_score(&[], &cfg), None, false, &cfg);
    check(
        (t.composite - 0.871).abs() <= 0.02
            && t.pass
            && (b.full_score - 0.654).abs() <= 0.02
            && !b.accuracy
            && (simple.full_score - 0.600).abs() < 1e-12,
        format!(
            "timing {:.4} (want 0.871±0.02, pass), full {:.4} (want 0.654±0.02), simple {:.3} (want 0.600)",
            t.composite, b.full_score, simple.full_score
        ),
    )
}

// 4
fn self_comparison() -> Result<String, String> {
    let tasks = all_tasks();
    let exact = Evaluator::new(EnvConfig::default());
    let mut worst = 1.0f64;
    let mut all_accurate = true;
    for t in &tasks {
        for g in &t.ground_truths {
            let single = TaskRecord { ground_truths: vec![g.clone()], ..t.clone() };
            let r = exact.evaluate(&single, g, 0);
            worst = worst.min(r.best_full_score);
            all_accurate &= r.accuracy;
        }
    }
    let jitter = Evaluator::new(EnvConfig::default().with_jitter(0.05));
    let mut scores = Vec::new();
    for seed in 0..3 {
        for t in &tasks {
            for g in &t.ground_truths {
                let single = TaskRecord { ground_truths: vec![g.clone()], ..t.clone() };
                scores.push(jitter.evaluate(&single, g, seed).best_full_score);
            }
        }
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    check(
        (worst - 1.0).abs() < 1e-12 && all_accurate && mean >= 0.97,
        format!("deterministic min full {worst:.3}, all accurate {all_accurate}; jitter 0.05 mean {mean:.4} (want >= 0.97)"),
    )
}

// 5
fn stretch_law() -> Result<String, String> {
    let pairs: Vec<(f64, f64)> = [0.0, 2.0, 3.5, 7.0, 11.0].iter().map(|&t| (t, 1.2 * t)).collect();
    let s = timing_score(&pairs, &ScoringConfig::default());
    // sub-scores from their definitions: R² 1, slope 1.2, relΔ 0.2, MAPE 0.2
    let expect = 0.4 * 1.0 + 0.2 * (1.0 - 0.2) + 0.2 * (1.0 - 0.2 / 0.25) + 0.2 * (1.0 - 0.2 / 1.0);
    check(
        (s.composite - 0.76).abs() <= 1e-12 && (expect - 0.76f64).abs() <= 1e-12 && s.pass,
        format!("composite {:.15} (want 0.76 to 1e-12), pass {}", s.composite, s.pass),
    )
}

// 6
fn temperature_analytics() -> Result<String, String> {
    let cfg = ScoringConfig::default();
    let far = temp_components(15.0, 15.0, &cfg);
    let edge = temp_components(5.0, 5.0, &cfg);
    let e1 = (-1.0f64).exp();
    let e3 = (-1.0f64 / 3.0).exp();
    check(
        (far.composite - e1).abs() <= 1e-6 && !far.pass && (edge.composite - e3).abs() <= 1e-6 && edge.pass,
        format!(
            "15/15 -> {:.6} (want {e1:.6}), 5/5 -> {:.6} pass {} (want {e3:.6}, true)",
            far.composite, edge.composite, edge.pass
        ),
    )
}

/// Brute-force longest-block recursion, written straight from the rule.
fn oracle_blocks(a: &[u8], b: &[u8], alo: usize, ahi: usize, blo: usize, bhi: usize, out: &mut Vec<(usize, usize, usize)>) {
    let mut best = (alo, blo, 0);
    for i in alo..ahi {
        for j in blo..bhi {
            let mut k = 0;
            while i + k < ahi && j + k < bhi && a[i + k] == b[j + k] {
                k += 1;
            }
            if k > best.2 {
                best = (i, j, k);
            }
        }
    }
    let (i, j, k) = best;
    if k == 0 {
        return;
    }
    oracle_blocks(a, b, alo, i, blo, j, out);
    out.push(best);
    oracle_blocks(a, b, i + k, ahi, j + k, bhi, out);
}

fn oracle_ops(a: &[u8], b: &[u8]) -> Vec<(OpTag, usize, usize, usize, usize)> {
    let mut blocks = Vec::new();
    oracle_blocks(a, b, 0, a.len(), 0, b.len(), &mut blocks);
    blocks.push((a.len(), b.len(), 0));
    let mut ops: Vec<(OpTag, usize, usize, usize, usize)> = Vec::new();
    let (mut i, mut j) = (0, 0);
    for (bi, bj, k) in blocks {
        let (la, lb) = (bi - i, bj - j);
        let c = la.min(lb);
        if c > 0 {
            ops.push((OpTag::Replace, i, i + c, j, j + c));
        }
        if la > c {
            ops.push((OpTag::Delete, i + c, bi, bj, bj));
        }
        if lb > c {
            ops.push((OpTag::Insert, bi, bi, j + c, bj));
        }
        if k > 0 {
            match ops.last_mut() {
                Some((OpTag::Equal, _, ae, _, be)) if *ae == bi && *be == bj => {
                    *ae += k;
                    *be += k;
                }
                _ => ops.push((OpTag::Equal, bi, bi + k, bj, bj + k)),
            }
        }
        i = bi + k;
        j = bj + k;
    }
    ops
}

fn flat(al: &Alignment) -> Vec<(OpTag, usize, usize, usize, usize)> {
    al.opcodes
        .iter()
        .map(|o| (o.tag, o.gt.start, o.gt.end, o.pred.start, o.pred.end))
        .collect()
}

fn textbook_levenshtein(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

// 7
fn oracles() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases = 20_000;
    let mut bad_align = 0;
    let mut bad_total = 0;
    for _ in 0..cases {
        let la = rng.random_range(0..=8);
        let lb = rng.random_range(0..=8);
        let a: Vec<u8> = (0..la).map(|_| rng.random_range(0..4u8)).collect();
        let b: Vec<u8> = (0..lb).map(|_| rng.random_range(0..4u8)).collect();
        let al = align(&a, &b);
        if flat(&al) != oracle_ops(&a, &b) {
            bad_align += 1;
        }
        let sum: usize = al
            .opcodes
            .iter()
            .map(|o| match o.tag {
                OpTag::Equal => o.gt.len(),
                OpTag::Replace => o.gt.len().max(o.pred.len()),
                OpTag::Delete => o.gt.len(),
                OpTag::Insert => o.pred.len(),
            })
            .sum();
        if sum != al.total_pairs() || sum < la.max(lb) {
            bad_total += 1;
        }
    }
    let mut bad_lev = 0;
    let alphabet = ['a', 'b', 'c', 'd'];
    for _ in 0..cases {
        let a: Vec<char> = (0..rng.random_range(0..=10)).map(|_| alphabet[rng.random_range(0..4)]).collect();
        let b: Vec<char> = (0..rng.random_range(0..=10)).map(|_| alphabet[rng.random_range(0..4)]).collect();
        let n = a.len().max(b.len());
        let want = if n == 0 { 0.0 } else { textbook_levenshtein(&a, &b) as f64 / n as f64 };
        let got = levenshtein_norm(&a.iter().collect::<String>(), &b.iter().collect::<String>());
        if (got - want).abs() > 1e-12 {
            bad_lev += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        bad_align == 0 && bad_total == 0 && bad_lev == 0 && secs < 30.0,
        format!(
            "{cases} alignment pairs: {bad_align} opcode and {bad_total} total mismatches; {cases} string pairs: {bad_lev} mismatches; {secs:.2} s"
        ),
    )
}

// 8
fn properties() -> Result<String, String> {
    let mut runner = TestRunner::new(PtConfig { cases: 64, failure_persistence: None, ..PtConfig::default() });
    let mut passed = Vec::new();

    let program = (0.0f64..5.0, -3.0f64..3.0, 0.0f64..2.0).prop_map(|(a, b, e)| {
        format!("move_abs(x, {a})\nmove_rel(y, {b})\nmeasure({e})\nfor i in range(2) {{ move_rel(z, 0.1) }}\n")
    });

    // twin determinism and monotone time
    runner
        .run(&(program.clone(), 0.0f64..0.3, any::<u64>()), |(src, jitter, seed)| {
            let env = EnvConfig::default().with_jitter(jitter).with_seed(seed);
            let a = run_source(&src, &env, None, Limits::default()).unwrap().trace;
            let b = run_source(&src, &env, None, Limits::default()).unwrap().trace;
            prop_assert_eq!(a.serialize(), b.serialize());
            prop_assert!(a.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            Ok(())
        })
        .map_err(|e| format!("determinism: {e}"))?;
    passed.push("simenv determinism/monotonicity");

    // jitter perturbs every timestamp by at most the bound, relatively
    runner
        .run(&(program.clone(), 0.0f64..0.3, any::<u64>()), |(src, jitter, seed)| {
            let base = run_source(&src, &EnvConfig::default(), None, Limits::default()).unwrap().trace;
            let env = EnvConfig::default().with_jitter(jitter).with_seed(seed);
            let j = run_source(&src, &env, None, Limits::default()).unwrap().trace;
            prop_assert_eq!(base.events.len(), j.events.len());
            for (a, b) in base.events.iter().zip(&j.events) {
                prop_assert!((a.timestamp - b.timestamp).abs() <= jitter * a.timestamp + 2e-6);
            }
            Ok(())
        })
        .map_err(|e| format!("lipschitz: {e}"))?;
    passed.push("simenv Lipschitz in jitter");

    // timing shift and scale
    let times = proptest::collection::vec(0.0f64..100.0, 3..20).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    });
    runner
        .run(&(times, -50.0f64..50.0, 0.5f64..1.5), |(ts, shift, k)| {
            let cfg = ScoringConfig::default();
            let base: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 1.1 * t)).collect();
            let shifted: Vec<(f64, f64)> = base.iter().map(|&(g, p)| (g, p + shift)).collect();
            let a = timing_score(&base, &cfg);
            let b = timing_score(&shifted, &cfg);
            prop_assert!((a.composite - b.composite).abs() < 1e-9);
            let span = ts[ts.len() - 1] - ts[0];
            prop_assume!(span > 1e-6);
            let scaled: Vec<(f64, f64)> = ts.iter().map(|&t| (t, k * t)).collect();
            let s = timing_score(&scaled, &cfg);
            prop_assert!((s.slope - k).abs() < 1e-9);
            prop_assert!((s.r2 - 1.0).abs() < 1e-9);
            Ok(())
        })
        .map_err(|e| format!("timing invariances: {e}"))?;
    passed.push("timing shift/scale");

    // cache transparency
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tasks = all_tasks();
    let strong = load_candidates(fixtures().join("candidates/strong.json")).unwrap();
    let cached = Evaluator::new(EnvConfig::default()).with_cache(TraceCache::open(dir.path()).unwrap());
    let cold = run_bench(&cached, &tasks, &strong, 1, 3, 4).unwrap();
    let warm = run_bench(&cached, &tasks, &strong, 1, 3, 4).unwrap();
    let uncached = run_bench(&Evaluator::new(EnvConfig::default()), &tasks, &strong, 1, 3, 1).unwrap();
    let ser = |r: &[RunResult]| serde_json::to_vec(r).unwrap();
    if ser(&cold) != ser(&warm) || ser(&cold) != ser(&uncached) {
        return Err("cache transparency: warm and cold results differ".into());
    }
    passed.push("cache transparency");

    // totality: random bytes never crash the grader
    let task = tasks[0].clone();
    let ev = Evaluator::new(EnvConfig::default());
    runner
        .run(&proptest::collection::vec(any::<u8>(), 0..200), |bytes| {
            let text = String::from_utf8_lossy(&bytes);
            let r = ev.evaluate(&task, &text, 0);
            prop_assert!((0.0..=1.0).contains(&r.best_full_score));
            Ok(())
        })
        .map_err(|e| format!("totality: {e}"))?;
    passed.push("grader totality");

    Ok(passed.join(", "))
}

// 9
fn strong_beats_weak() -> Result<String, String> {
    let tasks = all_tasks();
    let ev = Evaluator::new(EnvConfig::default());
    let mean = |file: &str| {
        let c: BTreeMap<String, Vec<String>> = load_candidates(fixtures().join(file)).unwrap();
        aggregate(&run_bench(&ev, &tasks, &c, 3, 0, 4).unwrap()).unwrap()
    };
    let s = mean("candidates/strong.json");
    let w = mean("candidates/weak.json");
    check(
        s.full_score.mean > w.full_score.mean,
        format!(
            "strong {:.3} ± {:.3} vs weak {:.3} ± {:.3} mean full score over {} tasks x 3 runs",
            s.full_score.mean, s.full_score.std, w.full_score.mean, w.full_score.std, s.tasks
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<String, String>); 9] = [
        ("1 event counts", event_counts),
        ("2 fixture alignment", fixture_alignment),
        ("3 fixture scores", fixture_scores),
        ("4 self comparison", self_comparison),
        ("5 stretch law", stretch_law),
        ("6 temperature analytics", temperature_analytics),
        ("7 oracle equivalence", oracles),
        ("8 property suites", properties),
        ("9 strong over weak", strong_beats_weak),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
