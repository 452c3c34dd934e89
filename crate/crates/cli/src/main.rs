use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use envtrace::align::render_diff;
use envtrace::bench::{
    aggregate, load_candidates, load_dataset, render_report, run_bench, BenchError, BenchReport, Evaluator,
    ReportFormat, TaskRecord, TraceCache,
};
use envtrace::dsl::{execute, parse, Limits};
use envtrace::scoring::{grade_traces, ScoringConfig};
use envtrace::{EnvConfig, Environment, ExecutionTrace, StateSnapshot};

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "envtrace", version, about = "Run, grade and benchmark instrument control programs on a simulated beamline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a program and write its trace.
    Run {
        program: PathBuf,
        #[command(flatten)]
        env: EnvArgs,
        /// Trace output file; stdout when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Grade a candidate program against one or more ground truths.
    Eval {
        #[arg(long = "gt", required = true)]
        gt: Vec<PathBuf>,
        #[arg(long)]
        cand: PathBuf,
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Grade a candidates file against a dataset over several runs.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        runs: u32,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        parallel: u64,
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Side-by-side comparison of two traces. Inputs may be `.trace.jsonl`
    /// files or programs, which are run first.
    DiffTraces {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        cand: PathBuf,
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct EnvArgs {
    /// Twin configuration (JSON); built-in defaults when omitted.
    #[arg(long = "env")]
    config: Option<PathBuf>,
    /// Initial device state (JSON).
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative timing jitter bound in [0, 1); overrides the config.
    #[arg(long)]
    jitter: Option<f64>,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_parser = ["json", "csv", "md"])]
    format: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code; the message goes to stderr.
struct Fail(u8, String);

impl From<BenchError> for Fail {
    fn from(e: BenchError) -> Self {
        let code = match e {
            BenchError::UnknownFormat(_) | BenchError::Usage(_) | BenchError::Empty => EXIT_USAGE,
            _ => EXIT_CONFIG,
        };
        Fail(code, e.to_string())
    }
}

fn read_text(path: &Path, code: u8) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail(code, format!("{}: {e}", path.display())))
}

impl EnvArgs {
    fn load(&self) -> Result<(EnvConfig, Option<StateSnapshot>), Fail> {
        let mut cfg = match &self.config {
            Some(p) => EnvConfig::from_json(&read_text(p, EXIT_CONFIG)?)
                .map_err(|e| Fail(EXIT_CONFIG, format!("{}: {e}", p.display())))?,
            None => EnvConfig::default(),
        };
        if let Some(j) = self.jitter {
            cfg = cfg.with_jitter(j);
        }
        cfg = cfg.with_seed(self.seed);
        cfg.validate().map_err(|e| Fail(EXIT_CONFIG, e.to_string()))?;
        let snap = match &self.snapshot {
            Some(p) => Some(
                StateSnapshot::from_json(&read_text(p, EXIT_CONFIG)?)
                    .map_err(|e| Fail(EXIT_CONFIG, format!("{}: {e}", p.display())))?,
            ),
            None => None,
        };
        Ok((cfg, snap))
    }

    fn evaluator(&self) -> Result<Evaluator, Fail> {
        let (cfg, snap) = self.load()?;
        let mut ev = Evaluator::new(cfg);
        ev.snapshot = snap;
        let dir = std::env::var_os("ENVTRACE_CACHE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("envtrace-cache"));
        match TraceCache::open(&dir) {
            Ok(c) => ev.cache = Some(c),
            Err(e) => eprintln!("warning: cache disabled ({}: {e})", dir.display()),
        }
        Ok(ev)
    }
}

impl OutArgs {
    fn format(&self, default: ReportFormat) -> ReportFormat {
        self.format
            .as_deref()
            .map(|f| f.parse().expect("clap restricts the values"))
            .unwrap_or(default)
    }

    fn emit(&self, bytes: &[u8]) -> Result<(), Fail> {
        write_output(self.out.as_deref(), bytes)
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), Fail> {
    let res = match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout().write_all(bytes).map_err(|e| e.to_string()),
    };
    res.map_err(|m| Fail(EXIT_USAGE, m))
}

fn parse_program(path: &Path) -> Result<envtrace::Program, Fail> {
    let src = read_text(path, EXIT_USAGE)?;
    parse(&src).map_err(|e| {
        Fail(
            EXIT_PARSE,
            format!("{}:{}:{}: {}", path.display(), e.line, e.column, e.message),
        )
    })
}

fn run_program(path: &Path, cfg: &EnvConfig, snap: Option<&StateSnapshot>) -> Result<(ExecutionTrace, Option<String>), Fail> {
    let prog = parse_program(path)?;
    let mut env = Environment::new(cfg.clone()).map_err(|e| Fail(EXIT_CONFIG, e.to_string()))?;
    if let Some(s) = snap {
        env.load_snapshot(s).map_err(|e| Fail(EXIT_CONFIG, e.to_string()))?;
    }
    let exec = execute(&prog, &mut env, Limits::default());
    let err = exec.error.map(|e| format!("{}:{e}", path.display()));
    Ok((exec.trace, err))
}

fn cmd_run(program: &Path, env: &EnvArgs, trace_out: Option<&Path>) -> Result<(), Fail> {
    let (cfg, snap) = env.load()?;
    let (trace, err) = run_program(program, &cfg, snap.as_ref())?;
    write_output(trace_out, &trace.serialize())?;
    if let Some(out) = trace_out {
        eprintln!("{} events, {:.3} s simulated -> {}", trace.events.len(), trace.meta.duration, out.display());
    }
    match err {
        Some(e) => Err(Fail(EXIT_RUNTIME, e)),
        None => Ok(()),
    }
}

fn cmd_eval(gts: &[PathBuf], cand: &Path, env: &EnvArgs, out: &OutArgs) -> Result<(), Fail> {
    let mut sources = Vec::new();
    for g in gts {
        parse_program(g)?;
        sources.push(read_text(g, EXIT_USAGE)?);
    }
    let candidate = read_text(cand, EXIT_USAGE)?;
    let ev = env.evaluator()?;
    let task = TaskRecord {
        task_id: cand.display().to_string(),
        prompt: String::new(),
        has_temperature: None,
        ground_truths: sources,
        tracked_pvs: None,
        tags: vec![],
    };
    let r = ev.evaluate(&task, &candidate, env.seed);
    if let Some(e) = &r.candidate_error {
        eprintln!("candidate: {e}");
    }
    let bytes = match out.format(ReportFormat::Md) {
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(&r).expect("result serializes");
            v.push(b'\n');
            v
        }
        _ => {
            let mut s = String::new();
            if gts.len() > 1 {
                s.push_str(&format!("Best ground truth: {}\n", gts[r.best_gt].display()));
            }
            s.push_str(&r.per_gt[r.best_gt].summary());
            s.push_str(&format!("Exact match: {}\n", r.exact_match));
            s.push_str(&format!("Normalized Levenshtein: {:.4}\n", r.levenshtein_norm));
            s.into_bytes()
        }
    };
    out.emit(&bytes)
}

fn cmd_bench(
    dataset: &Path,
    candidates: &Path,
    runs: u32,
    parallel: usize,
    env: &EnvArgs,
    out: &OutArgs,
) -> Result<(), Fail> {
    let tasks = load_dataset(dataset)?;
    let cands = load_candidates(candidates)?;
    let ev = env.evaluator()?;
    let results = run_bench(&ev, &tasks, &cands, runs, env.seed, parallel)?;
    let model = candidates
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let report = BenchReport { model, summary: aggregate(&results)?, tasks: results };
    out.emit(&render_report(&report, out.format(ReportFormat::Md)))
}

fn load_trace(path: &Path, cfg: &EnvConfig, snap: Option<&StateSnapshot>) -> Result<ExecutionTrace, Fail> {
    let name = path.to_string_lossy();
    if name.ends_with(".jsonl") {
        let bytes = std::fs::read(path).map_err(|e| Fail(EXIT_USAGE, format!("{}: {e}", path.display())))?;
        ExecutionTrace::deserialize(&bytes).map_err(|e| Fail(EXIT_CONFIG, format!("{}: {e}", path.display())))
    } else {
        let (t, err) = run_program(path, cfg, snap)?;
        if let Some(e) = err {
            eprintln!("{e}");
        }
        Ok(t)
    }
}

fn cmd_diff(gt: &Path, cand: &Path, env: &EnvArgs, out: &OutArgs) -> Result<(), Fail> {
    let (cfg, snap) = env.load()?;
    let g = load_trace(gt, &cfg, snap.as_ref())?;
    let c = load_trace(cand, &cfg, snap.as_ref())?;
    let grade = grade_traces(&g, &c, &cfg, &ScoringConfig::default(), None);
    let bytes = match out.format(ReportFormat::Md) {
        ReportFormat::Json => {
            let rows = envtrace::align::diff_rows(&grade.alignment, &grade.report);
            let v = serde_json::json!({ "rows": rows, "breakdown": grade.breakdown });
            let mut b = serde_json::to_vec_pretty(&v).expect("json");
            b.push(b'\n');
            b
        }
        _ => {
            let mut s = render_diff(&g.events, &c.events, &grade.alignment, &grade.report);
            s.push_str(&grade.breakdown.summary());
            s.into_bytes()
        }
    };
    out.emit(&bytes)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.command {
        Cmd::Run { program, env, trace } => cmd_run(program, env, trace.as_deref()),
        Cmd::Eval { gt, cand, env, out } => cmd_eval(gt, cand, env, out),
        Cmd::Bench { dataset, candidates, runs, parallel, env, out } => {
            cmd_bench(dataset, candidates, *runs, *parallel as usize, env, out)
        }
        Cmd::DiffTraces { gt, cand, env, out } => cmd_diff(gt, cand, env, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
