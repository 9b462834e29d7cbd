//! Command-line driver.
//!
//! Exit codes: 0 success, 2 usage, 3 unreadable or malformed input,
//! 4 time limit or iteration budget reached (partial result written),
//! 5 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bracket::{solve_observed, BracketParams, BracketResult, BracketStatus, CopEvaluator, Method, TraceRecord};
use crate::error::{Error, Result};
use crate::io::{read_instance, trace_to_json, write_result, Format, Instance, ResultRecord, RunSettings};
use crate::model::{build_bqop, build_dnn, build_qap, lagrangian, qap_tight_rho, Rho, DEFAULT_LAMBDA};
use crate::oracle::{brute_bqop, brute_qap};
use crate::synth::{random_bqop, random_qap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "lagdnn", version, about = "Certified lower bounds for binary QPs and QAPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Bound a binary quadratic program (BIQMAC format).
    SolveBqp(SolveCmd),
    /// Bound a quadratic assignment problem (QAPLIB format).
    SolveQap(SolveCmd),
    /// Exact optimum by enumeration (small instances only).
    Oracle(OracleCmd),
    /// Solve every instance listed in a TOML manifest.
    Bench(BenchCmd),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Instance file.
    #[arg(required_unless_present = "random")]
    path: Option<PathBuf>,
    /// Generate a random instance of this size instead of reading a file.
    #[arg(long, conflicts_with = "path")]
    random: Option<usize>,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of nonzero entries for random binary instances.
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    /// Treat BIQMAC data as a minimization problem instead of negating it.
    #[arg(long)]
    no_negate: bool,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value = "secant", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Trace bound: auto, qap-tight, or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_rho)]
    rho: RhoArg,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_apg_iter: usize,
    #[arg(long, default_value_t = 60)]
    max_outer: usize,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    y0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y1: Option<f64>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Emit one trace line per outer iteration (stderr unless --trace-out).
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Result file (stdout by default).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct OracleCmd {
    #[command(flatten)]
    input: InputArgs,
    /// Instance kind for --random.
    #[arg(long, default_value = "bqp", value_parser = ["bqp", "qap"])]
    kind: String,
}

#[derive(Args, Debug)]
struct BenchCmd {
    manifest: PathBuf,
    /// Parallel workers.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    no_negate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum RhoArg {
    Auto,
    QapTight,
    Value(f64),
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_rho(s: &str) -> std::result::Result<RhoArg, String> {
    match s {
        "auto" => Ok(RhoArg::Auto),
        "qap-tight" => Ok(RhoArg::QapTight),
        v => match v.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(RhoArg::Value(x)),
            _ => Err(format!("expected auto, qap-tight or a positive number, got '{v}'")),
        },
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(rename = "instance", default)]
    instances: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    path: PathBuf,
    format: Option<Format>,
    best_known: Option<f64>,
    method: Option<String>,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Io(_) => EXIT_PARSE,
        Error::Numerical(_) | Error::NotConverged { .. } => EXIT_NUMERICAL,
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::TooLarge { .. } => EXIT_USAGE,
    }
}

fn status_code(s: BracketStatus) -> i32 {
    match s {
        BracketStatus::Converged => EXIT_OK,
        BracketStatus::MaxOuter | BracketStatus::TimeLimit => EXIT_PARTIAL,
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = match cli.cmd {
        Cmd::SolveBqp(c) => solve_cmd(c, Format::Biqmac),
        Cmd::SolveQap(c) => solve_cmd(c, Format::Qaplib),
        Cmd::Oracle(c) => oracle_cmd(c),
        Cmd::Bench(c) => bench_cmd(c),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

type Sink = Box<dyn Write + Send>;

fn open_sink(path: Option<&Path>, fallback: fn() -> Sink) -> Result<Sink> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?))),
        None => Ok(fallback()),
    }
}

fn load(input: &InputArgs, format: Format) -> Result<(String, Instance)> {
    if let Some(r) = input.random {
        if r == 0 {
            return Err(Error::invalid("--random needs a size of at least 1"));
        }
        return Ok(match format {
            Format::Biqmac => (
                format!("random-bqp-r{r}-s{}", input.seed),
                Instance::Bqop(random_bqop(r, input.density, input.seed)),
            ),
            Format::Qaplib => {
                let (a, b) = random_qap(r, input.seed);
                (format!("random-qap-r{r}-s{}", input.seed), Instance::Qap(a, b))
            }
        });
    }
    let path = input.path.as_ref().expect("clap enforces path or --random");
    let (_, inst) = read_instance(path, Some(format))?;
    Ok((instance_name(path), inst))
}

fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn bracket_params(s: &SolverArgs) -> BracketParams {
    let mut p = BracketParams {
        delta: s.delta,
        eps: s.eps,
        alpha: s.alpha,
        y0: s.y0,
        y1: s.y1,
        max_outer: s.max_outer,
        time_limit: s.time_limit.map(Duration::from_secs_f64),
        ..BracketParams::default()
    };
    p.apg.tol = s.tol;
    p.apg.eps = s.eps;
    p.apg.max_iter = s.max_apg_iter;
    p
}

/// Builds the Lagrangian problem for `inst` and runs the chosen method,
/// streaming trace records to `observer`.
fn solve_one(
    name: &str,
    inst: &Instance,
    s: &SolverArgs,
    method: Method,
    negate: bool,
    observer: Option<&mut dyn FnMut(&TraceRecord)>,
) -> Result<(ResultRecord, BracketResult)> {
    let (model, r, is_qap) = match inst {
        Instance::Bqop(f) => (build_bqop(f, negate)?, f.nrows(), false),
        Instance::Qap(a, b) => (build_qap(a, b)?, a.nrows(), true),
    };
    let rho = match s.rho {
        RhoArg::Auto => Rho::Auto,
        RhoArg::Value(v) => Rho::Value(v),
        RhoArg::QapTight if is_qap => Rho::Value(qap_tight_rho(r)),
        RhoArg::QapTight => return Err(Error::invalid("--rho qap-tight applies to QAP instances only")),
    };
    let cop = lagrangian(Arc::new(build_dnn(&model)?), s.lambda, rho)?;
    let params = bracket_params(s);
    let mut ev = CopEvaluator::new(&cop, params.apg.clone());
    let res = solve_observed(&mut ev, method, &params, observer)?;
    let settings = RunSettings {
        lambda: cop.lambda,
        rho: cop.rho,
        delta: s.delta,
        eps: s.eps,
        tol: s.tol,
    };
    Ok((ResultRecord::new(name, r, &res, settings), res))
}

fn stdout_sink() -> Sink {
    Box::new(io::stdout())
}

fn stderr_sink() -> Sink {
    Box::new(io::stderr())
}

fn trace_sink(s: &SolverArgs) -> Result<Option<Sink>> {
    if !s.trace && s.trace_out.is_none() {
        return Ok(None);
    }
    open_sink(s.trace_out.as_deref(), stderr_sink).map(Some)
}

fn solve_cmd(c: SolveCmd, format: Format) -> Result<i32> {
    let (name, inst) = load(&c.input, format)?;
    let mut out = open_sink(c.solver.out.as_deref(), stdout_sink)?;
    let mut trace = trace_sink(&c.solver)?;
    let mut write_err = None;
    let mut obs = |rec: &TraceRecord| {
        if let Some(t) = trace.as_mut() {
            let line = trace_to_json(&name, rec).map(|l| writeln!(t, "{l}"));
            if let Ok(Err(e)) | Err(e) = line.map_err(|e| io::Error::other(e.to_string())) {
                write_err.get_or_insert(e);
            }
        }
    };
    let (rec, res) = solve_one(&name, &inst, &c.solver, c.solver.method, !c.input.no_negate, Some(&mut obs))?;
    if let Some(e) = write_err {
        return Err(Error::Io(e.to_string()));
    }
    if let Some(t) = trace.as_mut() {
        t.flush().map_err(|e| Error::Io(e.to_string()))?;
    }
    write_result(&mut out, &rec)?;
    out.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(status_code(res.status))
}

fn oracle_cmd(c: OracleCmd) -> Result<i32> {
    let (name, inst) = match (&c.input.path, c.kind.as_str()) {
        (Some(p), _) => {
            let (_, inst) = read_instance(p, None)?;
            (instance_name(p), inst)
        }
        (None, "qap") => load(&c.input, Format::Qaplib)?,
        (None, _) => load(&c.input, Format::Biqmac)?,
    };
    let line = match inst {
        Instance::Bqop(f) => {
            let f = if c.input.no_negate { f } else { -f };
            let (opt, v) = brute_bqop(&f)?;
            let v: Vec<u8> = v.into_iter().map(u8::from).collect();
            serde_json::json!({ "instance": name, "kind": "bqp", "opt": opt, "argmin": v })
        }
        Instance::Qap(a, b) => {
            let (opt, p) = brute_qap(&a, &b)?;
            let p: Vec<usize> = p.into_iter().map(|i| i + 1).collect();
            serde_json::json!({ "instance": name, "kind": "qap", "opt": opt, "argmin": p })
        }
    };
    println!("{line}");
    Ok(EXIT_OK)
}

fn bench_cmd(c: BenchCmd) -> Result<i32> {
    let text = std::fs::read_to_string(&c.manifest).map_err(|e| io_err(&c.manifest, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start].lines().count().max(1))
            .unwrap_or(1);
        Error::parse(line, e.message().to_string())
    })?;
    let base = c.manifest.parent().unwrap_or(Path::new("."));
    let entries: Vec<(PathBuf, &ManifestEntry)> = manifest
        .instances
        .iter()
        .map(|e| (base.join(&e.path), e))
        .collect();
    for (_, e) in &entries {
        if let Some(m) = &e.method {
            m.parse::<Method>()?;
        }
    }
    let out = Mutex::new(open_sink(c.solver.out.as_deref(), stdout_sink)?);
    let trace = Mutex::new(trace_sink(&c.solver)?);
    let next = AtomicUsize::new(0);
    let worst = Mutex::new(EXIT_OK);
    let jobs = c.jobs.clamp(1, entries.len().max(1));

    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some((path, entry)) = entries.get(i) else { break };
        let code = match bench_one(path, entry, &c, &out, &trace) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                exit_code(&e)
            }
        };
        let mut w = worst.lock().unwrap();
        *w = (*w).max(code);
    };
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(worker);
        }
    });
    out.lock()
        .unwrap()
        .flush()
        .map_err(|e| Error::Io(e.to_string()))?;
    if let Some(t) = trace.lock().unwrap().as_mut() {
        t.flush().map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(worst.into_inner().unwrap())
}

fn bench_one(
    path: &Path,
    entry: &ManifestEntry,
    c: &BenchCmd,
    out: &Mutex<Sink>,
    trace: &Mutex<Option<Sink>>,
) -> Result<i32> {
    let (_, inst) = read_instance(path, entry.format)?;
    let name = instance_name(path);
    let method = match &entry.method {
        Some(m) => m.parse()?,
        None => c.solver.method,
    };
    let mut lines = Vec::new();
    let mut obs = |rec: &TraceRecord| {
        if let Ok(l) = trace_to_json(&name, rec) {
            lines.push(l);
        }
    };
    let tracing = trace.lock().unwrap().is_some();
    let observer: Option<&mut dyn FnMut(&TraceRecord)> = if tracing { Some(&mut obs) } else { None };
    let (mut rec, res) = solve_one(&name, &inst, &c.solver, method, !c.no_negate, observer)?;
    rec.best_known = entry.best_known;
    if let Some(t) = trace.lock().unwrap().as_mut() {
        for l in &lines {
            writeln!(t, "{l}").map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    write_result(&mut *out.lock().unwrap(), &rec)?;
    Ok(status_code(res.status))
}
