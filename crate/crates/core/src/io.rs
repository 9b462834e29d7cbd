//! Instance readers and writers (BIQMAC sparse triples, QAPLIB dense) and
//! line-delimited JSON result records.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bracket::{BracketResult, BracketStatus, Method, TraceRecord};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Tokens with their 1-based line numbers.
fn tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
}

fn last_line(text: &str) -> usize {
    text.lines().count().max(1)
}

fn number(line: usize, tok: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("expected a number, found '{tok}'"))),
    }
}

fn count(line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("expected {what}, found '{tok}'")))
}

/// Parses a BIQMAC instance: a header `r m`, then `m` lines `i j q` with
/// 1-based indices. Off-diagonal entries are listed once and mirrored.
pub fn parse_biqmac(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, t)| !t.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if header.len() != 2 {
        return Err(Error::parse(hl, "header must be 'r m'"));
    }
    let r = count(hl, header[0], "the dimension r")?;
    let m = count(hl, header[1], "the entry count m")?;
    if r == 0 {
        return Err(Error::parse(hl, "dimension must be at least 1"));
    }
    let mut f = DMatrix::zeros(r, r);
    let mut seen = HashSet::new();
    for k in 0..m {
        let Some((ln, t)) = lines.next() else {
            return Err(Error::parse(
                last_line(text),
                format!("file ends after {k} of {m} entries"),
            ));
        };
        if t.len() != 3 {
            return Err(Error::parse(ln, format!("expected 'i j q', found {} fields", t.len())));
        }
        let i = count(ln, t[0], "a row index")?;
        let j = count(ln, t[1], "a column index")?;
        let q = number(ln, t[2])?;
        for idx in [i, j] {
            if idx == 0 || idx > r {
                return Err(Error::parse(ln, format!("index {idx} outside 1..={r}")));
            }
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(Error::parse(ln, format!("duplicate entry ({}, {})", key.0, key.1)));
        }
        f[(i - 1, j - 1)] = q;
        f[(j - 1, i - 1)] = q;
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::parse(ln, format!("unexpected content after {m} entries")));
    }
    Ok(f)
}

/// Writes `F` in BIQMAC form, listing the nonzeros of the upper triangle.
pub fn write_biqmac(f: &DMatrix<f64>) -> String {
    let r = f.nrows();
    let entries: Vec<(usize, usize, f64)> = (0..r)
        .flat_map(|i| (i..r).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, f[(i, j)]))
        .filter(|e| e.2 != 0.0)
        .collect();
    let mut out = format!("{} {}\n", r, entries.len());
    for (i, j, q) in entries {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, q);
    }
    out
}

/// Parses a QAPLIB instance: `r`, then `r^2` entries of `A` and `r^2`
/// entries of `B`, row-major, separated by any whitespace.
pub fn parse_qaplib(text: &str) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut toks = tokens(text);
    let (l0, t0) = toks.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let r = count(l0, t0, "the size r")?;
    if r == 0 {
        return Err(Error::parse(l0, "size must be at least 1"));
    }
    let need = 2 * r * r;
    let mut vals = Vec::with_capacity(need);
    for (ln, t) in toks.by_ref() {
        if vals.len() == need {
            return Err(Error::parse(ln, format!("more than {need} matrix entries")));
        }
        vals.push(number(ln, t)?);
    }
    if vals.len() < need {
        return Err(Error::parse(
            last_line(text),
            format!("expected {need} matrix entries, found {}", vals.len()),
        ));
    }
    let a = DMatrix::from_row_slice(r, r, &vals[..r * r]);
    let b = DMatrix::from_row_slice(r, r, &vals[r * r..]);
    Ok((a, b))
}

pub fn write_qaplib(a: &DMatrix<f64>, b: &DMatrix<f64>) -> String {
    let r = a.nrows();
    let mut out = format!("{r}\n");
    for m in [a, b] {
        out.push('\n');
        for i in 0..r {
            let row: Vec<String> = (0..r).map(|j| m[(i, j)].to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Biqmac,
    Qaplib,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Bqop(DMatrix<f64>),
    Qap(DMatrix<f64>, DMatrix<f64>),
}

impl Instance {
    pub fn size(&self) -> usize {
        match self {
            Instance::Bqop(f) => f.nrows(),
            Instance::Qap(a, _) => a.nrows(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile {
    pub path: PathBuf,
    pub format: Format,
    pub r: usize,
}

/// Guesses the format: `.dat` is QAPLIB, `.sparse` is BIQMAC, otherwise a
/// two-token first line means BIQMAC.
pub fn detect_format(path: &Path, text: &str) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("dat") => Format::Qaplib,
        Some("sparse") => Format::Biqmac,
        _ => {
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
            if first.split_whitespace().count() == 2 {
                Format::Biqmac
            } else {
                Format::Qaplib
            }
        }
    }
}

pub fn parse_instance(text: &str, format: Format) -> Result<Instance> {
    match format {
        Format::Biqmac => parse_biqmac(text).map(Instance::Bqop),
        Format::Qaplib => parse_qaplib(text).map(|(a, b)| Instance::Qap(a, b)),
    }
}

/// Reads and parses an instance file, detecting the format unless given.
pub fn read_instance(path: &Path, format: Option<Format>) -> Result<(InstanceFile, Instance)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let format = format.unwrap_or_else(|| detect_format(path, &text));
    let inst = parse_instance(&text, format)?;
    let file = InstanceFile {
        path: path.to_path_buf(),
        format,
        r: inst.size(),
    };
    Ok((file, inst))
}

/// One solve, as written to the result stream. Field order is fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: u32,
    pub instance: String,
    pub r: usize,
    pub method: Method,
    pub lambda: f64,
    pub rho: f64,
    pub delta: f64,
    pub eps: f64,
    pub tol: f64,
    pub lb_valid: f64,
    pub y_final: f64,
    /// Numerical bracket; `None` for an unbounded end.
    pub interval: (Option<f64>, Option<f64>),
    pub total_apg_iters: usize,
    pub outer_iters: usize,
    pub status: BracketStatus,
    /// Excluded from the determinism contract.
    pub wall_time_s: f64,
    /// Best known objective value, when the caller supplies one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_known: Option<f64>,
}

/// Solver settings echoed into the record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub lambda: f64,
    pub rho: f64,
    pub delta: f64,
    pub eps: f64,
    pub tol: f64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ResultRecord {
    pub fn new(instance: impl Into<String>, r: usize, res: &BracketResult, s: RunSettings) -> Self {
        ResultRecord {
            schema: SCHEMA_VERSION,
            instance: instance.into(),
            r,
            method: res.method,
            lambda: s.lambda,
            rho: s.rho,
            delta: s.delta,
            eps: s.eps,
            tol: s.tol,
            lb_valid: res.lb_valid,
            y_final: res.y_final,
            interval: (finite(res.interval.0), finite(res.interval.1)),
            total_apg_iters: res.total_apg_iters,
            outer_iters: res.outer_iters(),
            status: res.status,
            wall_time_s: res.wall_time.as_secs_f64(),
            best_known: None,
        }
    }
}

/// A trace line: the instance name plus one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub schema: u32,
    pub instance: String,
    #[serde(flatten)]
    pub record: TraceRecord,
}

pub fn result_to_json(rec: &ResultRecord) -> Result<String> {
    serde_json::to_string(rec).map_err(|e| Error::Io(e.to_string()))
}

pub fn parse_result(line: &str) -> Result<ResultRecord> {
    let rec: ResultRecord =
        serde_json::from_str(line).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    if rec.schema != SCHEMA_VERSION {
        return Err(Error::parse(1, format!("unsupported schema version {}", rec.schema)));
    }
    Ok(rec)
}

/// Writes the record as one JSON line.
pub fn write_result(sink: &mut dyn Write, rec: &ResultRecord) -> Result<()> {
    let line = result_to_json(rec)?;
    writeln!(sink, "{line}").map_err(|e| Error::Io(e.to_string()))
}

pub fn trace_to_json(instance: &str, rec: &TraceRecord) -> Result<String> {
    let line = TraceLine {
        schema: SCHEMA_VERSION,
        instance: instance.to_string(),
        record: rec.clone(),
    };
    serde_json::to_string(&line).map_err(|e| Error::Io(e.to_string()))
}

pub fn parse_trace(line: &str) -> Result<TraceLine> {
    serde_json::from_str(line).map_err(|e| Error::parse(e.line(), e.to_string()))
}

/// Writes every trace record of `res`, one JSON line each.
pub fn write_trace(sink: &mut dyn Write, instance: &str, res: &BracketResult) -> Result<()> {
    for rec in &res.trace {
        writeln!(sink, "{}", trace_to_json(instance, rec)?).map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(())
}
