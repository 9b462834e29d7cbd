//! Outer loops bracketing the optimal value `y*` of the Lagrangian problem:
//! bisection, Newton and damped secant iterations, each carrying a
//! certified lower bound alongside a heuristic numerical interval.
//!
//! The loops only see `g` through the [`Evaluator`] trait, so the same
//! control flow runs on the conic problem ([`CopEvaluator`]) and on
//! closed-form test functions ([`AnalyticEvaluator`]).

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::apg::{eval_g_with, ApgParams, ApgStatus, ApgTrace, EvalOptions, SecantContext};
use crate::cones::project_k2_dual_into;
use crate::error::{Error, Result};
use crate::matspace::{lambda_min, SymMatrix};
use crate::model::LagrangianCop;

/// Number of times a starting point may be pushed up or down while
/// searching for the right sign of `g`.
const MAX_DOUBLINGS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bisection,
    Newton,
    Secant,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bisection => "bp",
            Method::Newton => "newton",
            Method::Secant => "secant",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bp" | "bisection" => Ok(Method::Bisection),
            "newton" => Ok(Method::Newton),
            "secant" => Ok(Method::Secant),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketParams {
    /// Stopping width.
    pub delta: f64,
    pub eps: f64,
    /// Secant damping factor in `(0, 1]`.
    pub alpha: f64,
    /// First probe; defaults to the objective of a known feasible point.
    pub y0: Option<f64>,
    /// Second secant point; defaults slightly below `y0`.
    pub y1: Option<f64>,
    /// Lower end of the initial bisection interval. Without it, bisection
    /// starts from the certified bound of its first probe.
    pub lb0: Option<f64>,
    pub max_outer: usize,
    pub time_limit: Option<Duration>,
    pub apg: ApgParams,
}

impl Default for BracketParams {
    fn default() -> Self {
        BracketParams {
            delta: 1e-4,
            eps: 1e-12,
            alpha: 0.9,
            y0: None,
            y1: None,
            lb0: None,
            max_outer: 60,
            time_limit: None,
            apg: ApgParams::default(),
        }
    }
}

impl BracketParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        for (name, v) in [("y0", self.y0), ("y1", self.y1), ("lb0", self.lb0)] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("{name} must be finite")));
                }
            }
        }
        if self.max_outer == 0 {
            return Err(Error::invalid("max_outer must be at least 1"));
        }
        self.apg.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    Initial,
    Secant,
    Newton,
    Bisection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketStatus {
    Converged,
    MaxOuter,
    TimeLimit,
}

/// One outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub y: f64,
    pub g: f64,
    /// Certified bound obtained from this probe alone.
    pub lb_probe: Option<f64>,
    /// Best certified bound so far.
    pub lb_valid: f64,
    pub apg_iters: usize,
    /// How `y` was chosen.
    pub mode: StepMode,
    pub status: ApgStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketResult {
    pub method: Method,
    /// Certified lower bound on `y*`; `-inf` if the evaluator certifies
    /// nothing.
    pub lb_valid: f64,
    pub y_final: f64,
    /// Numerical bracket `[lb, ub]`. Not a certificate.
    pub interval: (f64, f64),
    pub trace: Vec<TraceRecord>,
    pub total_apg_iters: usize,
    pub wall_time: Duration,
    pub status: BracketStatus,
}

impl BracketResult {
    pub fn outer_iters(&self) -> usize {
        self.trace.len()
    }
}

/// Outcome of a single `g` evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub g: f64,
    /// Derivative estimate `g'(y)`, when available.
    pub slope: Option<f64>,
    /// Certified lower bound on `y*` derived from this probe.
    pub lb: Option<f64>,
    pub status: ApgStatus,
    pub apg_iters: usize,
    pub timed_out: bool,
}

/// Source of `g(y)` values for the outer loops.
pub trait Evaluator {
    fn probe(&mut self, y: f64, secant: Option<SecantContext>, deadline: Option<Instant>) -> Result<Probe>;

    /// Default first probe, typically an upper bound on `y*`.
    fn default_start(&self) -> Option<f64> {
        None
    }
}

/// `y + rho * min(0, lambda_min(G(y) - Y2))`, a lower bound on `y*` for any
/// `Y2` in `K2*`.
pub fn valid_lb(y: f64, y2: &SymMatrix, cop: &LagrangianCop) -> Result<f64> {
    if y2.dim() != cop.dim() {
        return Err(Error::DimensionMismatch {
            expected: cop.dim(),
            got: y2.dim(),
        });
    }
    let mut p = SymMatrix::zeros(y2.dim());
    project_k2_dual_into(y2, cop.cone(), &mut p);
    if p.max_abs_diff(y2) > 1e-9 * (1.0 + y2.norm()) {
        return Err(Error::invalid("Y2 is not in the dual cone of K2"));
    }
    let gm = cop.g_matrix(y);
    let t = lambda_min(&(&gm - y2))?.min(0.0);
    Ok(y + cop.rho * t)
}

type ApgObserver<'a> = Box<dyn FnMut(f64, &ApgTrace) + 'a>;

/// Evaluator backed by APG solves on a Lagrangian problem, warm-starting
/// each solve from the previous `Y2`.
pub struct CopEvaluator<'a> {
    cop: &'a LagrangianCop,
    apg: ApgParams,
    warm: Option<SymMatrix>,
    pub warm_start: bool,
    apg_trace: Option<ApgObserver<'a>>,
}

impl<'a> CopEvaluator<'a> {
    pub fn new(cop: &'a LagrangianCop, apg: ApgParams) -> Self {
        CopEvaluator {
            cop,
            apg,
            warm: None,
            warm_start: true,
            apg_trace: None,
        }
    }

    /// Receives every inner iteration together with the probe value.
    pub fn with_apg_trace(mut self, f: impl FnMut(f64, &ApgTrace) + 'a) -> Self {
        self.apg_trace = Some(Box::new(f));
        self
    }
}

impl Evaluator for CopEvaluator<'_> {
    fn probe(&mut self, y: f64, secant: Option<SecantContext>, deadline: Option<Instant>) -> Result<Probe> {
        let mut cb;
        let trace: Option<&mut dyn FnMut(&ApgTrace)> = match self.apg_trace.as_mut() {
            Some(f) => {
                cb = move |t: &ApgTrace| f(y, t);
                Some(&mut cb)
            }
            None => None,
        };
        let opts = EvalOptions {
            warm: if self.warm_start { self.warm.as_ref() } else { None },
            secant,
            deadline,
            trace,
        };
        let r = eval_g_with(self.cop, y, &self.apg, opts)?;
        let lb = valid_lb(y, &r.y2, self.cop)?;
        let slope = (r.g > 0.0).then(|| r.x.dot(&self.cop.h) / r.g);
        self.warm = Some(r.y2);
        Ok(Probe {
            g: r.g,
            slope,
            lb: Some(lb),
            status: r.status,
            apg_iters: r.iters,
            timed_out: r.timed_out,
        })
    }

    fn default_start(&self) -> Option<f64> {
        self.cop.upper_bound_hint()
    }
}

type Fun<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

/// Closed-form `g` with optional derivative and certified lower bound.
/// Values with `g(y) == 0` are reported as zero probes.
pub struct AnalyticEvaluator<'a> {
    g: Fun<'a>,
    dg: Option<Fun<'a>>,
    lb: Option<Fun<'a>>,
    start: Option<f64>,
}

impl<'a> AnalyticEvaluator<'a> {
    pub fn new(g: impl Fn(f64) -> f64 + 'a) -> Self {
        AnalyticEvaluator {
            g: Box::new(g),
            dg: None,
            lb: None,
            start: None,
        }
    }

    pub fn with_derivative(mut self, dg: impl Fn(f64) -> f64 + 'a) -> Self {
        self.dg = Some(Box::new(dg));
        self
    }

    /// `lb(y)` must never exceed the largest zero of `g`.
    pub fn with_lower_bound(mut self, lb: impl Fn(f64) -> f64 + 'a) -> Self {
        self.lb = Some(Box::new(lb));
        self
    }

    pub fn with_start(mut self, y0: f64) -> Self {
        self.start = Some(y0);
        self
    }
}

impl Evaluator for AnalyticEvaluator<'_> {
    fn probe(&mut self, y: f64, _: Option<SecantContext>, _: Option<Instant>) -> Result<Probe> {
        let g = (self.g)(y);
        if !g.is_finite() || g < 0.0 {
            return Err(Error::Numerical(format!("g({y}) = {g}")));
        }
        Ok(Probe {
            g,
            slope: self.dg.as_ref().map(|d| d(y)),
            lb: self.lb.as_ref().map(|f| f(y)),
            status: if g == 0.0 {
                ApgStatus::ZeroX
            } else {
                ApgStatus::Converged
            },
            apg_iters: 0,
            timed_out: false,
        })
    }

    fn default_start(&self) -> Option<f64> {
        self.start
    }
}

/// Mutable state shared by all three loops.
struct Run<'o> {
    method: Method,
    params: BracketParams,
    start: Instant,
    deadline: Option<Instant>,
    lb_valid: f64,
    lb_num: f64,
    ub_num: f64,
    trace: Vec<TraceRecord>,
    total_apg: usize,
    observer: Option<&'o mut dyn FnMut(&TraceRecord)>,
}

impl<'o> Run<'o> {
    fn new(method: Method, params: &BracketParams, observer: Option<&'o mut dyn FnMut(&TraceRecord)>) -> Result<Self> {
        params.validate()?;
        let start = Instant::now();
        Ok(Run {
            method,
            params: params.clone(),
            start,
            deadline: params.time_limit.map(|t| start + t),
            lb_valid: f64::NEG_INFINITY,
            lb_num: f64::NEG_INFINITY,
            ub_num: f64::INFINITY,
            trace: Vec::new(),
            total_apg: 0,
            observer,
        })
    }

    fn probe(
        &mut self,
        ev: &mut dyn Evaluator,
        y: f64,
        mode: StepMode,
        secant: Option<SecantContext>,
    ) -> Result<Probe> {
        let p = ev.probe(y, secant, self.deadline)?;
        if let Some(lb) = p.lb {
            if lb.is_finite() {
                self.lb_valid = self.lb_valid.max(lb);
            }
        }
        match p.status {
            ApgStatus::ZeroX => self.lb_num = self.lb_num.max(y),
            _ => self.ub_num = self.ub_num.min(y),
        }
        self.total_apg += p.apg_iters;
        let rec = TraceRecord {
            k: self.trace.len(),
            y,
            g: p.g,
            lb_probe: p.lb,
            lb_valid: self.lb_valid,
            apg_iters: p.apg_iters,
            mode,
            status: p.status,
        };
        if let Some(obs) = self.observer.as_mut() {
            obs(&rec);
        }
        self.trace.push(rec);
        Ok(p)
    }

    fn out_of_budget(&self, p: &Probe) -> Option<BracketStatus> {
        if p.timed_out || self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Some(BracketStatus::TimeLimit);
        }
        if self.trace.len() >= self.params.max_outer {
            return Some(BracketStatus::MaxOuter);
        }
        None
    }

    /// Lower end for bisection: the better of the numerical and certified
    /// lower bounds.
    fn lo(&self) -> f64 {
        self.lb_num.max(self.lb_valid)
    }

    /// Midpoint of the current bracket, or a downward push while no lower
    /// end is known.
    fn midpoint(&self, y: f64) -> f64 {
        let lo = self.lo();
        let hi = if self.ub_num.is_finite() { self.ub_num } else { y };
        if lo.is_finite() {
            0.5 * (lo + hi)
        } else {
            hi - hi.abs().max(1.0)
        }
    }

    fn bracket_closed(&self) -> bool {
        self.ub_num - self.lo() < self.params.delta
    }

    fn finish(self, y_final: f64, status: BracketStatus) -> BracketResult {
        BracketResult {
            method: self.method,
            lb_valid: self.lb_valid,
            y_final,
            interval: (self.lb_num, self.ub_num),
            trace: self.trace,
            total_apg_iters: self.total_apg,
            wall_time: self.start.elapsed(),
            status,
        }
    }

    /// Probes the starting point and pushes it up until `g > 0`.
    fn initial(&mut self, ev: &mut dyn Evaluator) -> Result<(f64, Probe)> {
        let mut y = self
            .params
            .y0
            .or_else(|| ev.default_start())
            .ok_or_else(|| Error::invalid("no starting point: supply y0"))?;
        let mut p = self.probe(ev, y, StepMode::Initial, None)?;
        let mut pushes = 0;
        while p.status == ApgStatus::ZeroX {
            if pushes == MAX_DOUBLINGS {
                return Err(Error::Numerical(format!(
                    "g stayed zero after {MAX_DOUBLINGS} upward pushes (last y = {y})"
                )));
            }
            if let Some(s) = self.out_of_budget(&p) {
                return Err(Error::invalid(format!("budget exhausted before g(y0) > 0 ({s:?})")));
            }
            y += y.abs().max(1.0);
            pushes += 1;
            p = self.probe(ev, y, StepMode::Initial, None)?;
        }
        Ok((y, p))
    }
}

/// Runs `method` on any evaluator.
pub fn solve_1d(ev: &mut dyn Evaluator, method: Method, params: &BracketParams) -> Result<BracketResult> {
    solve_observed(ev, method, params, None)
}

/// As [`solve_1d`], reporting each outer iteration to `observer` as it
/// completes.
pub fn solve_observed(
    ev: &mut dyn Evaluator,
    method: Method,
    params: &BracketParams,
    observer: Option<&mut dyn FnMut(&TraceRecord)>,
) -> Result<BracketResult> {
    let mut run = Run::new(method, params, observer)?;
    match method {
        Method::Bisection => bisection(&mut run, ev).map(|(y, s)| run.finish(y, s)),
        Method::Newton => newton(&mut run, ev).map(|(y, s)| run.finish(y, s)),
        Method::Secant => secant(&mut run, ev).map(|(y, s)| run.finish(y, s)),
    }
}

/// Bisection on `[lb0, ub0]` for a Lagrangian problem.
pub fn bp_solve(cop: &LagrangianCop, params: &BracketParams, lb0: f64, ub0: f64) -> Result<BracketResult> {
    if !(lb0 < ub0) || ub0.is_nan() {
        return Err(Error::invalid(format!("need lb0 < ub0, got [{lb0}, {ub0}]")));
    }
    let params = BracketParams {
        y0: Some(ub0),
        lb0: lb0.is_finite().then_some(lb0),
        ..params.clone()
    };
    let mut ev = CopEvaluator::new(cop, params.apg.clone());
    solve_1d(&mut ev, Method::Bisection, &params)
}

pub fn newton_solve(cop: &LagrangianCop, params: &BracketParams) -> Result<BracketResult> {
    let mut ev = CopEvaluator::new(cop, params.apg.clone());
    solve_1d(&mut ev, Method::Newton, params)
}

pub fn secant_solve(cop: &LagrangianCop, params: &BracketParams) -> Result<BracketResult> {
    let mut ev = CopEvaluator::new(cop, params.apg.clone());
    solve_1d(&mut ev, Method::Secant, params)
}

fn bisection(run: &mut Run<'_>, ev: &mut dyn Evaluator) -> Result<(f64, BracketStatus)> {
    let (ub, p) = run.initial(ev)?;
    let mut y = ub;
    if let Some(s) = run.out_of_budget(&p) {
        return Ok((y, s));
    }
    if let Some(lb0) = run.params.lb0 {
        run.lb_num = run.lb_num.max(lb0.min(ub));
    }
    // without a lower end, push down until g vanishes
    let mut pushes = 0;
    while !run.lo().is_finite() {
        if pushes == MAX_DOUBLINGS {
            return Err(Error::Numerical("no zero of g found below the start".into()));
        }
        y -= y.abs().max(1.0);
        pushes += 1;
        let p = run.probe(ev, y, StepMode::Bisection, None)?;
        if let Some(s) = run.out_of_budget(&p) {
            return Ok((y, s));
        }
    }
    loop {
        if run.bracket_closed() {
            return Ok((y, BracketStatus::Converged));
        }
        y = 0.5 * (run.lo() + run.ub_num);
        let p = run.probe(ev, y, StepMode::Bisection, None)?;
        if let Some(s) = run.out_of_budget(&p) {
            return Ok((y, s));
        }
    }
}

fn newton(run: &mut Run<'_>, ev: &mut dyn Evaluator) -> Result<(f64, BracketStatus)> {
    let (mut y, mut p) = run.initial(ev)?;
    let mut mode = StepMode::Initial;
    loop {
        if let Some(s) = run.out_of_budget(&p) {
            return Ok((y, s));
        }
        if let Some(stop) = settle(run, y, &p, mode) {
            match stop {
                Settle::Done => return Ok((y, BracketStatus::Converged)),
                Settle::Bisect => {
                    y = run.midpoint(y);
                    mode = StepMode::Bisection;
                    p = run.probe(ev, y, mode, None)?;
                    continue;
                }
            }
        }
        let step = p.slope.filter(|d| *d > 0.0).map(|d| y - p.g / d);
        (y, mode) = guard(run, y, step, StepMode::Newton);
        p = run.probe(ev, y, mode, None)?;
    }
}

fn secant(run: &mut Run<'_>, ev: &mut dyn Evaluator) -> Result<(f64, BracketStatus)> {
    let (y0, p0) = run.initial(ev)?;
    if let Some(s) = run.out_of_budget(&p0) {
        return Ok((y0, s));
    }
    let alpha = run.params.alpha;
    // most recent probe with g > 0, the anchor of the next secant
    let mut prev = (y0, p0.g);
    let mut y = match run.params.y1 {
        Some(y1) if y1 < y0 => y1,
        Some(y1) => {
            return Err(Error::invalid(format!("y1 = {y1} must lie below y0 = {y0}")));
        }
        None => y0 - y0.abs().max(1.0) * 1e-3,
    };
    let mut mode = StepMode::Secant;
    let mut p = run.probe(ev, y, mode, Some(secant_ctx(prev, alpha)))?;
    loop {
        if let Some(s) = run.out_of_budget(&p) {
            return Ok((y, s));
        }
        if let Some(stop) = settle(run, y, &p, mode) {
            match stop {
                Settle::Done => return Ok((y, BracketStatus::Converged)),
                Settle::Bisect => {
                    if p.status != ApgStatus::ZeroX && p.g > 0.0 && y < prev.0 {
                        prev = (y, p.g);
                    }
                    y = run.midpoint(y);
                    mode = StepMode::Bisection;
                    p = run.probe(ev, y, mode, Some(secant_ctx(prev, alpha)))?;
                    continue;
                }
            }
        }
        let denom = p.g - prev.1;
        let step = if denom.abs() < 1e-15 * (1.0 + p.g) {
            None
        } else {
            Some(y - alpha * p.g * (y - prev.0) / denom)
        };
        let (next, m) = guard(run, y, step, StepMode::Secant);
        prev = (y, p.g);
        y = next;
        mode = m;
        p = run.probe(ev, y, mode, Some(secant_ctx(prev, alpha)))?;
    }
}

enum Settle {
    Done,
    Bisect,
}

/// Stopping and fallback rules shared by Newton and secant. A vanishing `g`
/// ends the run when it follows a model step; after a bisection step it
/// only raises the lower end. Inaccurate probes bisect.
fn settle(run: &Run<'_>, y: f64, p: &Probe, mode: StepMode) -> Option<Settle> {
    let delta = run.params.delta;
    match p.status {
        ApgStatus::ZeroX if mode != StepMode::Bisection && y >= run.lb_valid - delta => Some(Settle::Done),
        ApgStatus::ZeroX | ApgStatus::NotConverged => Some(if run.bracket_closed() {
            Settle::Done
        } else {
            Settle::Bisect
        }),
        ApgStatus::Converged if y - run.lb_valid < delta || run.bracket_closed() => Some(Settle::Done),
        ApgStatus::Converged => None,
    }
}

fn secant_ctx(prev: (f64, f64), alpha: f64) -> SecantContext {
    SecantContext {
        y_prev: prev.0,
        g_prev: prev.1,
        alpha,
    }
}

/// Applies the safeguards to a proposed step from `y`: missing, non-finite
/// or non-decreasing steps and steps far below the certified bound become
/// bisection steps; steps at or below the numerical lower end are pulled
/// back halfway.
fn guard(run: &Run<'_>, y: f64, step: Option<f64>, mode: StepMode) -> (f64, StepMode) {
    let Some(next) = step.filter(|s| s.is_finite() && *s < y) else {
        return (run.midpoint(y), StepMode::Bisection);
    };
    if next <= run.lb_num {
        return (0.5 * (run.lb_num + y), StepMode::Bisection);
    }
    if next < run.lb_valid - run.params.delta {
        return (run.midpoint(y), StepMode::Bisection);
    }
    (next, mode)
}
