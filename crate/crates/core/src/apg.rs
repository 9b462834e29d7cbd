//! Evaluation of `g(y)`, the distance from `G(y) = Q - H y` to `K1* + K2*`,
//! by an accelerated proximal gradient method on the dual variable `Y2`.
//!
//! The method minimizes `f(Y2) = 1/2 dist(G - Y2, K1)^2` over `Y2 in K2*`.
//! With `W = G - Y2` the gradient is `X(W) = Pi1(-W)`, which is 1-Lipschitz,
//! so every step is `Y2 <- Pi_K2*(Z - X(Z))` with unit length. On exit
//! `Y1 = Pi1(W)` and `X = Pi1(-W)`, so `G = Y1 + Y2 - X` holds to rounding
//! and `X` is positive semidefinite by construction.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cones::{project_k2, project_k2_dual_into, ConeStructure};
use crate::error::{Error, Result};
use crate::matspace::{psd_split, SymMatrix};
use crate::model::LagrangianCop;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApgParams {
    /// Threshold on the normalized KKT residual `kappa`.
    pub tol: f64,
    /// `||X||` below `eps * max(1, ||G(y)||)` counts as zero.
    pub eps: f64,
    pub max_iter: usize,
    /// Function-value adaptive restart of the momentum.
    pub restart: bool,
    /// Number of trailing `z^p` values examined by the stability test.
    pub window: usize,
    pub var_tol: f64,
    pub slope_tol: f64,
}

impl Default for ApgParams {
    fn default() -> Self {
        ApgParams {
            tol: 1e-12,
            eps: 1e-12,
            max_iter: 20_000,
            restart: true,
            window: 100,
            var_tol: 1e-8,
            slope_tol: 1e-8,
        }
    }
}

impl ApgParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.tol, "tol")?;
        positive(self.eps, "eps")?;
        positive(self.var_tol, "var_tol")?;
        positive(self.slope_tol, "slope_tol")?;
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if self.window < 2 {
            return Err(Error::invalid("window must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApgStatus {
    Converged,
    /// `X` vanished: `y` is (numerically) at or below the optimal value.
    ZeroX,
    NotConverged,
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    pub x: SymMatrix,
    pub y1: SymMatrix,
    pub y2: SymMatrix,
    /// `||X||`.
    pub g: f64,
    pub kappa: f64,
    pub iters: usize,
    pub restarts: usize,
    pub status: ApgStatus,
    /// Stopped because the deadline passed.
    pub timed_out: bool,
}

/// Data of the previous outer iterate, enabling the `z^p` stability test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecantContext {
    pub y_prev: f64,
    pub g_prev: f64,
    pub alpha: f64,
}

impl SecantContext {
    /// The secant iterate the outer loop would take if `g(y)` were `g`.
    pub fn next_iterate(&self, y: f64, g: f64) -> f64 {
        y - self.alpha * g * (y - self.y_prev) / (g - self.g_prev)
    }
}

/// One inner iteration, as reported to a trace observer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApgTrace {
    pub iter: usize,
    /// `f(Y2)` at the current accepted iterate.
    pub f: f64,
    pub kappa: f64,
    pub z: Option<f64>,
    /// The candidate was rejected and the momentum reset.
    pub restarted: bool,
}

#[derive(Default)]
pub struct EvalOptions<'a> {
    pub warm: Option<&'a SymMatrix>,
    pub secant: Option<SecantContext>,
    pub deadline: Option<Instant>,
    pub trace: Option<&'a mut dyn FnMut(&ApgTrace)>,
}

struct Split {
    x: SymMatrix,
    y1: SymMatrix,
    f: f64,
}

impl Split {
    fn at(g: &SymMatrix, y2: &SymMatrix) -> Result<Split> {
        let w = g - y2;
        let (y1, x) = psd_split(&w)?;
        let f = 0.5 * x.dot(&x);
        Ok(Split { x, y1, f })
    }
}

/// Evaluates `g(y)` from a cold start.
pub fn eval_g(cop: &LagrangianCop, y: f64, params: &ApgParams) -> Result<ProjectionResult> {
    eval_g_with(cop, y, params, EvalOptions::default())
}

/// Evaluates `g(y)` with an optional warm start, secant context, deadline
/// and per-iteration observer.
pub fn eval_g_with(
    cop: &LagrangianCop,
    y: f64,
    params: &ApgParams,
    mut opts: EvalOptions<'_>,
) -> Result<ProjectionResult> {
    params.validate()?;
    if !y.is_finite() {
        return Err(Error::invalid(format!("probe value must be finite, got {y}")));
    }
    let cone = cop.cone();
    let d = cop.dim();
    let gm = cop.g_matrix(y);
    let gnorm = gm.norm();
    let s = gnorm.max(1.0);
    let zero_cut = params.eps * s;

    let mut y2 = SymMatrix::zeros(d);
    if let Some(w) = opts.warm {
        if w.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.dim(),
            });
        }
        project_k2_dual_into(w, cone, &mut y2);
    }
    let mut cur = Split::at(&gm, &y2)?;

    let finish = |cur: Split, y2: SymMatrix, kappa, iters, restarts, status, timed_out| {
        let g = cur.x.norm();
        Ok(ProjectionResult {
            x: cur.x,
            y1: cur.y1,
            y2,
            g,
            kappa,
            iters,
            restarts,
            status,
            timed_out,
        })
    };

    if cur.x.norm() < zero_cut {
        let k = residuals(&cur, &y2, cone, s, gnorm).kappa;
        return finish(cur, y2, k, 0, 0, ApgStatus::ZeroX, false);
    }

    let mut z = y2.clone();
    let mut z_is_y = true;
    let mut t = 1.0_f64;
    let mut restarts = 0;
    let mut zs: VecDeque<f64> = VecDeque::with_capacity(params.window + 1);
    let mut kappa = f64::INFINITY;
    let mut step = SymMatrix::zeros(d);

    for iter in 1..=params.max_iter {
        let z_split;
        let grad = if z_is_y {
            &cur.x
        } else {
            z_split = Split::at(&gm, &z)?;
            &z_split.x
        };
        let mut moved = z.clone();
        moved.axpy(-1.0, grad);
        project_k2_dual_into(&moved, cone, &mut step);
        let cand = Split::at(&gm, &step)?;

        // increases below the rounding level of f are noise, not divergence
        let noise = 8.0 * f64::EPSILON * (d as f64).sqrt() * s * cur.x.norm();
        if params.restart && cand.f > cur.f + noise && !z_is_y {
            restarts += 1;
            t = 1.0;
            z = y2.clone();
            z_is_y = true;
            if let Some(cb) = opts.trace.as_mut() {
                cb(&ApgTrace {
                    iter,
                    f: cur.f,
                    kappa,
                    z: None,
                    restarted: true,
                });
            }
            continue;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        t = t_next;
        let mut z_next = step.clone();
        if beta != 0.0 {
            z_next.axpy(beta, &step);
            z_next.axpy(-beta, &y2);
        }
        z = z_next;
        z_is_y = beta == 0.0;
        std::mem::swap(&mut y2, &mut step);
        cur = cand;

        let g = cur.x.norm();
        let res = residuals(&cur, &y2, cone, s, gnorm);
        kappa = res.kappa;
        let zp = opts.secant.map(|ctx| ctx.next_iterate(y, g));
        if let Some(cb) = opts.trace.as_mut() {
            cb(&ApgTrace {
                iter,
                f: cur.f,
                kappa,
                z: zp,
                restarted: false,
            });
        }
        if g < zero_cut {
            return finish(cur, y2, kappa, iter, restarts, ApgStatus::ZeroX, false);
        }
        if let Some(zp) = zp {
            if zs.len() == params.window {
                zs.pop_front();
            }
            zs.push_back(zp);
        }
        let stable = opts.secant.is_none()
            || (zs.len() == params.window
                && secant_stable(zs.make_contiguous(), params.window, params.var_tol, params.slope_tol));
        if kappa < params.tol && res.margin > 0.0 && stable {
            return finish(cur, y2, kappa, iter, restarts, ApgStatus::Converged, false);
        }
        if let Some(deadline) = opts.deadline {
            if Instant::now() >= deadline {
                return finish(cur, y2, kappa, iter, restarts, ApgStatus::NotConverged, true);
            }
        }
    }
    finish(
        cur,
        y2,
        kappa,
        params.max_iter,
        restarts,
        ApgStatus::NotConverged,
        false,
    )
}

struct Residuals {
    kappa: f64,
    /// `||X||^2 - |<X,Y1>| - |<X,Y2>| - ||G|| dist(X, K2)`: positive when
    /// `X` is clearly a direction with `<G, X> < 0`, i.e. `g(y) > 0`.
    margin: f64,
}

/// `kappa` on `X, Y1, Y2` scaled by `1/s`, without the PSD-infeasibility
/// term, which vanishes because `X` is a PSD projection by construction.
fn residuals(cur: &Split, y2: &SymMatrix, cone: &ConeStructure, s: f64, g_norm: f64) -> Residuals {
    let nx = cur.x.norm();
    let xy1 = cur.x.dot(&cur.y1).abs();
    let xy2 = cur.x.dot(y2).abs();
    let dist = match project_k2(&cur.x, cone) {
        Ok(p) => (&p - &cur.x).norm(),
        Err(_) => f64::INFINITY,
    };
    let t1 = xy1 / (s * (s + nx + cur.y1.norm()));
    let t2 = xy2 / (s * (s + nx + y2.norm()));
    let t4 = dist / (s + nx);
    Residuals {
        kappa: t1.max(t2).max(t4),
        margin: nx * nx - xy1 - xy2 - g_norm * dist,
    }
}

/// Normalized KKT residual: the largest of
/// `|<X,Y1>|/(1+|X|+|Y1|)`, `|<X,Y2>|/(1+|X|+|Y2|)`,
/// `|Pi1*(-X)|/(1+|X|)` and `|Pi2*(-X)|/(1+|X|)`.
pub fn kappa(x: &SymMatrix, y1: &SymMatrix, y2: &SymMatrix, cone: &ConeStructure) -> Result<f64> {
    for m in [y1, y2] {
        if m.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: m.dim(),
            });
        }
    }
    let nx = x.norm();
    let t1 = x.dot(y1).abs() / (1.0 + nx + y1.norm());
    let t2 = x.dot(y2).abs() / (1.0 + nx + y2.norm());
    // Pi1*(-X) = Pi1(-X): the negative spectral part of X
    let t3 = psd_split(x)?.1.norm() / (1.0 + nx);
    // Pi2*(-X) = Pi2(X) - X
    let t4 = (&project_k2(x, cone)? - x).norm() / (1.0 + nx);
    Ok(t1.max(t2).max(t3).max(t4))
}

/// Whether the trailing `window` values of `z` have settled: sample standard
/// deviation and least-squares slope both within their tolerances relative
/// to `1 + |z_last|`.
pub fn secant_stable(z: &[f64], window: usize, var_tol: f64, slope_tol: f64) -> bool {
    let tail = &z[z.len().saturating_sub(window)..];
    let m = tail.len();
    if m < 2 || tail.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mf = m as f64;
    let mean = tail.iter().sum::<f64>() / mf;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mf - 1.0);
    let tbar = (mf - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in tail.iter().enumerate() {
        let dt = i as f64 - tbar;
        sxy += dt * (v - mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let scale = 1.0 + tail[m - 1].abs();
    var.sqrt() <= var_tol * scale && slope.abs() <= slope_tol * scale
}
