#![allow(dead_code)]

use lagdnn::cones::ConeStructure;
use lagdnn::nalgebra::DMatrix;
use lagdnn::SymMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sym(rng: &mut impl Rng, d: usize, scale: f64) -> SymMatrix {
    let mut a = SymMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            a.set(i, j, rng.gen_range(-scale..scale));
        }
    }
    a
}

/// Random binary set and complementarity pairs over `1..=n`.
pub fn random_structure(rng: &mut impl Rng, n: usize) -> ConeStructure {
    let bins: Vec<usize> = (1..=n).filter(|_| rng.gen_bool(0.5)).collect();
    let mut comps = Vec::new();
    for j in 1..=n {
        for k in j + 1..=n {
            if rng.gen_bool(0.2) {
                comps.push((j, k));
            }
        }
    }
    ConeStructure::new(n, bins, comps).unwrap()
}

/// Dense `B - A` for dual-cone checks that avoid the library's arithmetic.
pub fn dense(a: &SymMatrix) -> DMatrix<f64> {
    a.as_dmatrix().clone()
}

pub fn frob(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Membership in the dual of the structured cone, from its generators:
/// free on forced-zero entries, `2 Y_0i + Y_ii >= 0` on linked triples,
/// nonnegative elsewhere.
pub fn in_k2_dual(y: &SymMatrix, s: &ConeStructure, tol: f64) -> bool {
    let d = y.dim();
    for i in 0..d {
        for j in i..d {
            let linked = (i == 0 && j > 0 && s.is_bin(j)) || (i == j && i > 0 && s.is_bin(i));
            let comp = s.comp_pairs().any(|p| p == (i, j));
            if linked || comp {
                continue;
            }
            if y.get(i, j) < -tol {
                return false;
            }
        }
    }
    s.bin_indices().all(|i| 2.0 * y.get(0, i) + y.get(i, i) >= -tol)
}

use lagdnn::bracket::{BracketResult, StepMode};

/// Violations of the per-trace invariants: certified bound nondecreasing,
/// model steps strictly decreasing, and `y - rho g <= lb_probe <= y` on
/// probes with `g > 0`.
pub fn trace_violations(res: &BracketResult, rho: f64) -> Vec<String> {
    let mut out = Vec::new();
    let t = &res.trace;
    for w in t.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.lb_valid < a.lb_valid {
            out.push(format!("lb decreased at k={}: {} -> {}", b.k, a.lb_valid, b.lb_valid));
        }
        if matches!(b.mode, StepMode::Secant | StepMode::Newton) && b.y >= a.y {
            out.push(format!("{:?} step did not decrease y at k={}: {} -> {}", b.mode, b.k, a.y, b.y));
        }
    }
    for r in t {
        if r.g > 0.0 {
            if let Some(lb) = r.lb_probe {
                let tol = 1e-8 * (1.0 + r.y.abs());
                if lb < r.y - rho * r.g - tol || lb > r.y + tol {
                    out.push(format!("chain broken at k={}: y={} g={} lb={}", r.k, r.y, r.g, lb));
                }
            }
        }
    }
    if let Some(last) = t.last() {
        if last.lb_valid != res.lb_valid {
            out.push(format!("final bound {} differs from trace {}", res.lb_valid, last.lb_valid));
        }
    }
    out
}
