//! Quadratic optimization models, their doubly nonnegative lift, and the
//! Lagrangian problem the bracketing loops work on.
//!
//! A QOP minimizes `u^T C u + 2 c^T u` over `u >= 0` with `A u = b`,
//! binary constraints `u_i (1 - u_i) = 0` and complementarity constraints
//! `u_j u_k = 0`. Its lift lives on `(1+n) x (1+n)` symmetric matrices with
//! `x = (1, u)` and `X = x x^T`.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cones::ConeStructure;
use crate::error::{Error, Result};
use crate::matspace::{eig_sym, SymMatrix};

/// Default Lagrangian penalty weight.
pub const DEFAULT_LAMBDA: f64 = 10_000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct QopModel {
    n: usize,
    c_mat: DMatrix<f64>,
    c_vec: Vec<f64>,
    a_mat: DMatrix<f64>,
    b: Vec<f64>,
    bin_indices: BTreeSet<usize>,
    comp_pairs: BTreeSet<(usize, usize)>,
    feasible_point: Option<Vec<f64>>,
}

impl QopModel {
    /// Indices in `bin_indices` and `comp_pairs` are 1-based, matching the
    /// row/column numbering of the lifted matrix.
    pub fn new(
        c_mat: DMatrix<f64>,
        c_vec: Vec<f64>,
        a_mat: DMatrix<f64>,
        b: Vec<f64>,
        bin_indices: impl IntoIterator<Item = usize>,
        comp_pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = c_mat.nrows();
        if n == 0 {
            return Err(Error::invalid("QOP must have at least one variable"));
        }
        if c_mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c_mat.ncols(),
            });
        }
        if c_vec.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c_vec.len(),
            });
        }
        for j in 0..n {
            for i in 0..j {
                if c_mat[(i, j)] != c_mat[(j, i)] {
                    return Err(Error::invalid(format!(
                        "objective matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if a_mat.nrows() > 0 && a_mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a_mat.ncols(),
            });
        }
        if b.len() != a_mat.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a_mat.nrows(),
                got: b.len(),
            });
        }
        let a_mat = if a_mat.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            a_mat
        };
        let bin_indices: BTreeSet<usize> = bin_indices.into_iter().collect();
        let comp_pairs: BTreeSet<(usize, usize)> = comp_pairs.into_iter().collect();
        // range checks live in one place
        ConeStructure::new(n, bin_indices.iter().copied(), comp_pairs.iter().copied())?;
        Ok(QopModel {
            n,
            c_mat,
            c_vec,
            a_mat,
            b,
            bin_indices,
            comp_pairs,
            feasible_point: None,
        })
    }

    /// Attaches a known feasible point; rejected unless it satisfies every
    /// constraint exactly.
    pub fn with_feasible_point(mut self, u: Vec<f64>) -> Result<Self> {
        if !self.is_feasible(&u, 0.0) {
            return Err(Error::invalid("supplied point is not feasible"));
        }
        self.feasible_point = Some(u);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.a_mat.nrows()
    }

    pub fn c_mat(&self) -> &DMatrix<f64> {
        &self.c_mat
    }

    pub fn c_vec(&self) -> &[f64] {
        &self.c_vec
    }

    pub fn a_mat(&self) -> &DMatrix<f64> {
        &self.a_mat
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn bin_indices(&self) -> &BTreeSet<usize> {
        &self.bin_indices
    }

    pub fn comp_pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.comp_pairs
    }

    pub fn feasible_point(&self) -> Option<&[f64]> {
        self.feasible_point.as_deref()
    }

    /// `u^T C u + 2 c^T u`.
    pub fn objective(&self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.n);
        let mut quad = 0.0;
        for i in 0..self.n {
            let row: f64 = u.iter().enumerate().map(|(j, x)| self.c_mat[(i, j)] * x).sum();
            quad += u[i] * row;
        }
        let lin: f64 = self.c_vec.iter().zip(u).map(|(c, x)| c * x).sum();
        quad + 2.0 * lin
    }

    pub fn is_feasible(&self, u: &[f64], tol: f64) -> bool {
        if u.len() != self.n || u.iter().any(|&x| x < -tol) {
            return false;
        }
        for r in 0..self.a_mat.nrows() {
            let lhs: f64 = (0..self.n).map(|j| self.a_mat[(r, j)] * u[j]).sum();
            if (lhs - self.b[r]).abs() > tol {
                return false;
            }
        }
        if self
            .bin_indices
            .iter()
            .any(|&i| (u[i - 1] * (1.0 - u[i - 1])).abs() > tol)
        {
            return false;
        }
        self.comp_pairs
            .iter()
            .all(|&(j, k)| (u[j - 1] * u[k - 1]).abs() <= tol)
    }

    pub fn cone_structure(&self) -> ConeStructure {
        ConeStructure::new(
            self.n,
            self.bin_indices.iter().copied(),
            self.comp_pairs.iter().copied(),
        )
        .expect("validated at construction")
    }
}

/// The doubly nonnegative lift `(Q0, H0, H1, K2)` of a QOP.
#[derive(Clone, Debug)]
pub struct DnnCop {
    pub q0: SymMatrix,
    pub h0: SymMatrix,
    pub h1: SymMatrix,
    pub cone: ConeStructure,
    /// Objective value of a known feasible QOP point, if any.
    pub feasible_objective: Option<f64>,
}

impl DnnCop {
    pub fn dim(&self) -> usize {
        self.q0.dim()
    }

    pub fn n(&self) -> usize {
        self.cone.n()
    }
}

/// Builds `Q0 = [[0, c^T], [c, C]]`, `H0 = e_0 e_0^T` and
/// `H1 = (-b A)^T (-b A)`.
pub fn build_dnn(q: &QopModel) -> Result<DnnCop> {
    let n = q.n;
    let d = n + 1;
    let q0 = SymMatrix::from_fn(d, |i, j| match (i, j) {
        (0, 0) => 0.0,
        (0, j) => q.c_vec[j - 1],
        (i, j) => q.c_mat[(i - 1, j - 1)],
    });
    let mut h0 = SymMatrix::zeros(d);
    h0.set(0, 0, 1.0);

    let ell = q.a_mat.nrows();
    let mut m = DMatrix::zeros(ell, d);
    for r in 0..ell {
        m[(r, 0)] = -q.b[r];
        for j in 0..n {
            m[(r, j + 1)] = q.a_mat[(r, j)];
        }
    }
    let h1 = SymMatrix::from_upper(m.transpose() * &m);
    if ell > 0 {
        let lmin = eig_sym(&h1)?.values[0];
        if lmin < -1e-9 * h1.norm() {
            return Err(Error::Numerical(format!(
                "constraint Gram matrix has eigenvalue {lmin:.3e}"
            )));
        }
    }
    Ok(DnnCop {
        q0,
        h0,
        h1,
        cone: q.cone_structure(),
        feasible_objective: q.feasible_point.as_deref().map(|u| q.objective(u)),
    })
}

fn square(m: &DMatrix<f64>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::invalid(format!("{what} must be nonempty")));
    }
    Ok(m.nrows())
}

/// Binary QOP `min v^T F v, v in {0,1}^r` lifted with slacks `w = e - v`:
/// `n = 2r`, `C = blockdiag(F, 0)`, `A = (I I)`, `b = e`, all variables
/// binary. With `maximize` the objective is negated so the model always
/// minimizes.
pub fn build_bqop(f: &DMatrix<f64>, maximize: bool) -> Result<QopModel> {
    let r = square(f, "BQOP matrix")?;
    for j in 0..r {
        for i in 0..j {
            if f[(i, j)] != f[(j, i)] {
                return Err(Error::invalid(format!(
                    "BQOP matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let sign = if maximize { -1.0 } else { 1.0 };
    let n = 2 * r;
    let mut c_mat = DMatrix::zeros(n, n);
    for i in 0..r {
        for j in 0..r {
            c_mat[(i, j)] = sign * f[(i, j)];
        }
    }
    let mut a_mat = DMatrix::zeros(r, n);
    for i in 0..r {
        a_mat[(i, i)] = 1.0;
        a_mat[(i, r + i)] = 1.0;
    }
    let mut start = vec![0.0; n];
    start[r..].iter_mut().for_each(|w| *w = 1.0);
    QopModel::new(c_mat, vec![0.0; n], a_mat, vec![1.0; r], 1..=n, [])?.with_feasible_point(start)
}

/// Quadratic assignment `min sum_ij A_ij B_pi(i)pi(j)` over permutations,
/// with `u = vec(W)` (column-major), `C = sym(B ⊗ A)`, and the `2r`
/// row/column assignment equalities.
pub fn build_qap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<QopModel> {
    let r = square(a, "QAP flow matrix")?;
    let rb = square(b, "QAP distance matrix")?;
    if r != rb {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: rb,
        });
    }
    let n = r * r;
    // kron(B, A)[(p*r + i), (q*r + k)] = B[p,q] * A[i,k]
    let kron = |row: usize, col: usize| {
        let (p, i) = (row / r, row % r);
        let (q, k) = (col / r, col % r);
        b[(p, q)] * a[(i, k)]
    };
    let mut c_mat = DMatrix::zeros(n, n);
    for row in 0..n {
        for col in row..n {
            let v = 0.5 * (kron(row, col) + kron(col, row));
            c_mat[(row, col)] = v;
            c_mat[(col, row)] = v;
        }
    }
    let mut a_mat = DMatrix::zeros(2 * r, n);
    for j in 0..r {
        for i in 0..r {
            // (e_j^T ⊗ e^T) u: column j of W sums to one
            a_mat[(j, j * r + i)] = 1.0;
            // (e^T ⊗ e_j^T) u: row j of W sums to one
            a_mat[(r + j, i * r + j)] = 1.0;
        }
    }
    let mut ident = vec![0.0; n];
    for i in 0..r {
        ident[i * r + i] = 1.0;
    }
    QopModel::new(c_mat, vec![0.0; n], a_mat, vec![1.0; 2 * r], 1..=n, [])?
        .with_feasible_point(ident)
}

/// Choice of the trace bound `rho` with `<I, X> <= rho` on the feasible set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rho {
    /// `1 + n`; requires every variable to be binary.
    Auto,
    Value(f64),
}

/// `1 + r` for a QAP of size `r`. Only valid when the assignment equalities
/// hold, which the Lagrangian problem merely penalizes, so this is opt-in.
pub fn qap_tight_rho(r: usize) -> f64 {
    1.0 + r as f64
}

/// The Lagrangian problem `min <Q, X>` over `X in K1 ∩ K2`, `<H, X> = 1`,
/// with `Q = Q0 + lambda H1` and `H = H0`.
#[derive(Clone, Debug)]
pub struct LagrangianCop {
    pub q: SymMatrix,
    pub h: SymMatrix,
    pub lambda: f64,
    pub rho: f64,
    pub source: Arc<DnnCop>,
}

impl LagrangianCop {
    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn cone(&self) -> &ConeStructure {
        &self.source.cone
    }

    /// `G(y) = Q - H y`.
    pub fn g_matrix(&self, y: f64) -> SymMatrix {
        let mut g = self.q.clone();
        g.axpy(-y, &self.h);
        g
    }

    /// Objective of a known feasible QOP point: an upper bound on the
    /// Lagrangian optimum.
    pub fn upper_bound_hint(&self) -> Option<f64> {
        self.source.feasible_objective
    }
}

pub fn lagrangian(d: Arc<DnnCop>, lambda: f64, rho: Rho) -> Result<LagrangianCop> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let rho = match rho {
        Rho::Auto => {
            // X_00 = 1 and X_0i = X_ii with X_0i^2 <= X_00 X_ii give X_ii <= 1
            if !d.cone.all_binary() {
                return Err(Error::invalid(
                    "automatic rho needs every variable binary; pass an explicit rho",
                ));
            }
            1.0 + d.n() as f64
        }
        Rho::Value(v) => {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("rho must be positive, got {v}")));
            }
            v
        }
    };
    let mut q = d.q0.clone();
    q.axpy(lambda, &d.h1);
    Ok(LagrangianCop {
        q,
        h: d.h0.clone(),
        lambda,
        rho,
        source: d,
    })
}
