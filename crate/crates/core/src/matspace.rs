//! Dense symmetric matrices over the space of `(1+n) x (1+n)` symmetric
//! matrices, with the Frobenius inner product and a symmetric
//! eigendecomposition.
//!
//! Symmetry is a construction invariant: every constructor and every
//! arithmetic operation keeps `a[(i, j)]` and `a[(j, i)]` bit-identical.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenvalues with magnitude below `ZERO_EIG_REL * ||A||` are treated as
/// zero whenever a sign decision is made on them.
pub const ZERO_EIG_REL: f64 = 1e-12;

/// A dense real symmetric matrix.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix({}x{}) [", self.dim(), self.dim())?;
        for i in 0..self.dim() {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.dim() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.m[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Builds a matrix from the upper triangle of `f`; `f(i, j)` is only
    /// called for `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(dim);
        for j in 0..dim {
            for i in 0..=j {
                let v = f(i, j);
                out.m[(i, j)] = v;
                out.m[(j, i)] = v;
            }
        }
        out
    }

    /// Wraps a square matrix, rejecting it unless it is exactly symmetric.
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("SymMatrix dimension must be at least 1"));
        }
        for j in 0..m.ncols() {
            for i in 0..j {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(SymMatrix { m })
    }

    /// Row-major nested slices, checked for exact symmetry.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.len();
        for r in rows {
            if r.as_ref().len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: r.as_ref().len(),
                });
            }
        }
        if d == 0 {
            return Err(Error::invalid("SymMatrix dimension must be at least 1"));
        }
        Self::from_dmatrix(DMatrix::from_fn(d, d, |i, j| rows[i].as_ref()[j]))
    }

    /// Symmetrizes an arbitrary square matrix by copying its upper triangle
    /// onto the lower one.
    pub(crate) fn from_upper(mut m: DMatrix<f64>) -> Self {
        let d = m.nrows();
        debug_assert_eq!(d, m.ncols());
        for j in 0..d {
            for i in 0..j {
                m[(j, i)] = m[(i, j)];
            }
        }
        SymMatrix { m }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] = v;
        self.m[(j, i)] = v;
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.m
    }

    /// Row-major copy of all `dim * dim` entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|&v| v == 0.0)
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// Frobenius inner product without a dimension check.
    #[inline]
    pub(crate) fn dot(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.m
            .as_slice()
            .iter()
            .zip(other.m.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { m: &self.m * s }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &SymMatrix) {
        debug_assert_eq!(self.dim(), x.dim());
        for (s, v) in self.m.as_mut_slice().iter_mut().zip(x.m.as_slice()) {
            *s += a * v;
        }
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.m
            .as_slice()
            .iter()
            .zip(other.m.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn map_entries(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        SymMatrix { m: self.m.map(f) }
    }

    /// `V diag(w) V^T` restricted to the columns listed in `cols`.
    pub(crate) fn from_eigen_columns(vectors: &DMatrix<f64>, cols: &[(usize, f64)]) -> SymMatrix {
        let d = vectors.nrows();
        if cols.is_empty() {
            return SymMatrix::zeros(d);
        }
        let k = cols.len();
        let mut v = DMatrix::zeros(d, k);
        let mut vw = DMatrix::zeros(d, k);
        for (c, &(idx, w)) in cols.iter().enumerate() {
            let src = vectors.column(idx);
            v.column_mut(c).copy_from(&src);
            vw.column_mut(c).copy_from(&(src * w));
        }
        SymMatrix::from_upper(vw * v.transpose())
    }
}

impl<'a> Add<&'a SymMatrix> for &'a SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in add");
        SymMatrix { m: &self.m + &rhs.m }
    }
}

impl<'a> Sub<&'a SymMatrix> for &'a SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in sub");
        SymMatrix { m: &self.m - &rhs.m }
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix { m: -&self.m }
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

/// Frobenius inner product `sum_ij A_ij B_ij`.
pub fn inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.dot(b))
}

/// Frobenius norm.
pub fn norm(a: &SymMatrix) -> f64 {
    a.norm()
}

/// Eigendecomposition `A = V diag(values) V^T` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// `V diag(f(values)) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let cols: Vec<(usize, f64)> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &l)| (i, f(l)))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        SymMatrix::from_eigen_columns(&self.vectors, &cols)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }
}

/// Symmetric eigendecomposition, eigenvalues sorted ascending.
pub fn eig_sym(a: &SymMatrix) -> Result<SymEigen> {
    let d = a.dim();
    let max_sweeps = 60;
    let (vals, vecs) = crate::eigen::symmetric_eigen(a.m.as_slice(), d, max_sweeps).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge (dim {d}, norm {:.3e})",
            a.norm()
        ))
    })?;
    let vecs = DMatrix::from_vec(d, d, vecs);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let values: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    let mut vectors = DMatrix::zeros(d, d);
    for (c, &i) in order.iter().enumerate() {
        vectors.column_mut(c).copy_from(&vecs.column(i));
    }
    Ok(SymEigen { values, vectors })
}

/// Smallest eigenvalue of `a`.
pub fn lambda_min(a: &SymMatrix) -> Result<f64> {
    Ok(eig_sym(a)?.values[0])
}

/// Splits `a = pos - neg` with `pos = Pi_psd(a)` and `neg = Pi_psd(-a)`.
///
/// Only the smaller of the two spectral parts is assembled from
/// eigenvectors; the other is recovered by one matrix addition so that the
/// identity `a = pos - neg` holds up to a single rounding per entry.
/// Eigenvalues within `ZERO_EIG_REL * ||a||` of zero are dropped.
pub(crate) fn psd_split(a: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let eig = eig_sym(a)?;
    let cut = ZERO_EIG_REL * a.norm();
    let pos: Vec<(usize, f64)> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > cut)
        .map(|(i, &l)| (i, l))
        .collect();
    let neg: Vec<(usize, f64)> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l < -cut)
        .map(|(i, &l)| (i, -l))
        .collect();
    if neg.len() <= pos.len() {
        let n = SymMatrix::from_eigen_columns(&eig.vectors, &neg);
        let p = if neg.is_empty() { a.clone() } else { a + &n };
        Ok((p, n))
    } else {
        let p = SymMatrix::from_eigen_columns(&eig.vectors, &pos);
        let n = if pos.is_empty() { -a } else { &p - a };
        Ok((p, n))
    }
}
