//! Metric projections onto the PSD cone `K1`, the structured nonnegative
//! cone `K2`, their duals, and (by Dykstra's method) onto `K1 ∩ K2`.
//!
//! `K2` is the set of entrywise nonnegative symmetric matrices that satisfy
//! `X_0i = X_i0 = X_ii` for every binary index `i` and `X_jk = X_kj = 0`
//! for every complementarity pair `(j, k)`. Those constraints split the
//! entries into disjoint groups, so the projection is a groupwise average
//! followed by a clamp at zero.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::matspace::{psd_split, SymMatrix};

/// Binary and complementarity pattern that defines `K2` on matrices of
/// dimension `1 + n` (row/column 0 is the homogenizing coordinate).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeStructure {
    n: usize,
    // is_bin[i] for i in 0..=n; is_bin[0] is always false
    is_bin: Vec<bool>,
    comp: BTreeSet<(usize, usize)>,
}

impl ConeStructure {
    pub fn new(
        n: usize,
        bin_indices: impl IntoIterator<Item = usize>,
        comp_pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut is_bin = vec![false; n + 1];
        for i in bin_indices {
            if i == 0 || i > n {
                return Err(Error::invalid(format!(
                    "binary index {i} out of range 1..={n}"
                )));
            }
            is_bin[i] = true;
        }
        let mut comp = BTreeSet::new();
        for (j, k) in comp_pairs {
            if j == 0 || k > n || j >= k {
                return Err(Error::invalid(format!(
                    "complementarity pair ({j}, {k}) must satisfy 1 <= j < k <= {n}"
                )));
            }
            comp.insert((j, k));
        }
        // A forced-zero entry may not coincide with an entry of a linked
        // triple (0,i),(i,0),(i,i). With 1 <= j < k this cannot happen, but the
        // groups must stay disjoint for the closed-form projection.
        for &(j, k) in &comp {
            if j == k {
                return Err(Error::invalid(format!(
                    "complementarity pair ({j}, {k}) collides with a diagonal entry"
                )));
            }
        }
        Ok(ConeStructure { n, is_bin, comp })
    }

    /// Plain nonnegative cone: no binary links, no forced zeros.
    pub fn nonnegative(n: usize) -> Self {
        ConeStructure {
            n,
            is_bin: vec![false; n + 1],
            comp: BTreeSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn is_bin(&self, i: usize) -> bool {
        self.is_bin.get(i).copied().unwrap_or(false)
    }

    pub fn bin_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n).filter(move |&i| self.is_bin[i])
    }

    pub fn comp_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.comp.iter().copied()
    }

    pub fn all_binary(&self) -> bool {
        (1..=self.n).all(|i| self.is_bin[i])
    }

    fn check_dim(&self, a: &SymMatrix) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.dim(),
            });
        }
        Ok(())
    }

    /// Whether `a` lies in `K2`, with entries allowed to miss by `tol`.
    pub fn contains(&self, a: &SymMatrix, tol: f64) -> bool {
        if a.dim() != self.dim() {
            return false;
        }
        let d = self.dim();
        for j in 0..d {
            for i in 0..=j {
                if a.get(i, j) < -tol {
                    return false;
                }
            }
        }
        for i in self.bin_indices() {
            if (a.get(0, i) - a.get(i, i)).abs() > tol {
                return false;
            }
        }
        self.comp
            .iter()
            .all(|&(j, k)| a.get(j, k).abs() <= tol)
    }
}

/// Projection onto the PSD cone: `V diag(max(lambda, 0)) V^T`.
pub fn project_psd(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(psd_split(a)?.0)
}

/// Projection onto `K2`.
pub fn project_k2(a: &SymMatrix, s: &ConeStructure) -> Result<SymMatrix> {
    s.check_dim(a)?;
    let mut out = a.map_entries(|v| v.max(0.0));
    for &(j, k) in &s.comp {
        out.set(j, k, 0.0);
    }
    for i in s.bin_indices() {
        // (0,i) and (i,0) are one stored value counted twice by the norm
        let t = ((a.get(0, i) + a.get(i, 0) + a.get(i, i)) / 3.0).max(0.0);
        out.set(0, i, t);
        out.set(i, i, t);
    }
    Ok(out)
}

/// Projection onto the dual cone `K2*`, written out entrywise. Equal to
/// `a + project_k2(-a)`.
pub(crate) fn project_k2_dual_into(a: &SymMatrix, s: &ConeStructure, out: &mut SymMatrix) {
    debug_assert_eq!(a.dim(), s.dim());
    *out = a.map_entries(|v| v.max(0.0));
    for &(j, k) in &s.comp {
        out.set(j, k, a.get(j, k));
    }
    for i in s.bin_indices() {
        let t = (-(a.get(0, i) + a.get(i, 0) + a.get(i, i)) / 3.0).max(0.0);
        out.set(0, i, a.get(0, i) + t);
        out.set(i, i, a.get(i, i) + t);
    }
}

/// The two cones of the splitting.
#[derive(Clone, Copy, Debug)]
pub enum Cone<'a> {
    /// `K1`, the PSD cone (self-dual).
    Psd,
    /// `K2` with the given structure.
    Structured(&'a ConeStructure),
}

impl Cone<'_> {
    pub fn project(&self, a: &SymMatrix) -> Result<SymMatrix> {
        match self {
            Cone::Psd => project_psd(a),
            Cone::Structured(s) => project_k2(a, s),
        }
    }
}

/// Projection onto the dual cone via Moreau: `Pi*(A) = A + Pi(-A)`.
pub fn project_dual(a: &SymMatrix, cone: Cone<'_>) -> Result<SymMatrix> {
    let p = cone.project(&-a)?;
    Ok(a + &p)
}

/// Dykstra's alternating projections onto `K1 ∩ K2`.
///
/// Stops once both the change between successive `K2` iterates and the gap
/// between the paired `K1` and `K2` iterates drop to `tol`.
pub fn project_intersection_dykstra(
    a: &SymMatrix,
    s: &ConeStructure,
    tol: f64,
    max_iter: usize,
) -> Result<SymMatrix> {
    s.check_dim(a)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("Dykstra tolerance must be positive"));
    }
    let d = a.dim();
    let mut x = a.clone();
    let mut p = SymMatrix::zeros(d);
    let mut q = SymMatrix::zeros(d);
    for _ in 0..max_iter {
        let xp = &x + &p;
        let y = project_psd(&xp)?;
        p = &xp - &y;
        let yq = &y + &q;
        let x_new = project_k2(&yq, s)?;
        q = &yq - &x_new;
        let change = (&x_new - &x).norm();
        let gap = (&y - &x_new).norm();
        x = x_new;
        if change <= tol && gap <= tol {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        what: "Dykstra projection",
        iterations: max_iter,
    })
}
