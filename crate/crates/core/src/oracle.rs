//! Exhaustive reference solvers for small instances.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::QopModel;

pub const MAX_BQOP_SIZE: usize = 22;
pub const MAX_QAP_SIZE: usize = 9;

/// Minimum of `v^T F v` over `v in {0,1}^r`, with a minimizer.
///
/// Walks the Gray code so each step flips one bit and updates `F v` in
/// `O(r)`.
pub fn brute_bqop(f: &DMatrix<f64>) -> Result<(f64, Vec<bool>)> {
    let r = f.nrows();
    if f.ncols() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: f.ncols(),
        });
    }
    if r > MAX_BQOP_SIZE {
        return Err(Error::TooLarge {
            size: r,
            limit: MAX_BQOP_SIZE,
        });
    }
    let mut v = vec![false; r];
    let mut fv = vec![0.0; r];
    let mut val = 0.0;
    let mut best = (0.0, v.clone());
    for k in 1u64..(1u64 << r) {
        let i = k.trailing_zeros() as usize;
        let s = if v[i] { -1.0 } else { 1.0 };
        // (v + s e_i)^T F (v + s e_i) = val + 2 s (F v)_i + F_ii
        val += 2.0 * s * fv[i] + f[(i, i)];
        v[i] = !v[i];
        for j in 0..r {
            fv[j] += s * f[(j, i)];
        }
        if val < best.0 {
            best = (val, v.clone());
        }
    }
    Ok(best)
}

/// `sum_ij A_ij B_pi(i)pi(j)`.
pub fn qap_objective(a: &DMatrix<f64>, b: &DMatrix<f64>, perm: &[usize]) -> f64 {
    let r = perm.len();
    let mut s = 0.0;
    for i in 0..r {
        for j in 0..r {
            s += a[(i, j)] * b[(perm[i], perm[j])];
        }
    }
    s
}

/// Minimum of the QAP objective over all permutations, with a minimizer
/// (0-based, `perm[i]` is the location assigned to facility `i`).
pub fn brute_qap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, Vec<usize>)> {
    let r = a.nrows();
    if a.ncols() != r || b.nrows() != r || b.ncols() != r {
        return Err(Error::invalid("QAP matrices must be square and of equal size"));
    }
    if r > MAX_QAP_SIZE {
        return Err(Error::TooLarge {
            size: r,
            limit: MAX_QAP_SIZE,
        });
    }
    if r == 0 {
        return Err(Error::invalid("QAP matrices must be nonempty"));
    }
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = (qap_objective(a, b, &perm), perm.clone());
    while next_permutation(&mut perm) {
        let v = qap_objective(a, b, &perm);
        if v < best.0 {
            best = (v, perm.clone());
        }
    }
    Ok(best)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Minimum of a QOP whose variables are all binary, by enumerating every
/// 0/1 vector and keeping the feasible ones. `None` if nothing is feasible.
pub fn brute_qop(q: &QopModel) -> Result<Option<(f64, Vec<f64>)>> {
    let n = q.n();
    if q.bin_indices().len() != n {
        return Err(Error::invalid("enumeration needs every variable binary"));
    }
    if n > MAX_BQOP_SIZE {
        return Err(Error::TooLarge {
            size: n,
            limit: MAX_BQOP_SIZE,
        });
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut u = vec![0.0; n];
    for mask in 0u64..(1u64 << n) {
        for (i, x) in u.iter_mut().enumerate() {
            *x = ((mask >> i) & 1) as f64;
        }
        if !q.is_feasible(&u, 1e-9) {
            continue;
        }
        let v = q.objective(&u);
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, u.clone()));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bqop, build_qap};

    #[test]
    fn bqop_examples() {
        assert_eq!(brute_bqop(&DMatrix::zeros(3, 3)).unwrap().0, 0.0);
        let f = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert_eq!(brute_bqop(&f).unwrap(), (-2.0, vec![true, true]));
        assert!(matches!(
            brute_bqop(&DMatrix::zeros(23, 23)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn gray_code_matches_direct_enumeration() {
        let f = DMatrix::from_row_slice(3, 3, &[2.0, -3.0, 1.0, -3.0, 1.0, -4.0, 1.0, -4.0, 0.5]);
        let mut direct = f64::INFINITY;
        for m in 0..8u32 {
            let v: Vec<f64> = (0..3).map(|i| ((m >> i) & 1) as f64).collect();
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += v[i] * f[(i, j)] * v[j];
                }
            }
            direct = direct.min(s);
        }
        assert_eq!(brute_bqop(&f).unwrap().0, direct);
        let lifted = brute_qop(&build_bqop(&f, false).unwrap()).unwrap().unwrap();
        assert_eq!(lifted.0, direct);
    }

    #[test]
    fn qap_examples() {
        let a = DMatrix::from_element(1, 1, 3.0);
        let b = DMatrix::from_element(1, 1, -2.0);
        assert_eq!(brute_qap(&a, &b).unwrap().0, -6.0);

        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0]);
        assert_eq!(brute_qap(&a, &b).unwrap().0, 6.0);
        let lifted = brute_qop(&build_qap(&a, &b).unwrap()).unwrap().unwrap();
        assert_eq!(lifted.0, 6.0);

        // A = I: every permutation sums the diagonal of B
        let b = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 2.0, 1.0, -1.0, 7.0, 2.0, 7.0, 5.0]);
        assert_eq!(brute_qap(&DMatrix::identity(3, 3), &b).unwrap().0, 8.0);
    }

    #[test]
    fn permutation_count() {
        let mut p: Vec<usize> = (0..5).collect();
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 120);
    }

    #[test]
    fn infeasible_model() {
        let q = QopModel::new(
            DMatrix::zeros(1, 1),
            vec![0.0],
            DMatrix::from_element(1, 1, 1.0),
            vec![2.0],
            [1],
            [],
        )
        .unwrap();
        assert!(brute_qop(&q).unwrap().is_none());
    }
}
