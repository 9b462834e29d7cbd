//! Seeded random instances.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric integer matrix with entries uniform in `[-100, 100]`; each
/// entry of the upper triangle is nonzero with probability `density`.
pub fn random_bqop(r: usize, density: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            if rng.gen_bool(density.clamp(0.0, 1.0)) {
                let v = rng.gen_range(-100i32..=100) as f64;
                f[(i, j)] = v;
                f[(j, i)] = v;
            }
        }
    }
    f
}

/// Flow and distance matrices: symmetric, zero diagonal, integer entries
/// in `[0, 9]` and `[1, 9]`.
pub fn random_qap(r: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(r, r);
    let mut b = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in i + 1..r {
            let x = rng.gen_range(0..=9) as f64;
            let y = rng.gen_range(1..=9) as f64;
            a[(i, j)] = x;
            a[(j, i)] = x;
            b[(i, j)] = y;
            b[(j, i)] = y;
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_symmetric() {
        let f = random_bqop(6, 0.5, 3);
        assert_eq!(f, random_bqop(6, 0.5, 3));
        assert_eq!(f, f.transpose());
        assert!(f.iter().all(|v| v.fract() == 0.0 && v.abs() <= 100.0));
        let (a, b) = random_qap(4, 9);
        assert_eq!(a, a.transpose());
        assert_eq!(b, b.transpose());
        assert!((0..4).all(|i| a[(i, i)] == 0.0 && b[(i, i)] == 0.0));
    }
}
