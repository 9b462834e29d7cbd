mod common;

use lagdnn::cones::{
    project_dual, project_intersection_dykstra, project_k2, project_psd, Cone, ConeStructure,
};
use lagdnn::matspace::{inner, lambda_min};
use lagdnn::SymMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A random matrix of size 1..=12 paired with a random structure.
fn case() -> impl Strategy<Value = (SymMatrix, SymMatrix, ConeStructure)> {
    (1usize..12, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_structure(&mut rng, n);
        let a = common::random_sym(&mut rng, n + 1, 10.0);
        let b = common::random_sym(&mut rng, n + 1, 10.0);
        (a, b, s)
    })
}

fn cones(s: &ConeStructure) -> [Cone<'_>; 2] {
    [Cone::Psd, Cone::Structured(s)]
}

proptest! {
    #[test]
    fn idempotent((a, _, s) in case()) {
        for cone in cones(&s) {
            let p = cone.project(&a).unwrap();
            let pp = cone.project(&p).unwrap();
            prop_assert!(pp.max_abs_diff(&p) <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn nonexpansive((a, b, s) in case()) {
        for cone in cones(&s) {
            let d = (&cone.project(&a).unwrap() - &cone.project(&b).unwrap()).norm();
            prop_assert!(d <= (&a - &b).norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn moreau_split((a, _, s) in case()) {
        for cone in cones(&s) {
            let p = cone.project(&a).unwrap();
            let q = project_dual(&(-&a), cone).unwrap();
            let scale = 1.0 + a.norm().powi(2);
            prop_assert!((&p - &q).max_abs_diff(&a) <= 1e-10 * scale);
            prop_assert!(inner(&p, &q).unwrap().abs() <= 1e-10 * scale);
            let split = p.norm().powi(2) + q.norm().powi(2);
            prop_assert!((split - a.norm().powi(2)).abs() <= 1e-9 * (1.0 + a.norm().powi(2)));
        }
    }

    #[test]
    fn k2_membership_is_exact((a, _, s) in case()) {
        let p = project_k2(&a, &s).unwrap();
        prop_assert!(s.contains(&p, 0.0));
        for i in s.bin_indices() {
            prop_assert_eq!(p.get(0, i), p.get(i, i));
            prop_assert_eq!(p.get(i, 0), p.get(i, i));
        }
        for (j, k) in s.comp_pairs() {
            prop_assert_eq!(p.get(j, k), 0.0);
        }
        prop_assert!(p.as_dmatrix().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn dual_projections_land_in_dual_cones((a, _, s) in case()) {
        let y = project_dual(&a, Cone::Structured(&s)).unwrap();
        prop_assert!(common::in_k2_dual(&y, &s, 1e-12 * (1.0 + a.norm())));
        // Y - A is in -K2 and orthogonal to Y
        prop_assert!(inner(&(&y - &a), &y).unwrap().abs() <= 1e-10 * (1.0 + a.norm().powi(2)));
        let z = project_dual(&a, Cone::Psd).unwrap();
        prop_assert!(lambda_min(&z).unwrap() >= -1e-10 * (1.0 + a.norm()));
        prop_assert!(z.max_abs_diff(&project_psd(&a).unwrap()) <= 1e-12 * (1.0 + a.norm()));
    }
}

#[test]
fn k2_linked_triple_example() {
    // minimizing 2(x+1)^2 + (x-4)^2 over x >= 0 gives x = 2/3
    let s = ConeStructure::new(1, [1], []).unwrap();
    let a = SymMatrix::from_rows(&[[1.0, -1.0], [-1.0, 4.0]]).unwrap();
    let p = project_k2(&a, &s).unwrap();
    let t = 2.0 / 3.0;
    let x = (0..=3000).map(|k| k as f64 / 1000.0).min_by(|x, y| {
        let f = |x: f64| 2.0 * (x + 1.0).powi(2) + (x - 4.0).powi(2);
        f(*x).total_cmp(&f(*y))
    });
    assert!((x.unwrap() - t).abs() < 1e-3);
    assert!((p.get(0, 1) - t).abs() < 1e-15 && (p.get(1, 1) - t).abs() < 1e-15);
    assert_eq!(p.get(0, 0), 1.0);
}

#[test]
fn dual_fixed_points() {
    let a = SymMatrix::from_rows(&[[-1.0, 0.0], [0.0, 1.0]]).unwrap();
    let expected = SymMatrix::from_rows(&[[0.0, 0.0], [0.0, 1.0]]).unwrap();
    assert!(project_dual(&a, Cone::Psd).unwrap().max_abs_diff(&expected) < 1e-15);
    // inside the dual of the nonnegative cone with one linked triple
    let s = ConeStructure::new(2, [1], [(1, 2)]).unwrap();
    let y = SymMatrix::from_rows(&[[0.5, -1.0, 0.2], [-1.0, 3.0, -7.0], [0.2, -7.0, 1.0]]).unwrap();
    assert!(common::in_k2_dual(&y, &s, 0.0));
    assert!(project_dual(&y, Cone::Structured(&s)).unwrap().max_abs_diff(&y) < 1e-15);
}

#[test]
fn dykstra_matches_grid_search_on_two_by_two() {
    let s = ConeStructure::nonnegative(1);
    let a = SymMatrix::from_rows(&[[-1.0, 3.0], [3.0, -1.0]]).unwrap();
    let p = project_intersection_dykstra(&a, &s, 1e-12, 200_000).unwrap();
    // X = [[u, w], [w, v]] with u, v >= 0 and 0 <= w = t sqrt(uv), t in [0, 1]
    let dist = |u: f64, v: f64, t: f64| {
        let w = t * (u * v).sqrt();
        (u + 1.0).powi(2) + (v + 1.0).powi(2) + 2.0 * (w - 3.0).powi(2)
    };
    let k = 40;
    let mut ranges = [(0.0f64, 4.0f64), (0.0, 4.0), (0.0, 1.0)];
    let mut best = (f64::INFINITY, [0.0; 3]);
    for _ in 0..12 {
        let pts = |(lo, hi): (f64, f64)| (0..=k).map(move |i| lo + (hi - lo) * i as f64 / k as f64);
        for u in pts(ranges[0]) {
            for v in pts(ranges[1]) {
                for t in pts(ranges[2]) {
                    let f = dist(u, v, t);
                    if f < best.0 {
                        best = (f, [u, v, t]);
                    }
                }
            }
        }
        for (i, (r, c)) in ranges.iter_mut().zip(best.1).enumerate() {
            let h = (r.1 - r.0) / k as f64 * 2.0;
            let upper = if i == 2 { 1.0 } else { f64::INFINITY };
            *r = ((c - h).max(0.0), (c + h).min(upper));
        }
    }
    let [u, v, t] = best.1;
    let w = t * (u * v).sqrt();
    assert!((p.get(0, 0) - u).abs() < 1e-6, "{p:?} vs {u}");
    assert!((p.get(1, 1) - v).abs() < 1e-6);
    assert!((p.get(0, 1) - w).abs() < 1e-6);
}

#[test]
fn dykstra_trivial_cases() {
    let s = ConeStructure::nonnegative(2);
    let a = SymMatrix::from_rows(&[[2.0, 1.0, 0.5], [1.0, 2.0, 1.0], [0.5, 1.0, 2.0]]).unwrap();
    assert!(project_intersection_dykstra(&a, &s, 1e-12, 1000).unwrap().max_abs_diff(&a) < 1e-12);
    let z = project_intersection_dykstra(&(-&SymMatrix::identity(3)), &s, 1e-12, 1000).unwrap();
    assert!(z.norm() < 1e-12);
    assert!(project_intersection_dykstra(&a, &s, 0.0, 10).is_err());
}
