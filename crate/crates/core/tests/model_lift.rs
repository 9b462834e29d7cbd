mod common;

use lagdnn::matspace::inner;
use lagdnn::model::{build_bqop, build_dnn, build_qap, lagrangian, Rho, DEFAULT_LAMBDA};
use lagdnn::nalgebra::DMatrix;
use lagdnn::oracle::{brute_bqop, brute_qap, brute_qop, qap_objective};
use lagdnn::synth::{random_bqop, random_qap};
use lagdnn::SymMatrix;
use proptest::prelude::*;
use std::sync::Arc;

fn lift(u: &[f64]) -> SymMatrix {
    let x: Vec<f64> = std::iter::once(1.0).chain(u.iter().copied()).collect();
    SymMatrix::from_fn(x.len(), |i, j| x[i] * x[j])
}

proptest! {
    #[test]
    fn rank_one_lift_reproduces_the_objective(r in 1usize..6, seed in any::<u64>(), mask in any::<u32>()) {
        let f = random_bqop(r, 0.7, seed);
        let q = build_bqop(&f, false).unwrap();
        let dnn = build_dnn(&q).unwrap();
        let v: Vec<f64> = (0..r).map(|i| ((mask >> i) & 1) as f64).collect();
        let u: Vec<f64> = v.iter().copied().chain(v.iter().map(|x| 1.0 - x)).collect();
        prop_assert!(q.is_feasible(&u, 0.0));
        let xx = lift(&u);
        let direct: f64 = (0..r).flat_map(|i| (0..r).map(move |j| (i, j))).map(|(i, j)| v[i] * f[(i, j)] * v[j]).sum();
        prop_assert_eq!(q.objective(&u), direct);
        prop_assert!((inner(&dnn.q0, &xx).unwrap() - direct).abs() < 1e-9);
        prop_assert_eq!(inner(&dnn.h0, &xx).unwrap(), 1.0);
        prop_assert!(inner(&dnn.h1, &xx).unwrap().abs() < 1e-12);
        prop_assert!(dnn.cone.contains(&xx, 0.0));
        // an infeasible binary point is penalized
        let mut bad = u.clone();
        bad[0] = 1.0 - bad[0];
        prop_assert!(inner(&dnn.h1, &lift(&bad)).unwrap() > 0.5);
    }
}

#[test]
fn slack_constraints_for_two_variables() {
    let q = build_bqop(&DMatrix::zeros(2, 2), false).unwrap();
    let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    assert_eq!(q.a_mat(), &a);
    assert_eq!(q.b(), &[1.0, 1.0]);
    assert_eq!(q.bin_indices().len(), 4);
}

#[test]
fn lifted_bqop_enumeration_matches_direct() {
    for seed in 0..3 {
        let f = random_bqop(8, 1.0, seed);
        let direct = brute_bqop(&f).unwrap().0;
        let lifted = brute_qop(&build_bqop(&f, false).unwrap()).unwrap().unwrap().0;
        assert_eq!(direct, lifted, "seed {seed}");
    }
}

#[test]
fn lifted_qap_enumeration_matches_trace_formula() {
    for seed in 0..3 {
        let (a, b) = random_qap(3, seed);
        let q = build_qap(&a, &b).unwrap();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut best = f64::INFINITY;
        for p in perms {
            // x_{p*r+i} = 1 when facility i sits at location p
            let mut u = vec![0.0; 9];
            for (i, &loc) in p.iter().enumerate() {
                u[loc * 3 + i] = 1.0;
            }
            assert!(q.is_feasible(&u, 0.0));
            let direct = qap_objective(&a, &b, &p);
            assert!((q.objective(&u) - direct).abs() < 1e-9, "perm {p:?}");
            best = best.min(direct);
        }
        assert_eq!(brute_qap(&a, &b).unwrap().0, best);
        assert_eq!(brute_qop(&q).unwrap().unwrap().0, best);
    }
}

#[test]
fn lagrangian_defaults() {
    assert_eq!(DEFAULT_LAMBDA, 10_000.0);
    let f = random_bqop(4, 1.0, 1);
    let dnn = Arc::new(build_dnn(&build_bqop(&f, false).unwrap()).unwrap());
    let cop = lagrangian(dnn.clone(), DEFAULT_LAMBDA, Rho::Auto).unwrap();
    assert_eq!(cop.rho, 9.0);
    let g = cop.g_matrix(3.0);
    assert_eq!(g.get(0, 0), cop.q.get(0, 0) - 3.0);
    assert_eq!(cop.upper_bound_hint(), Some(0.0));
    assert!(lagrangian(dnn, -1.0, Rho::Auto).is_err());
}
