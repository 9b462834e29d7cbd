mod common;

use std::sync::Arc;

use lagdnn::apg::{eval_g, ApgParams, ApgStatus};
use lagdnn::cones::{project_intersection_dykstra, project_k2, project_psd};
use lagdnn::matspace::{inner, lambda_min};
use lagdnn::model::{build_dnn, lagrangian, QopModel, Rho};
use lagdnn::nalgebra::DMatrix;
use lagdnn::SymMatrix;
use rand::Rng;

/// A 4-variable QOP with random data, some binaries and one or two
/// complementarity pairs: a 5x5 lifted problem.
fn random_cop(seed: u64) -> lagdnn::model::LagrangianCop {
    let mut rng = common::rng(seed);
    let n = 4;
    let c = common::random_sym(&mut rng, n, 5.0).into_dmatrix();
    let cv: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let a = DMatrix::from_fn(1, n, |_, _| rng.gen_range(0.0..2.0));
    let b = vec![rng.gen_range(0.5..2.0)];
    let bins: Vec<usize> = (1..=n).filter(|_| rng.gen_bool(0.5)).collect();
    let comps = if rng.gen_bool(0.5) { vec![(1, 3)] } else { vec![(2, 4), (1, 2)] };
    let q = QopModel::new(c, cv, a, b, bins, comps).unwrap();
    lagrangian(Arc::new(build_dnn(&q).unwrap()), 10.0, Rho::Value(5.0)).unwrap()
}

#[test]
fn minus_identity_gives_sqrt_two() {
    let s = lagdnn::cones::ConeStructure::nonnegative(1);
    let x = project_intersection_dykstra(&SymMatrix::identity(2), &s, 1e-12, 1000).unwrap();
    assert!((x.norm() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn apg_agrees_with_dykstra_on_random_structured_problems() {
    let params = ApgParams::default();
    for seed in 0..10 {
        let cop = random_cop(seed);
        for y in [-40.0, -5.0, 0.0, 5.0, 30.0] {
            let res = eval_g(&cop, y, &params).unwrap();
            let a = -&cop.g_matrix(y);
            let xd = project_intersection_dykstra(&a, cop.cone(), 1e-10 * (1.0 + a.norm()), 200_000).unwrap();
            let gd = xd.norm();
            assert!(
                (res.g - gd).abs() <= 1e-6 * (1.0 + gd),
                "seed {seed} y {y}: apg {} dykstra {gd} ({:?})",
                res.g,
                res.status
            );
        }
    }
}

#[test]
fn outputs_satisfy_the_splitting_identity() {
    let params = ApgParams::default();
    let cop = random_cop(42);
    for y in [-10.0, 10.0] {
        let r = eval_g(&cop, y, &params).unwrap();
        let g = cop.g_matrix(y);
        let recomposed = &(&r.y1 + &r.y2) - &r.x;
        assert!(recomposed.max_abs_diff(&g) <= 1e-9 * (1.0 + g.norm()));
        assert!(lambda_min(&r.y1).unwrap() >= -1e-9 * (1.0 + r.y1.norm()));
        assert!(common::in_k2_dual(&r.y2, cop.cone(), 1e-9));
        if r.status == ApgStatus::Converged {
            // X is in both cones up to the residual
            assert!((&project_psd(&r.x).unwrap() - &r.x).norm() <= 1e-9 * (1.0 + r.x.norm()));
            assert!((&project_k2(&r.x, cop.cone()).unwrap() - &r.x).norm() <= 1e-6 * (1.0 + r.x.norm()));
            assert!(inner(&r.x, &r.y1).unwrap().abs() <= 1e-6 * (1.0 + r.x.norm() * r.y1.norm()));
        }
    }
}
