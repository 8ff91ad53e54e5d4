mod common;

use common::{generic, orthonormal, random_reduced, rel, toy, vector};
use dino_core::bases::ReducedBasisPair;
use dino_core::datagen::Dataset;
use dino_core::metrics::{evaluate, h1_seminorm_accuracy, misfit_gradient, EvalConfig, Metric};
use dino_core::netop::OperatorModel;
use dino_core::{Matrix, TruncatedJacobian};
use proptest::prelude::*;

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let keys = vector(n, seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    idx
}

/// Applies the orthogonal change of observation coordinates `q ↦ Qq`.
fn rotate(ds: &Dataset, model: &OperatorModel, q: &Matrix) -> (Dataset, OperatorModel) {
    let mut out = ds.clone();
    out.q = ds.q.matmul_tr(q);
    for j in &mut out.jac {
        j.u = q.matmul(&j.u);
    }
    let b = model.bases().unwrap();
    let bases = ReducedBasisPair::new(b.psi.clone(), q.matmul(&b.phi), q.matvec(&b.b), b.input_kind, b.output_kind).unwrap();
    (out, OperatorModel::reduced(bases, model.spec.clone(), model.weights.clone()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn metrics_ignore_test_set_order(seed in any::<u64>(), reduced in any::<bool>()) {
        let ds = toy(8, 4, 3, 7, 3, seed);
        let model = if reduced { random_reduced(8, 4, 3, 2, 5, seed ^ 1) } else { generic(vec![8, 5, 4], seed ^ 1) };
        let perm = permutation(ds.len(), seed ^ 2);
        let cfg = EvalConfig { seed: seed ^ 3, ..Default::default() };
        let a = evaluate(&model, &ds, &cfg).unwrap();
        let b = evaluate(&model, &ds.subset(&perm), &cfg).unwrap();
        for (ra, rb) in a.results.iter().zip(&b.results) {
            prop_assert_eq!(ra.metric, rb.metric);
            prop_assert!(ra.accuracy <= 1.0);
            prop_assert_eq!(ra.per_sample.len(), ds.len());
            prop_assert!((ra.accuracy - rb.accuracy).abs() <= 1e-12 * ra.accuracy.abs().max(1.0));
            for (j, &i) in perm.iter().enumerate() {
                // The noise scale is a dataset mean, so equality holds up to summation order.
                let (x, y) = (ra.per_sample[i], rb.per_sample[j]);
                prop_assert!(x == y || rel(x, y) <= 1e-12, "{:?}: {} vs {}", ra.metric, x, y);
            }
        }
    }

    #[test]
    fn misfit_gradient_is_rotation_invariant(seed in any::<u64>(), r in 1usize..5) {
        let (d_q, d_m) = (5, 7);
        let jac = TruncatedJacobian {
            u: orthonormal(d_q, r, seed),
            sigma: (0..r).map(|i| (r - i) as f64).collect(),
            v: orthonormal(d_m, r, seed ^ 1),
        };
        let q = orthonormal(d_q, d_q, seed ^ 2);
        let pred = vector(d_q, seed ^ 3);
        let d = vector(d_q, seed ^ 4);
        let ones = vec![1.0; d_q];
        let g = misfit_gradient(&jac, &pred, &d, &ones).unwrap();
        let rotated = TruncatedJacobian { u: q.matmul(&jac.u), ..jac.clone() };
        let g_rot = misfit_gradient(&rotated, &q.matvec(&pred), &q.matvec(&d), &ones).unwrap();
        let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
        for (a, b) in g.iter().zip(&g_rot) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn deterministic_metrics_are_rotation_invariant(seed in any::<u64>()) {
        let ds = toy(8, 4, 3, 5, 4, seed);
        let model = random_reduced(8, 4, 3, 3, 5, seed ^ 1);
        let (ds_rot, model_rot) = rotate(&ds, &model, &orthonormal(4, 4, seed ^ 2));
        let cfg = EvalConfig { metrics: vec![Metric::L2, Metric::H1, Metric::Gn, Metric::Rgn], ..Default::default() };
        let a = evaluate(&model, &ds, &cfg).unwrap();
        let b = evaluate(&model_rot, &ds_rot, &cfg).unwrap();
        for (ra, rb) in a.results.iter().zip(&b.results) {
            prop_assert!((ra.accuracy - rb.accuracy).abs() <= 1e-10, "{:?}: {} vs {}", ra.metric, ra.accuracy, rb.accuracy);
        }
    }

    #[test]
    fn factored_h1_error_matches_materialized_jacobians(seed in any::<u64>(), reduced in any::<bool>()) {
        // Rank d_Q, so the stored factors are the full Jacobian.
        let ds = toy(9, 4, 3, 4, 4, seed);
        let model = if reduced { random_reduced(9, 4, 3, 2, 5, seed ^ 1) } else { generic(vec![9, 5, 4], seed ^ 1) };
        let res = h1_seminorm_accuracy(&model, &ds).unwrap();
        let mut total = 0.0;
        for i in 0..ds.len() {
            let dense = ds.jac[i].to_dense();
            let err = dense.sub(&model.full_jacobian(ds.m.row(i)).unwrap()).frobenius_sq() / dense.frobenius_sq();
            prop_assert!(rel(err, res.per_sample[i]) <= 1e-10);
            total += err;
        }
        let expected = 1.0 - (total / ds.len() as f64).sqrt();
        prop_assert!((expected - res.accuracy).abs() <= 1e-10 * expected.abs().max(1.0));
    }
}

#[test]
fn jacobian_metrics_need_jacobians() {
    let mut ds = toy(6, 3, 2, 3, 2, 1);
    ds.jac.clear();
    let model = generic(vec![6, 4, 3], 0);
    assert!(evaluate(&model, &ds, &EvalConfig::default()).is_err());
    let l2_only = EvalConfig { metrics: vec![Metric::L2], ..Default::default() };
    assert_eq!(evaluate(&model, &ds, &l2_only).unwrap().results.len(), 1);
}
