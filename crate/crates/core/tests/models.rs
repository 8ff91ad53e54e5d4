mod common;

use dino_core::linalg::{adjoint_defect, norm2};
use dino_core::models::{
    Grid, NewtonConfig, ObservationLayout, PriorConfig, PriorSampler, RdConfig, RdModel, SourceConfig, ToyConfig, ToyMap,
};
use dino_core::{rng, LinearOperator, Matrix};
use proptest::prelude::*;

const LAYOUT: ObservationLayout = ObservationLayout { nx: 2, ny: 2 };

fn rd(grid_n: usize, c_nl: f64) -> RdModel {
    RdModel::new(&RdConfig { grid_n, c_nl, observations: LAYOUT, ..Default::default() }).unwrap()
}

fn prior_draw(grid_n: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let cfg = PriorConfig { delta: 1.0, gamma: 0.1, grid: Grid::new(grid_n).unwrap() };
    let m = PriorSampler::new(&cfg).unwrap().sample(&mut rng::stream(seed));
    m.into_iter().map(|x| amplitude * x).collect()
}

fn directional_fd(model: &RdModel, m: &[f64], v: &[f64], eps: f64) -> Vec<f64> {
    let shifted = |s: f64| model.forward(&m.iter().zip(v).map(|(a, b)| a + s * eps * b).collect::<Vec<_>>()).unwrap();
    let (p, n) = (shifted(1.0), shifted(-1.0));
    p.iter().zip(&n).map(|(a, b)| (a - b) / (2.0 * eps)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rd_jacobian_is_adjoint_consistent(seed in any::<u64>(), c_nl in prop_oneof![Just(0.0), Just(1.0), 0.0f64..3.0]) {
        let model = rd(7, c_nl);
        let m = prior_draw(7, 1.0, seed);
        let sol = model.solve_state(&m).unwrap();
        let jac = model.jacobian_operator(&m, &sol.u).unwrap();
        prop_assert!(adjoint_defect(&jac, 20, seed ^ 1) < 1e-10);
    }

    #[test]
    fn rd_jacobian_matches_finite_differences(seed in any::<u64>(), c_nl in prop_oneof![Just(0.0), Just(1.0)]) {
        let model = rd(7, c_nl);
        let m = prior_draw(7, 1.0, seed);
        let sol = model.solve_state(&m).unwrap();
        let jac = model.jacobian_operator(&m, &sol.u).unwrap();
        let v = common::vector(m.len(), seed ^ 2);
        let jv = jac.apply(&v);
        let fd = directional_fd(&model, &m, &v, 1e-6);
        let err: f64 = jv.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-6 * norm2(&jv).max(1e-12), "{} vs {}", err, norm2(&jv));
    }

    #[test]
    fn linear_problem_takes_one_newton_step(seed in any::<u64>(), amplitude in 0.1f64..2.0) {
        let model = rd(9, 0.0);
        let m = prior_draw(9, amplitude, seed);
        let sol = model.solve_state(&m).unwrap();
        prop_assert!(sol.iterations <= 1, "{} iterations", sol.iterations);
    }

    #[test]
    fn maximum_principle_without_source(seed in any::<u64>(), amplitude in 0.1f64..3.0) {
        let grid = Grid::new(9).unwrap();
        let obs = LAYOUT.nodes(&grid).unwrap();
        let model = RdModel::from_parts(grid, 0.0, vec![0.0; grid.len()], obs, NewtonConfig::default()).unwrap();
        let u = model.solve_state(&prior_draw(9, amplitude, seed)).unwrap().u;
        for x in u {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x), "{}", x);
        }
    }

    #[test]
    fn toy_jacobian_matches_finite_differences(d_m in 1usize..8, d_q in 1usize..6, p in 1usize..5, seed in any::<u64>()) {
        let map = ToyMap::new(&ToyConfig { d_m, d_q, p, seed }).unwrap();
        let m = common::vector(d_m, seed ^ 3);
        let v = common::vector(d_m, seed ^ 4);
        let jv = map.jacobian(&m).matvec(&v);
        let eps = 1e-6;
        let f = |s: f64| map.forward(&m.iter().zip(&v).map(|(a, b)| a + s * eps * b).collect::<Vec<_>>());
        let (a, b) = (f(1.0), f(-1.0));
        for ((x, y), j) in a.iter().zip(&b).zip(&jv) {
            prop_assert!(((x - y) / (2.0 * eps) - j).abs() <= 1e-7 * norm2(&jv).max(1.0));
        }
    }
}

#[test]
fn nonlinear_solve_converges_on_the_default_grid() {
    let model = RdModel::new(&RdConfig { source: SourceConfig::default(), ..Default::default() }).unwrap();
    for seed in 0..3 {
        let sol = model.solve_state(&prior_draw(17, 1.0, seed)).unwrap();
        assert!(sol.iterations >= 1 && sol.iterations < 20);
        assert_eq!(model.observe(&sol.u).len(), 25);
    }
}

#[test]
fn prior_covariance_matches_the_inverse_square_operator() {
    let cfg = PriorConfig { delta: 1.0, gamma: 0.1, grid: Grid::new(9).unwrap() };
    let sampler = PriorSampler::new(&cfg).unwrap();
    let d = sampler.dim();

    // A⁻¹ column by column, then A⁻² = A⁻¹ A⁻ᵀ (A is symmetric).
    let mut inv = Matrix::zeros(d, d);
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        inv.set_column(j, &sampler.transform(&e));
    }
    let exact = inv.matmul_tr(&inv);

    let n = 10_000;
    let mut r = rng::stream(2024);
    let mut emp = Matrix::zeros(d, d);
    for _ in 0..n {
        let m = sampler.sample(&mut r);
        for i in 0..d {
            let row = emp.row_mut(i);
            for (j, x) in row.iter_mut().enumerate() {
                *x += m[i] * m[j];
            }
        }
    }
    let emp = emp.scaled(1.0 / n as f64);
    let rel = emp.sub(&exact).frobenius() / exact.frobenius();
    assert!(rel < 0.1, "relative covariance error {rel}");
    for i in 0..d {
        assert!(common::rel(emp[(i, i)], exact[(i, i)]) < 0.1, "variance at node {i}");
    }
}
