mod common;

use common::{orthonormal, random, toy};
use dino_core::bases::{active_subspace, derivative_output_basis, pca_basis, ReducedBasisPair};
use dino_core::datagen::{generate_dataset, reduce_dataset, Dataset, DatasetMeta, GenConfig, ProblemConfig};
use dino_core::models::ToyConfig;
use dino_core::{Matrix, TruncatedJacobian};
use proptest::prelude::*;

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let keys = common::vector(n, seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    idx
}

fn projector(q: &Matrix) -> Matrix {
    q.matmul_tr(q)
}

fn from_jacobians(jac: Vec<TruncatedJacobian>) -> Dataset {
    let (d_q, d_m, r, n) = (jac[0].nrows(), jac[0].ncols(), jac[0].rank(), jac.len());
    Dataset {
        meta: DatasetMeta {
            problem: ProblemConfig::Toy(ToyConfig { d_m, d_q, p: r, seed: 0 }),
            d_m,
            d_q,
            rank: r,
            n_samples: n,
            seed: 0,
            oversample: 0,
            power_iters: 0,
        },
        m: Matrix::zeros(n, d_m),
        q: Matrix::zeros(n, d_q),
        jac,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generation_is_deterministic_and_prefix_stable(seed in any::<u64>(), n in 2usize..6) {
        let cfg = ProblemConfig::Toy(ToyConfig { d_m: 9, d_q: 4, p: 3, seed: 5 });
        let gen = GenConfig { n_samples: n, rank: Some(3), seed, ..Default::default() };
        let (a, sa) = generate_dataset(&cfg, &gen).unwrap();
        let (b, sb) = generate_dataset(&cfg, &gen).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(sa, sb);
        let (longer, _) = generate_dataset(&cfg, &GenConfig { n_samples: n + 3, ..gen }).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        prop_assert_eq!(longer.subset(&idx).m, a.m);
        prop_assert_eq!(longer.subset(&idx).jac, a.jac);
    }

    #[test]
    fn stored_factors_are_valid(seed in any::<u64>(), rank in 1usize..5) {
        let ds = toy(10, 5, 4, 4, rank, seed);
        ds.validate().unwrap();
        for j in &ds.jac {
            prop_assert!(j.validate(1e-10).is_ok());
            prop_assert!(j.sigma.iter().all(|s| *s >= 0.0));
            prop_assert!(j.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn bases_are_orthonormal_and_order_independent(seed in any::<u64>(), r_m in 1usize..8, r_q in 1usize..5) {
        let ds = toy(12, 5, 3, 9, 4, seed);
        let perm = permutation(ds.len(), seed ^ 9);
        let shuffled = ds.subset(&perm);
        let psi = active_subspace(&ds, r_m).unwrap();
        let phi = derivative_output_basis(&ds, r_q).unwrap();
        let psi_p = active_subspace(&shuffled, r_m).unwrap();
        let phi_p = derivative_output_basis(&shuffled, r_q).unwrap();
        prop_assert!(psi.vectors.orthonormality_defect() < 1e-10);
        prop_assert!(phi.vectors.orthonormality_defect() < 1e-10);
        for (a, b) in psi.eigenvalues.iter().zip(&psi_p.eigenvalues).chain(phi.eigenvalues.iter().zip(&phi_p.eigenvalues)) {
            prop_assert!((a - b).abs() <= 1e-10 * psi.eigenvalues[0].max(phi.eigenvalues[0]));
        }
        // Compare spans only where the selected eigenvalues are separated from the rest.
        let full_psi = active_subspace(&ds, 12).unwrap().eigenvalues;
        if r_m < 12 && full_psi[r_m - 1] - full_psi[r_m] > 1e-6 * full_psi[0] {
            prop_assert!(projector(&psi.vectors).sub(&projector(&psi_p.vectors)).max_abs() < 1e-8);
        }
        let (pca, _) = pca_basis(&ds.m, r_q.min(ds.len() - 1)).unwrap();
        prop_assert!(pca.vectors.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn shared_right_subspace_is_recovered(seed in any::<u64>(), k in 1usize..4, n in 1usize..6) {
        let (d_q, d_m) = (4, 10);
        let s = orthonormal(d_m, k, seed);
        let jac: Vec<TruncatedJacobian> = (0..n as u64)
            .map(|i| {
                // V = S R for a random k×k rotation R: same span, different vectors.
                let rot = orthonormal(k, k, seed + 10 + i);
                let mut sigma: Vec<f64> = common::vector(k, seed + 20 + i).iter().map(|x| 1.0 + x.abs()).collect();
                sigma.sort_by(|a, b| b.total_cmp(a));
                TruncatedJacobian { u: orthonormal(d_q, k, seed + 30 + i), sigma, v: s.matmul(&rot) }
            })
            .collect();
        let psi = active_subspace(&from_jacobians(jac), k).unwrap();
        // Largest principal-angle sine: ‖(I − SSᵀ)Ψ‖₂ ≤ ‖(I − SSᵀ)Ψ‖_F.
        let outside = psi.vectors.sub(&s.matmul(&s.tr_matmul(&psi.vectors)));
        prop_assert!(outside.frobenius() < 1e-8);
    }

    #[test]
    fn reduced_dataset_matches_dense_projection(seed in any::<u64>()) {
        let ds = toy(8, 4, 3, 3, 4, seed);
        let bases = ReducedBasisPair::new(
            orthonormal(8, 3, seed),
            orthonormal(4, 2, seed + 1),
            common::vector(4, seed + 2),
            dino_core::bases::BasisKind::Custom,
            dino_core::bases::BasisKind::Custom,
        )
        .unwrap();
        let rd = reduce_dataset(&ds, &bases).unwrap();
        for i in 0..ds.len() {
            let dense = bases.phi.tr_matmul(&ds.jac[i].to_dense()).matmul(&bases.psi);
            prop_assert!(dense.sub(&rd.jac_r[i]).max_abs() < 1e-10);
            let centred: Vec<f64> = ds.q.row(i).iter().zip(&bases.b).map(|(q, b)| q - b).collect();
            let q_hat = bases.phi.tr_matvec(&centred);
            for (a, b) in q_hat.iter().zip(rd.q_hat.row(i)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn anisotropic_cloud_leading_direction() {
    let n = 10_000;
    let white = random(n, 2, 77);
    let samples = Matrix::from_fn(n, 2, |i, j| white[(i, j)] * if j == 0 { 3.0 } else { 1.0 });
    let (basis, _) = pca_basis(&samples, 1).unwrap();
    let v = basis.vectors.column(0);
    let angle = v[1].abs().atan2(v[0].abs()).to_degrees();
    assert!(angle < 5.0, "{angle} degrees");
    assert!(v[0] > 0.0);
}
