use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{dot, fix_sign, Matrix};
use super::operator::LinearOperator;
use super::qr::orthonormalize;
use crate::{math, rng, Error, Result};

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 1;

const MAX_SWEEPS: usize = 80;

/// Rank-`r` factorization `U diag(sigma) Vᵀ` of a Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedJacobian {
    /// `nrows × r`, orthonormal columns.
    pub u: Matrix,
    /// Length `r`, non-negative, descending.
    pub sigma: Vec<f64>,
    /// `ncols × r`, orthonormal columns.
    pub v: Matrix,
}

impl TruncatedJacobian {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn nrows(&self) -> usize {
        self.u.rows()
    }

    pub fn ncols(&self) -> usize {
        self.v.rows()
    }

    /// Dense `U diag(σ) Vᵀ`.
    pub fn to_dense(&self) -> Matrix {
        self.u.scale_columns(&self.sigma).matmul_tr(&self.v)
    }

    /// `Σ σ_i²`, the squared Frobenius norm of the factorization.
    pub fn frobenius_sq(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum()
    }

    /// Checks shapes, orthonormality (to `tol`) and ordering of the singular values.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let r = self.sigma.len();
        if self.u.cols() != r || self.v.cols() != r {
            return Err(Error::invalid(format!(
                "factor shapes {:?} / {} / {:?} are inconsistent",
                self.u.shape(),
                r,
                self.v.shape()
            )));
        }
        if self.sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("singular values must be finite and non-negative"));
        }
        if self.sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("singular values are not sorted in descending order"));
        }
        if self.u.orthonormality_defect() > tol || self.v.orthonormality_defect() > tol {
            return Err(Error::invalid("singular vectors are not orthonormal"));
        }
        Ok(())
    }
}

impl LinearOperator for TruncatedJacobian {
    fn nrows(&self) -> usize {
        self.u.rows()
    }
    fn ncols(&self) -> usize {
        self.v.rows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut c = self.v.tr_matvec(x);
        c.iter_mut().zip(&self.sigma).for_each(|(ci, s)| *ci *= s);
        self.u.matvec(&c)
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut c = self.u.tr_matvec(y);
        c.iter_mut().zip(&self.sigma).for_each(|(ci, s)| *ci *= s);
        self.v.matvec(&c)
    }
}

/// Thin SVD of a dense matrix by one-sided (Hestenes) Jacobi rotations.
///
/// Returns `(U, σ, V)` with `k = min(m, n)` columns, σ descending and each
/// pair sign-fixed so the largest-magnitude entry of `u_i` is positive.
pub fn dense_svd(a: &Matrix) -> TruncatedJacobian {
    if a.rows() < a.cols() {
        let t = dense_svd(&a.transpose());
        let mut out = TruncatedJacobian { u: t.v, sigma: t.sigma, v: t.u };
        fix_pair_signs(&mut out);
        return out;
    }
    let (m, n) = a.shape();
    // Columns of A stored as rows.
    let mut cols = a.transpose();
    let mut vrows = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(cols.row(p), cols.row(p));
                let beta = dot(cols.row(q), cols.row(q));
                let gamma = dot(cols.row(p), cols.row(q));
                if gamma == 0.0 || gamma.abs() <= 1e-15 * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let sgn = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sgn / (zeta.abs() + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_row_pair(&mut cols, p, q, c, s);
                rotate_row_pair(&mut vrows, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| math::sqrt(dot(cols.row(j), cols.row(j)))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let smax = norms[order[0]];
    let tiny = if smax > 0.0 { 1e-14 * smax } else { 0.0 };

    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut v = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        v.set_column(dst, vrows.row(src));
        if s > tiny && s > 0.0 {
            u_cols.push(Some(cols.row(src).iter().map(|x| x / s).collect()));
        } else {
            u_cols.push(None);
        }
    }
    let u_cols = complete_orthonormal(m, u_cols);
    let mut out = TruncatedJacobian { u: Matrix::from_columns(m, &u_cols), sigma, v };
    fix_pair_signs(&mut out);
    out
}

/// Replaces missing columns with unit vectors orthogonal to all others.
fn complete_orthonormal(m: usize, cols: Vec<Option<Vec<f64>>>) -> Vec<Vec<f64>> {
    let mut done: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
    let mut out = Vec::with_capacity(cols.len());
    let mut next_axis = 0;
    for c in cols {
        match c {
            Some(c) => out.push(c),
            None => loop {
                assert!(next_axis < m, "cannot complete an orthonormal basis");
                let mut e = vec![0.0; m];
                e[next_axis] = 1.0;
                next_axis += 1;
                for _ in 0..2 {
                    for d in &done {
                        let p = dot(d, &e);
                        e.iter_mut().zip(d).for_each(|(x, y)| *x -= p * y);
                    }
                }
                let nrm = math::sqrt(dot(&e, &e));
                if nrm > 0.5 {
                    e.iter_mut().for_each(|x| *x /= nrm);
                    done.push(e.clone());
                    out.push(e);
                    break;
                }
            },
        }
    }
    out
}

fn fix_pair_signs(t: &mut TruncatedJacobian) {
    for j in 0..t.sigma.len() {
        let mut uj = t.u.column(j);
        if fix_sign(&mut uj) {
            t.u.set_column(j, &uj);
            let vj: Vec<f64> = t.v.column(j).iter().map(|x| -x).collect();
            t.v.set_column(j, &vj);
        }
    }
}

fn rotate_row_pair(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Randomized SVD of a matrix-free operator (Gaussian range finder with
/// power iterations, then an exact SVD of the small projected matrix).
///
/// The sketch width is `rank + oversample`, clipped to `min(nrows, ncols)`.
/// The operator is applied `l` times forward and `l` times transposed, plus
/// `2l` per power iteration, where `l` is the clipped width.
pub fn randomized_svd(
    op: &dyn LinearOperator,
    rank: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<TruncatedJacobian> {
    let (m, n) = (op.nrows(), op.ncols());
    let min_dim = m.min(n);
    if rank == 0 || rank > min_dim {
        return Err(Error::invalid(format!(
            "rank {rank} is not in 1..={min_dim} for a {m}x{n} operator"
        )));
    }
    let l = sketch_width(m, n, rank, oversample);
    let mut r = rng::stream(seed);
    let omega: Vec<Vec<f64>> = (0..l).map(|_| rng::normal_vec(&mut r, n)).collect();

    let apply_all = |vs: &[Vec<f64>]| -> Matrix {
        Matrix::from_columns(m, &vs.iter().map(|v| op.apply(v)).collect::<Vec<_>>())
    };
    let apply_t_all = |q: &Matrix| -> Matrix {
        let cols: Vec<Vec<f64>> = (0..q.cols()).map(|j| op.apply_transpose(&q.column(j))).collect();
        Matrix::from_columns(n, &cols)
    };
    let columns = |q: &Matrix| -> Vec<Vec<f64>> { (0..q.cols()).map(|j| q.column(j)).collect() };

    let mut q = orthonormalize(&apply_all(&omega));
    for _ in 0..power_iters {
        let z = orthonormalize(&apply_t_all(&q));
        q = orthonormalize(&apply_all(&columns(&z)));
    }
    // Bᵀ = Aᵀ Q, so B = Qᵀ A = Ũ Σ Ṽᵀ with (Ṽ, Σ, Ũ) the SVD of Bᵀ.
    let bt = apply_t_all(&q);
    let small = dense_svd(&bt);
    let u_small = small.v.leading_columns(rank);
    let mut out = TruncatedJacobian {
        u: q.matmul(&u_small),
        sigma: small.sigma[..rank].to_vec(),
        v: small.u.leading_columns(rank),
    };
    fix_pair_signs(&mut out);
    Ok(out)
}

/// Number of sketch vectors used by [`randomized_svd`].
pub fn sketch_width(nrows: usize, ncols: usize, rank: usize, oversample: usize) -> usize {
    (rank + oversample).min(nrows.min(ncols))
}

/// Operator applications (forward plus transpose) made by [`randomized_svd`].
pub fn randomized_svd_applications(nrows: usize, ncols: usize, rank: usize, oversample: usize, power_iters: usize) -> usize {
    sketch_width(nrows, ncols, rank, oversample) * (2 * power_iters + 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operator::assemble_by_columns;

    fn random_low_rank(m: usize, n: usize, k: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed);
        let a = Matrix::from_vec(m, k, rng::normal_vec(&mut r, m * k));
        let b = Matrix::from_vec(k, n, rng::normal_vec(&mut r, k * n));
        a.matmul(&b)
    }

    #[test]
    fn dense_svd_reconstructs() {
        for &(m, n) in &[(7, 4), (4, 7), (5, 5)] {
            let a = Matrix::from_vec(m, n, rng::normal_vec(&mut rng::stream(m as u64 * 31 + n as u64), m * n));
            let s = dense_svd(&a);
            s.validate(1e-12).unwrap();
            assert!(s.to_dense().sub(&a).frobenius() < 1e-12 * a.frobenius());
        }
    }

    #[test]
    fn dense_svd_of_rank_deficient_matrix_has_orthonormal_factors() {
        let a = random_low_rank(9, 6, 2, 3);
        let s = dense_svd(&a);
        s.validate(1e-12).unwrap();
        assert!(s.sigma[2] < 1e-12 * s.sigma[0]);
        assert!(s.to_dense().sub(&a).frobenius() < 1e-12 * a.frobenius());
    }

    #[test]
    fn diagonal_operator() {
        let a = Matrix::diag(&[3.0, 2.0, 0.0, 0.0]);
        let s = randomized_svd(&a, 2, 2, 1, 11).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-14 && (s.sigma[1] - 2.0).abs() < 1e-14);
        let u0 = s.u.column(0);
        let v1 = s.v.column(1);
        assert!((u0[0] - 1.0).abs() < 1e-14 && (v1[1] - 1.0).abs() < 1e-14);
        assert!(u0[1..].iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn zero_operator() {
        let s = randomized_svd(&Matrix::zeros(10, 10), 3, 10, 1, 5).unwrap();
        assert_eq!(s.sigma, [0.0, 0.0, 0.0]);
        s.validate(1e-12).unwrap();
    }

    #[test]
    fn exact_rank_recovery_matches_dense_oracle() {
        let a = random_low_rank(200, 300, 5, 42);
        let oracle = dense_svd(&a);
        let s = randomized_svd(&a, 5, 10, 1, 9).unwrap();
        s.validate(1e-10).unwrap();
        let err = s.to_dense().sub(&a).frobenius() / a.frobenius();
        assert!(err <= 1e-9, "relative error {err}");
        for (x, y) in s.sigma.iter().zip(&oracle.sigma) {
            assert!((x - y).abs() <= 1e-9 * oracle.sigma[0]);
        }
    }

    #[test]
    fn rank_validation() {
        let a = Matrix::zeros(4, 6);
        assert!(randomized_svd(&a, 0, 2, 1, 0).is_err());
        assert!(randomized_svd(&a, 5, 0, 1, 0).is_err());
        assert!(randomized_svd(&a, 4, 10, 0, 0).is_ok());
    }

    #[test]
    fn power_iterations_do_not_hurt() {
        // Slowly decaying spectrum where the sketch alone is inaccurate.
        let m = 60;
        let n = 80;
        let mut r = rng::stream(77);
        let left = orthonormalize(&Matrix::from_vec(m, m, rng::normal_vec(&mut r, m * m)));
        let right = orthonormalize(&Matrix::from_vec(n, m, rng::normal_vec(&mut r, n * m)));
        let sig: Vec<f64> = (0..m).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let a = left.scale_columns(&sig).matmul_tr(&right);
        let err = |p| randomized_svd(&a, 8, 4, p, 123).unwrap().to_dense().sub(&a).frobenius();
        assert!(err(2) <= err(0));
        let dense = assemble_by_columns(&a);
        assert_eq!(dense, a);
    }
}
