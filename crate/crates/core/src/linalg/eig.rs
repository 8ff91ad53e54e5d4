use alloc::vec::Vec;

use super::matrix::{fix_sign, Matrix};
use crate::math;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching eigenvector columns;
/// each eigenvector is sign-fixed so its largest-magnitude entry is positive.
pub fn symmetric_eig(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_symmetric(s)?;
    let n = s.rows();
    let mut a = s.clone();
    // Exact symmetrization so rotations see identical off-diagonal pairs.
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_sq();
    let tol = 1e-30 * scale;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= tol || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (theta.abs() + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let sn = t * c;
                rotate_columns(&mut a, p, q, c, sn);
                rotate_rows(&mut a, p, q, c, sn);
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                rotate_columns(&mut v, p, q, c, sn);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Leading `k` eigenpairs of a symmetric matrix (see [`symmetric_eig`]).
pub fn symmetric_eig_topk(s: &Matrix, k: usize) -> Result<(Vec<f64>, Matrix)> {
    if k > s.rows() {
        return Err(Error::invalid(alloc::format!(
            "requested {k} eigenpairs of a {}x{} matrix",
            s.rows(),
            s.cols()
        )));
    }
    let (mut vals, vecs) = symmetric_eig(s)?;
    vals.truncate(k);
    Ok((vals, vecs.leading_columns(k)))
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if s.rows() != s.cols() {
        return Err(Error::invalid(alloc::format!("matrix is {}x{}, not square", s.rows(), s.cols())));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("symmetric eigensolver input".into()));
    }
    let n = s.rows();
    let mut asym = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = s[(i, j)] - s[(j, i)];
            asym += 2.0 * d * d;
        }
    }
    if math::sqrt(asym) > 1e-10 * s.frobenius() {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    Ok(())
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.rows() {
        let mp = m[(k, p)];
        let mq = m[(k, q)];
        m[(k, p)] = c * mp - s * mq;
        m[(k, q)] = s * mp + c * mq;
    }
}

fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..m.cols() {
        let mp = m[(p, k)];
        let mq = m[(q, k)];
        m[(p, k)] = c * mp - s * mq;
        m[(q, k)] = s * mp + c * mq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn diagonal_matrix() {
        let s = Matrix::diag(&[1.0, 5.0, 3.0]);
        let (vals, vecs) = symmetric_eig_topk(&s, 2).unwrap();
        assert_eq!(vals, [5.0, 3.0]);
        assert_eq!(vecs.column(0), [0.0, 1.0, 0.0]);
        assert_eq!(vecs.column(1), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn rank_one() {
        let v = [0.6, -0.8, 0.0];
        let s = Matrix::from_fn(3, 3, |i, j| v[i] * v[j]);
        let (vals, vecs) = symmetric_eig_topk(&s, 1).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        // sign fixed: largest-magnitude entry (-0.8) made positive
        let w = vecs.column(0);
        assert!((w[0] + 0.6).abs() < 1e-14 && (w[1] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn random_spd_reconstruction() {
        let mut r = rng::stream(7);
        let g = Matrix::from_vec(8, 8, rng::normal_vec(&mut r, 64));
        let s = g.tr_matmul(&g).add(&Matrix::identity(8));
        let (vals, w) = symmetric_eig_topk(&s, 8).unwrap();
        let rebuilt = w.scale_columns(&vals).matmul_tr(&w);
        assert!(rebuilt.sub(&s).frobenius() <= 1e-8 * s.frobenius());
        assert!(vals.windows(2).all(|p| p[0] >= p[1]));
        assert!(w.orthonormality_defect() < 1e-12);
        for i in 0..8 {
            let col = w.column(i);
            let sv = s.matvec(&col);
            for (a, b) in sv.iter().zip(&col) {
                assert!((a - vals[i] * b).abs() <= 1e-8 * vals[0]);
            }
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let s = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(symmetric_eig(&s), Err(Error::InvalidArgument(_))));
        assert!(symmetric_eig_topk(&Matrix::identity(2), 3).is_err());
    }
}
