use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{dot, Matrix};
use crate::math;

/// Thin orthonormal factor `Q` (`m × n`, `m ≥ n`) of a Householder QR of `a`.
///
/// Zero columns get an identity reflector, so the result always has
/// orthonormal columns even for rank-deficient input.
pub fn householder_q(a: &Matrix) -> Matrix {
    let (m, n) = a.shape();
    assert!(m >= n, "householder_q needs a tall matrix");
    // Work on the transpose so each column is a contiguous slice.
    let mut work = a.transpose();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);

    for k in 0..n {
        let col = &work.row(k)[k..];
        let alpha = math::sqrt(dot(col, col));
        if alpha == 0.0 {
            reflectors.push(None);
            continue;
        }
        let mut v: Vec<f64> = col.to_vec();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm = math::sqrt(dot(&v, &v));
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        for j in k..n {
            let c = &mut work.row_mut(j)[k..];
            let s = 2.0 * dot(&v, c);
            for (ci, vi) in c.iter_mut().zip(&v) {
                *ci -= s * vi;
            }
        }
        reflectors.push(Some(v));
    }

    // Q = H_0 H_1 ... H_{n-1} [I_n; 0], accumulated backwards column by column.
    let mut qt = Matrix::zeros(n, m);
    for j in 0..n {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        for k in (0..n).rev() {
            if let Some(v) = &reflectors[k] {
                let tail = &mut e[k..];
                let s = 2.0 * dot(v, tail);
                for (ti, vi) in tail.iter_mut().zip(v) {
                    *ti -= s * vi;
                }
            }
        }
        qt.row_mut(j).copy_from_slice(&e);
    }
    qt.transpose()
}

/// Householder QR applied twice; the second pass cleans up any loss of
/// orthogonality from the first.
pub fn orthonormalize(a: &Matrix) -> Matrix {
    householder_q(&householder_q(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_spans_input_and_is_orthonormal() {
        let a = Matrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5 + (i == j) as u8 as f64);
        let q = orthonormalize(&a);
        assert!(q.orthonormality_defect() < 1e-14);
        // a = Q Qᵀ a
        let proj = q.matmul(&q.tr_matmul(&a));
        assert!(proj.sub(&a).frobenius() < 1e-12 * a.frobenius());
    }

    #[test]
    fn zero_input_gives_orthonormal_q() {
        let q = householder_q(&Matrix::zeros(5, 3));
        assert!(q.orthonormality_defect() < 1e-15);
    }
}
