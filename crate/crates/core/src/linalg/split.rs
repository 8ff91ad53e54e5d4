use super::matrix::Matrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Splits `‖A‖_F²` into the part inside and outside `span(Q)`.
///
/// `Right`: `(‖A Q Qᵀ‖², ‖A (I − Q Qᵀ)‖²)`; `Left`: `(‖Q Qᵀ A‖², ‖(I − Q Qᵀ) A‖²)`.
/// The outside term is evaluated directly rather than by subtraction.
pub fn frobenius_orthogonal_split(a: &Matrix, q: &Matrix, side: Side) -> Result<(f64, f64)> {
    let dim = match side {
        Side::Right => a.cols(),
        Side::Left => a.rows(),
    };
    if q.rows() != dim {
        return Err(Error::invalid(alloc::format!(
            "basis has {} rows, expected {dim}",
            q.rows()
        )));
    }
    if q.orthonormality_defect() > 1e-8 {
        return Err(Error::invalid("basis columns are not orthonormal"));
    }
    match side {
        Side::Right => {
            let aq = a.matmul(q);
            let outside = a.sub(&aq.matmul_tr(q));
            Ok((aq.frobenius_sq(), outside.frobenius_sq()))
        }
        Side::Left => {
            let qa = q.tr_matmul(a);
            let outside = a.sub(&q.matmul(&qa));
            Ok((qa.frobenius_sq(), outside.frobenius_sq()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qr::orthonormalize;
    use crate::rng;

    #[test]
    fn identity_split_by_axis() {
        let q = Matrix::from_rows(&[&[1.0], &[0.0]]);
        assert_eq!(frobenius_orthogonal_split(&Matrix::identity(2), &q, Side::Right).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn complete_basis_leaves_nothing_outside() {
        let mut r = rng::stream(1);
        let a = Matrix::from_vec(3, 4, rng::normal_vec(&mut r, 12));
        let q = orthonormalize(&Matrix::from_vec(4, 4, rng::normal_vec(&mut r, 16)));
        let (inside, outside) = frobenius_orthogonal_split(&a, &q, Side::Right).unwrap();
        assert!((inside - a.frobenius_sq()).abs() < 1e-12 * a.frobenius_sq());
        assert!(outside < 1e-24 * a.frobenius_sq());
    }

    #[test]
    fn pythagorean_identity_both_sides() {
        let mut r = rng::stream(2);
        let a = Matrix::from_vec(6, 4, rng::normal_vec(&mut r, 24));
        // Oracle: dense evaluation of both projections.
        for (side, dim) in [(Side::Right, 4), (Side::Left, 6)] {
            let q = orthonormalize(&Matrix::from_vec(dim, 2, rng::normal_vec(&mut r, dim * 2)));
            let p = q.matmul_tr(&q);
            let comp = Matrix::identity(dim).sub(&p);
            let (want_in, want_out) = match side {
                Side::Right => (a.matmul(&p).frobenius_sq(), a.matmul(&comp).frobenius_sq()),
                Side::Left => (p.matmul(&a).frobenius_sq(), comp.matmul(&a).frobenius_sq()),
            };
            let (inside, outside) = frobenius_orthogonal_split(&a, &q, side).unwrap();
            assert!((inside - want_in).abs() < 1e-12 * a.frobenius_sq());
            assert!((outside - want_out).abs() < 1e-12 * a.frobenius_sq());
            assert!((inside + outside - a.frobenius_sq()).abs() < 1e-12 * a.frobenius_sq());
        }
    }

    #[test]
    fn non_orthonormal_basis_is_rejected() {
        let q = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(frobenius_orthogonal_split(&Matrix::identity(2), &q, Side::Right).is_err());
    }
}
