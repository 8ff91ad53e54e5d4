use alloc::format;

use crate::linalg::{Matrix, TruncatedJacobian};
use crate::{Error, Result};

/// Terms of the decomposition of `‖∇q − ∇f‖_F²` along the stored singular
/// subspaces `U_r`, `V_r` and their complements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianErrorTerms {
    /// `‖∇q − ∇f‖_F²`.
    pub lhs: f64,
    /// `‖Σ_r − U_rᵀ∇f V_r‖_F²`.
    pub truncated: f64,
    /// `‖∇q − U_rΣ_rV_rᵀ‖_F²`, i.e. `Σ_{i>r} σ_i²` for an exact truncation.
    pub trailing: f64,
    /// `‖(I − U_rU_rᵀ)∇f(I − V_rV_rᵀ)‖_F²`.
    pub nullspace: f64,
    /// `‖(I − U_rU_rᵀ)∇f V_r‖_F²`.
    pub left_complement: f64,
    /// `‖U_rᵀ∇f(I − V_rV_rᵀ)‖_F²`.
    pub right_complement: f64,
}

impl JacobianErrorTerms {
    pub fn rhs(&self) -> f64 {
        self.truncated + self.trailing + self.nullspace + self.left_complement + self.right_complement
    }
}

/// Evaluates every term densely.
pub fn jacobian_error_terms(grad_q: &Matrix, svd: &TruncatedJacobian, grad_f: &Matrix) -> Result<JacobianErrorTerms> {
    if grad_q.shape() != grad_f.shape() || grad_q.shape() != (svd.nrows(), svd.ncols()) {
        return Err(Error::invalid(format!(
            "shapes differ: ∇q {:?}, ∇f {:?}, factors ({}, {})",
            grad_q.shape(),
            grad_f.shape(),
            svd.nrows(),
            svd.ncols()
        )));
    }
    let (u, v) = (&svd.u, &svd.v);
    let fv = grad_f.matmul(v);
    let utf = u.tr_matmul(grad_f);
    let core = u.tr_matmul(&fv);
    // (I − UUᵀ) A (I − VVᵀ) = A − U(UᵀA) − (AV)Vᵀ + U(UᵀAV)Vᵀ
    let null = grad_f
        .sub(&u.matmul(&utf))
        .sub(&fv.matmul_tr(v))
        .add(&u.matmul(&core).matmul_tr(v));
    Ok(JacobianErrorTerms {
        lhs: grad_q.sub(grad_f).frobenius_sq(),
        truncated: Matrix::diag(&svd.sigma).sub(&core).frobenius_sq(),
        trailing: grad_q.sub(&svd.to_dense()).frobenius_sq(),
        nullspace: null.frobenius_sq(),
        left_complement: fv.sub(&u.matmul(&core)).frobenius_sq(),
        right_complement: utf.sub(&core.matmul_tr(v)).frobenius_sq(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_svd;
    use crate::rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        Matrix::from_vec(rows, cols, rng::normal_vec(&mut rng::stream(seed), rows * cols))
    }

    #[test]
    fn bound_holds_with_equality_for_exact_rank() {
        for s in 0..20 {
            let q = random(8, 3, s).matmul(&random(3, 12, 100 + s));
            let svd = dense_svd(&q);
            let svd = TruncatedJacobian { u: svd.u.leading_columns(3), sigma: svd.sigma[..3].to_vec(), v: svd.v.leading_columns(3) };
            let f = random(8, 12, 200 + s);
            let t = jacobian_error_terms(&q, &svd, &f).unwrap();
            assert!(t.lhs <= t.rhs() * (1.0 + 1e-12));
            assert!((t.lhs - t.rhs()).abs() <= 1e-10 * t.rhs());
            let exact = jacobian_error_terms(&q, &svd, &svd.to_dense()).unwrap();
            assert!(exact.lhs <= 1e-20 && exact.rhs() <= 1e-20, "{exact:?}");
        }
    }
}
