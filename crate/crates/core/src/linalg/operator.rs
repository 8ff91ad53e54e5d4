use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{dot, Matrix};
use crate::rng;

/// Matrix-free access to an `nrows × ncols` linear map and its transpose.
///
/// Implementations must be adjoint-consistent:
/// `⟨apply(v), w⟩ = ⟨v, apply_transpose(w)⟩`.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, w: &[f64]) -> Vec<f64>;
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matvec(v)
    }
    fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        self.tr_matvec(w)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (**self).apply(v)
    }
    fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        (**self).apply_transpose(w)
    }
}

/// Dense matrix assembled column by column through `apply`.
pub fn assemble_by_columns(op: &dyn LinearOperator) -> Matrix {
    let mut out = Matrix::zeros(op.nrows(), op.ncols());
    let mut e = vec![0.0; op.ncols()];
    for j in 0..op.ncols() {
        e[j] = 1.0;
        out.set_column(j, &op.apply(&e));
        e[j] = 0.0;
    }
    out
}

/// Dense matrix assembled row by row through `apply_transpose`.
pub fn assemble_by_rows(op: &dyn LinearOperator) -> Matrix {
    let mut out = Matrix::zeros(op.nrows(), op.ncols());
    let mut e = vec![0.0; op.nrows()];
    for i in 0..op.nrows() {
        e[i] = 1.0;
        out.row_mut(i).copy_from_slice(&op.apply_transpose(&e));
        e[i] = 0.0;
    }
    out
}

/// Largest relative adjoint defect
/// `|⟨Av, w⟩ − ⟨v, Aᵀw⟩| / (‖Av‖‖w‖ + ‖v‖‖Aᵀw‖)` over random Gaussian pairs.
pub fn adjoint_defect(op: &dyn LinearOperator, trials: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let v = rng::normal_vec(&mut r, op.ncols());
        let w = rng::normal_vec(&mut r, op.nrows());
        let av = op.apply(&v);
        let atw = op.apply_transpose(&w);
        let lhs = dot(&av, &w);
        let rhs = dot(&v, &atw);
        let scale = super::norm2(&av) * super::norm2(&w) + super::norm2(&v) * super::norm2(&atw);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    worst
}
