//! Dense and banded linear algebra, matrix-free operators and randomized SVD.

mod banded;
mod eig;
mod matrix;
mod operator;
mod qr;
mod split;
mod svd;

pub use banded::{BandedLu, BandedMatrix};
pub use eig::{symmetric_eig, symmetric_eig_topk};
pub use matrix::{axpy, dot, fix_sign, norm2, sub_vec, Matrix};
pub use operator::{adjoint_defect, assemble_by_columns, assemble_by_rows, LinearOperator};
pub use qr::{householder_q, orthonormalize};
pub use split::{frobenius_orthogonal_split, Side};
pub use svd::{
    dense_svd, randomized_svd, randomized_svd_applications, sketch_width, TruncatedJacobian,
    DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS,
};
