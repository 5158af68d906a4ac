//! Dense linear algebra over row-major `f64` storage.
//!
//! All routines are pure and deterministic: summation orders are fixed, so
//! identical inputs give bitwise-identical outputs on every platform. Each
//! routine charges its operation count to the active [`crate::flops`] phase.

mod decomp;
mod matrix;
mod ops;

pub use decomp::start_vector;
pub use decomp::{
    cholesky, cholesky_strict, direct_inverse, inverse_shift, is_positive_definite, power_iteration,
    power_iteration_extremes,
};
pub use matrix::{Matrix, Vector};
pub use ops::{
    add, add_identity, add_vec, axpy, axpy_in_place, axpy_vec_in_place, dot, frobenius_norm, hadamard, inf_norm, inner,
    lincomb, matmul, matmul_transpose_b, matvec, mean_columns, outer, scale, scale_vec, sub, symmetrize, transpose,
};
