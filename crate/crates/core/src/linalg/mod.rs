//! Dense real linear algebra: SPD factorization, inversion and the rank-B
//! inverse update/downdate used to keep a GP covariance inverse current.
//!
//! All routines are pure functions of their inputs.

mod cholesky;
pub(crate) mod gemm;
mod matrix;
mod update;

pub use cholesky::{spd_factor, spd_factor_into, SpdFactor};
pub use matrix::DenseMatrix;
pub use update::{block_inverse_assemble, downdate_inverse, SUB_BLOCK_CONDITION_LIMIT};

pub(crate) use update::{assemble_with_layout, downdate_gathered, plan_replacement};

use crate::error::Result;
use crate::scalar::Scalar;

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn direct_inverse<T: Scalar>(k: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    spd_factor(k)?.into_inverse()
}

/// Solves `K·X = B` given the factor of `K`.
pub fn spd_solve<T: Scalar>(factor: &SpdFactor<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    factor.solve(b)
}
