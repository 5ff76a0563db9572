//! Dense complex linear algebra: matrices, a Hermitian eigensolver and tensor operations.

mod eigen;
mod matrix;
mod tensor;

pub use eigen::{
    eigh, herm_fun, herm_fun_eig, imaginary_power, is_psd, pseudo_inverse, sqrt_psd, support_projection,
    HermitianEigen,
};
pub use matrix::{CMatrix, C64, ONE, ZERO};
pub use tensor::{kron, partial_trace_left, partial_trace_right, swap_factors};
