//! Dense and sparse kernels shared by the solvers, the reduction driver and
//! the diagnostics.

pub mod chol;
pub mod dense;
pub mod eig;
pub mod ldl;
pub mod qr;
pub mod sparse;

pub use chol::{dense_spd_solve, DenseCholesky};
pub use dense::{axpy, dot, norm2, trace_inner, DenseBlock};
pub use eig::{dense_spectral_norm, factored_norms, quadratic_eigenvalues, spectral_norm};
pub use ldl::{factor_spd, LdlSymbolic, Scalar, SparseLdl};
pub use qr::{householder_qr, solve_upper, thin_qr, QrFactors};
pub use sparse::{spmv, CooBuilder, CsrMatrix};
