//! Linear solvers for the shifted SPD operators `s²M + sD + K`.
//!
//! * [`cg_solve`]: preconditioned conjugate gradients.
//! * [`rcg_solve`]: recycling CG, i.e. CG deflated by a fixed recycle space `U`:
//!   projected initial guess `x₀ = x₋₁ + U(UᵀAU)⁻¹Uᵀr₋₁` and search directions
//!   `p_k = β p_{k-1} + (I - U(UᵀAU)⁻¹(AU)ᵀ) z_k`. All residuals stay orthogonal
//!   to `span(U)`.
//! * [`direct_solve`]: sparse `LDLᵀ` with a fill-reducing ordering.

mod cg;
mod direct;
mod precond;
mod recycle;

pub use cg::{cg_solve, rcg_solve, SolveOptions};
pub use direct::{direct_solve, DirectSolver};
pub use precond::{ichol0, spai, spai_matrix, Preconditioner, PreconditionerKind, SpaiPattern};
pub use recycle::{build_recycle_space, RecycleSpace};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseBlock};

/// `L(s) = s²M + sD + K`, assembled once on the union pattern.
#[derive(Debug, Clone)]
pub struct ShiftedOperator {
    shift: f64,
    matrix: CsrMatrix,
}

impl ShiftedOperator {
    pub fn new(m: &CsrMatrix, d: &CsrMatrix, k: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = k.n_rows();
        for a in [m, d, k] {
            if a.shape() != (n, n) {
                return Err(Error::dims((n, n), a.shape(), "shifted operator blocks"));
            }
        }
        let matrix = CsrMatrix::linear_combination(&[(shift * shift, m), (shift, d), (1.0, k)])?;
        Ok(Self { shift, matrix })
    }

    /// Wraps an already assembled symmetric matrix (shift recorded as 0).
    pub fn from_matrix(matrix: CsrMatrix) -> Self {
        Self { shift: 0.0, matrix }
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    #[inline]
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_vec_into(x, y);
    }

    pub fn apply_block(&self, x: &DenseBlock) -> Result<DenseBlock> {
        crate::linalg::spmv(&self.matrix, x)
    }
}

/// Outcome of one iterative (or direct) solve of a single right-hand side.
#[derive(Debug, Clone)]
pub struct SolveRecord {
    pub solution: DenseBlock,
    /// `b - A x`, recomputed from scratch at exit.
    pub residual: DenseBlock,
    pub iterations: usize,
    pub converged: bool,
    /// Recurrence relative residuals, one per iterate (index 0 = initial guess).
    pub relative_residual_history: Vec<f64>,
    /// True relative residual at exit.
    pub final_relative_residual: f64,
    /// Convergence was declared at the rounding-error floor of the residual
    /// evaluation, which lies above the requested tolerance.
    pub floor_limited: bool,
    /// `‖Uᵀ r_k‖ / ‖r_k‖` per iterate; empty without a recycle space.
    pub deflation_history: Vec<f64>,
    /// Normalized search-space generators, retained when requested.
    pub krylov_basis: Option<Vec<Vec<f64>>>,
    pub seconds: f64,
}

impl SolveRecord {
    pub fn residual_norm(&self) -> f64 {
        self.residual.frobenius_norm()
    }
}
