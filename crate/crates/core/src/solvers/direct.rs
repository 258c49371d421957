use super::{ShiftedOperator, SolveRecord};
use crate::error::{Error, Result};
use crate::linalg::{factor_spd, norm2, DenseBlock, SparseLdl};
use std::time::Instant;

/// A factored shifted operator, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct DirectSolver {
    op: ShiftedOperator,
    ldl: SparseLdl<f64>,
}

impl DirectSolver {
    pub fn new(op: &ShiftedOperator) -> Result<Self> {
        Ok(Self {
            op: op.clone(),
            ldl: factor_spd(op.matrix())?,
        })
    }

    pub fn operator(&self) -> &ShiftedOperator {
        &self.op
    }

    /// Solves with one step of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<SolveRecord> {
        let start = Instant::now();
        let n = self.op.dim();
        if b.len() != n {
            return Err(Error::dims((n, n), (b.len(), 1), "right-hand side"));
        }
        let mut x = self.ldl.solve(b);
        let mut r = vec![0.0; n];
        self.residual(b, &x, &mut r);
        let dx = self.ldl.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        self.residual(b, &x, &mut r);
        let bnorm = norm2(b);
        let rel = if bnorm == 0.0 { 0.0 } else { norm2(&r) / bnorm };
        Ok(SolveRecord {
            solution: DenseBlock::column_vector(&x),
            residual: DenseBlock::column_vector(&r),
            iterations: 0,
            converged: true,
            relative_residual_history: vec![rel],
            final_relative_residual: rel,
            floor_limited: false,
            deflation_history: Vec::new(),
            krylov_basis: None,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        self.op.matrix().residual_into(b, x, r);
    }
}

/// One-shot sparse `LDLᵀ` solve of `L(s) x = b`.
pub fn direct_solve(op: &ShiftedOperator, b: &[f64]) -> Result<SolveRecord> {
    DirectSolver::new(op)?.solve(b)
}
