use super::ShiftedOperator;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, DenseBlock, DenseCholesky};

/// Relative norm below which a candidate column is treated as dependent on
/// the columns already accepted.
const DEPENDENCE_TOL: f64 = 1e-12;

/// A deflation space `U` for one shifted operator `A`, with `AU` and the
/// Cholesky factor of `G = UᵀAU` cached.
///
/// `U` is kept orthonormal; only its span enters the deflated iteration.
#[derive(Debug, Clone)]
pub struct RecycleSpace {
    u: DenseBlock,
    au: DenseBlock,
    gram: Option<DenseCholesky>,
}

impl RecycleSpace {
    pub fn empty(n: usize) -> Self {
        Self {
            u: DenseBlock::zeros(n, 0),
            au: DenseBlock::zeros(n, 0),
            gram: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.u.n_cols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DenseBlock {
        &self.u
    }

    pub fn applied_basis(&self) -> &DenseBlock {
        &self.au
    }

    /// `Uᵀ v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.u.columns().map(|c| dot(c, v)).collect()
    }

    /// `y = G⁻¹ Uᵀ v`.
    pub(crate) fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        let mut y = self.project(v);
        if let Some(g) = &self.gram {
            g.solve_in_place(&mut y);
        }
        y
    }

    /// `v ← v - U G⁻¹ (AU)ᵀ v`, the A-orthogonal projection of a search
    /// direction away from `span(U)`.
    pub(crate) fn deflate_direction(&self, v: &mut [f64]) {
        if self.is_empty() {
            return;
        }
        let mut y: Vec<f64> = self.au.columns().map(|c| dot(c, v)).collect();
        if let Some(g) = &self.gram {
            g.solve_in_place(&mut y);
        }
        for (c, yi) in self.u.columns().zip(&y) {
            axpy(-yi, c, v);
        }
    }

    /// Galerkin correction on `span(U)`: `x ← x + U y`, `r ← r - AU y` with
    /// `y = G⁻¹Uᵀr`, which leaves `Uᵀr = 0` up to rounding.
    pub(crate) fn correct(&self, x: &mut [f64], r: &mut [f64]) {
        if self.is_empty() {
            return;
        }
        let y = self.coefficients(r);
        for ((u, au), yi) in self.u.columns().zip(self.au.columns()).zip(&y) {
            axpy(*yi, u, x);
            axpy(-yi, au, r);
        }
    }
}

/// Builds `U` from the columns of `blocks` (in order), dropping columns that
/// are numerically dependent on the earlier ones.
pub fn build_recycle_space(op: &ShiftedOperator, blocks: &[&DenseBlock]) -> Result<RecycleSpace> {
    let n = op.dim();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for blk in blocks {
        if blk.n_rows() != n {
            return Err(Error::dims((n, n), blk.shape(), "recycle space columns"));
        }
        for c in blk.columns() {
            let norm0 = norm2(c);
            if !(norm0 > 0.0) || !norm0.is_finite() {
                continue;
            }
            let mut w = c.to_vec();
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for q in &basis {
                    let h = dot(q, &w);
                    axpy(-h, q, &mut w);
                }
            }
            let nw = norm2(&w);
            if nw > DEPENDENCE_TOL * norm0 && basis.len() < n {
                w.iter_mut().for_each(|v| *v /= nw);
                basis.push(w);
            }
        }
    }
    if basis.is_empty() {
        return Ok(RecycleSpace::empty(n));
    }
    let u = DenseBlock::from_columns(&basis)?;
    let au = op.apply_block(&u)?;
    let mut g = u.tr_matmul(&au)?;
    let p = g.n_cols();
    for i in 0..p {
        for j in i + 1..p {
            let s = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    let gram = DenseCholesky::factor(&g)
        .map_err(|e| Error::RecycleRankDeficient(format!("UᵀAU is not positive definite ({e})")))?;
    Ok(RecycleSpace {
        u,
        au,
        gram: Some(gram),
    })
}
