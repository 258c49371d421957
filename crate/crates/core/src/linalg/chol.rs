use crate::error::{Error, Result};
use crate::linalg::dense::DenseBlock;

/// Lower-triangular Cholesky factor of a small dense SPD matrix.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DenseBlock,
}

impl DenseCholesky {
    pub fn factor(a: &DenseBlock) -> Result<Self> {
        let n = a.n_rows();
        if a.n_cols() != n {
            return Err(Error::dims(
                a.shape(),
                (n, n),
                "Cholesky needs a square matrix",
            ));
        }
        let mut l = DenseBlock::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotSpd { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.n_rows()
    }

    pub fn factor_l(&self) -> &DenseBlock {
        &self.l
    }

    /// Solves in place for a single right-hand side.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve(&self, b: &DenseBlock) -> Result<DenseBlock> {
        if b.n_rows() != self.dim() {
            return Err(Error::dims(
                (self.dim(), self.dim()),
                b.shape(),
                "Cholesky solve",
            ));
        }
        let mut x = b.clone();
        for j in 0..x.n_cols() {
            self.solve_in_place(x.col_mut(j));
        }
        Ok(x)
    }
}

/// Solves `a x = b` for a small SPD `a` via dense Cholesky.
pub fn dense_spd_solve(a: &DenseBlock, b: &DenseBlock) -> Result<DenseBlock> {
    DenseCholesky::factor(a)?.solve(b)
}
