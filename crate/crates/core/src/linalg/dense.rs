use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Dense real matrix stored column-major.
///
/// Used for the tall-skinny blocks of the reduction (right-hand sides, moment
/// blocks, basis blocks, residual blocks) and for the small projected matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseBlock {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = 1.0;
        }
        out
    }

    /// Builds a block from column-major values.
    pub fn from_col_major(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::dims(
                (n_rows, n_cols),
                (values.len(), 1),
                "column-major buffer length",
            ));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    /// Builds a block from row slices; convenient in tests and for tiny literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut out = Self::zeros(n_rows, n_cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_cols, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            n_rows: values.len(),
            n_cols: 1,
            values: values.to_vec(),
        }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for c in columns {
            if c.len() != n_rows {
                return Err(Error::dims((n_rows, 1), (c.len(), 1), "column lengths"));
            }
            values.extend_from_slice(c);
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    /// Concatenates blocks with equal row counts side by side.
    pub fn hstack(blocks: &[&DenseBlock]) -> Result<Self> {
        let n_rows = blocks.first().map_or(0, |b| b.n_rows);
        let mut values = Vec::new();
        let mut n_cols = 0;
        for b in blocks {
            if b.n_rows != n_rows {
                return Err(Error::dims(
                    (n_rows, 0),
                    (b.n_rows, b.n_cols),
                    "hstack row counts",
                ));
            }
            values.extend_from_slice(&b.values);
            n_cols += b.n_cols;
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_rows..(j + 1) * self.n_rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_cols).map(move |j| self.col(j))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n_cols, self.n_rows);
        for j in 0..self.n_cols {
            for i in 0..self.n_rows {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &DenseBlock) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dims(self.shape(), other.shape(), "axpy"));
        }
        axpy(factor, &other.values, &mut self.values);
        Ok(())
    }

    pub fn sub(&self, other: &DenseBlock) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseBlock) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::dims(self.shape(), other.shape(), "matmul"));
        }
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        for j in 0..other.n_cols {
            let dst = &mut out.values[j * self.n_rows..(j + 1) * self.n_rows];
            for k in 0..self.n_cols {
                let b = other[(k, j)];
                if b != 0.0 {
                    axpy(b, self.col(k), dst);
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other` without forming the transpose.
    pub fn tr_matmul(&self, other: &DenseBlock) -> Result<Self> {
        if self.n_rows != other.n_rows {
            return Err(Error::dims(self.shape(), other.shape(), "transpose matmul"));
        }
        let mut out = Self::zeros(self.n_cols, other.n_cols);
        for j in 0..other.n_cols {
            for i in 0..self.n_cols {
                out[(i, j)] = dot(self.col(i), other.col(j));
            }
        }
        Ok(out)
    }

    pub fn columns_range(&self, start: usize, end: usize) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: end - start,
            values: self.values[start * self.n_rows..end * self.n_rows].to_vec(),
        }
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.n_rows)
            .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= rel_tol * scale))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n_rows, self.n_cols, &self.values)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self {
            n_rows: m.nrows(),
            n_cols: m.ncols(),
            values: m.as_slice().to_vec(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseBlock {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        &self.values[j * self.n_rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseBlock {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        &mut self.values[j * self.n_rows + i]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Euclidean norm with scaling against overflow and underflow.
pub fn norm2(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ssq: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * ssq.sqrt()
}

/// Trace inner product `trace(aᵀ b) = Σ a_ij b_ij`.
pub fn trace_inner(a: &DenseBlock, b: &DenseBlock) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dims(a.shape(), b.shape(), "trace inner product"));
    }
    Ok(dot(a.values(), b.values()))
}
