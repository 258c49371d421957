use crate::error::{Error, Result};
use crate::linalg::dense::DenseBlock;

/// Compressed sparse row matrix.
///
/// Invariants: `row_offsets` is non-decreasing, starts at 0 and ends at
/// `values.len()`; column indices inside a row are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-list assembler. Duplicate entries are summed on `build`.
#[derive(Debug, Clone)]
pub struct CooBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, capacity: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.n_rows || col >= self.n_cols {
            return Err(Error::InvalidArgument(format!(
                "entry ({row}, {col}) outside {}x{} matrix",
                self.n_rows, self.n_cols
            )));
        }
        self.entries.push((row, col, value));
        Ok(())
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; self.n_rows + 1];
        let mut col_indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_indices.push(c);
            values.push(v);
            row_offsets[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..self.n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl CsrMatrix {
    /// Builds from raw CSR arrays, validating every structural invariant.
    pub fn try_from_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return Err(Error::InvalidArgument("row_offsets malformed".into()));
        }
        if *row_offsets.last().unwrap() != values.len() || col_indices.len() != values.len() {
            return Err(Error::InvalidArgument(
                "row_offsets does not end at nnz".into(),
            ));
        }
        for i in 0..n_rows {
            let (s, e) = (row_offsets[i], row_offsets[i + 1]);
            if e < s {
                return Err(Error::InvalidArgument("row_offsets decreasing".into()));
            }
            for k in s..e {
                if col_indices[k] >= n_cols || (k > s && col_indices[k] <= col_indices[k - 1]) {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: column indices must be strictly increasing and < {n_cols}"
                    )));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Tridiagonal matrix with constant bands.
    pub fn tridiagonal(n: usize, lower: f64, diag: f64, upper: f64) -> Self {
        let mut coo = CooBuilder::with_capacity(n, n, 3 * n);
        for i in 0..n {
            if i > 0 {
                coo.push(i, i - 1, lower).unwrap();
            }
            coo.push(i, i, diag).unwrap();
            if i + 1 < n {
                coo.push(i, i + 1, upper).unwrap();
            }
        }
        coo.build()
    }

    pub fn from_dense(a: &DenseBlock, drop_tol: f64) -> Self {
        let mut coo = CooBuilder::new(a.n_rows(), a.n_cols());
        for i in 0..a.n_rows() {
            for j in 0..a.n_cols() {
                let v = a[(i, j)];
                if v.abs() > drop_tol {
                    coo.push(i, j, v).unwrap();
                }
            }
        }
        coo.build()
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

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.n_rows)
            .map(|i| self.row_offsets[i + 1] - self.row_offsets[i])
            .max()
            .unwrap_or(0)
    }

    /// `y = A x` for a single vector.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `r = b - A x` with compensated row sums, so `r` is the residual of the
    /// stored `x` to working precision even when it is far below `‖b‖`.
    pub fn residual_into(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(b.len(), self.n_rows);
        for (i, ri) in r.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let (mut s, mut c) = (b[i], 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = -v * x[j];
                let pe = (-v).mul_add(x[j], -p);
                let t = s + p;
                let z = t - s;
                c += (s - (t - z)) + (p - z) + pe;
                s = t;
            }
            *ri = s + c;
        }
    }

    /// `y = |A| |x|`, used for rounding-error floors.
    pub fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| (v * x[c]).abs()).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let dst = next[c];
                col_indices[dst] = i;
                values[dst] = v;
                next[c] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `Σ c_k A_k` over matrices of equal shape, on the union of their patterns.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<Self> {
        let (n_rows, n_cols) = terms
            .first()
            .map(|(_, a)| a.shape())
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        for (_, a) in terms {
            if a.shape() != (n_rows, n_cols) {
                return Err(Error::dims(
                    (n_rows, n_cols),
                    a.shape(),
                    "linear combination",
                ));
            }
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; n_cols];
        let mut mark = vec![false; n_cols];
        let mut pattern: Vec<usize> = Vec::new();
        for i in 0..n_rows {
            pattern.clear();
            for (c, a) in terms {
                let (cols, vals) = a.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    if !mark[j] {
                        mark[j] = true;
                        pattern.push(j);
                    }
                    acc[j] += c * v;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                col_indices.push(j);
                values.push(acc[j]);
                acc[j] = 0.0;
                mark[j] = false;
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Values of `self` laid out on a (super-)pattern given by `pattern`.
    pub fn values_on_pattern(&self, pattern: &CsrMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(pattern.nnz());
        for i in 0..pattern.n_rows {
            let (cols, _) = pattern.row(i);
            for &j in cols {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        (0..self.n_rows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| (v - self.get(j, i)).abs() <= rel_tol * scale)
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::linalg::dense::norm2(&self.values)
    }

    pub fn to_dense(&self) -> DenseBlock {
        let mut out = DenseBlock::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Symmetric adjacency lists (excluding the diagonal) for ordering heuristics.
    pub(crate) fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_rows];
        for i in 0..self.n_rows {
            let (cols, _) = self.row(i);
            for &j in cols {
                if j != i {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

/// Sparse matrix times dense block, column by column.
pub fn spmv(a: &CsrMatrix, x: &DenseBlock) -> Result<DenseBlock> {
    if a.n_cols() != x.n_rows() {
        return Err(Error::dims(a.shape(), x.shape(), "spmv"));
    }
    let mut out = DenseBlock::zeros(a.n_rows(), x.n_cols());
    for j in 0..x.n_cols() {
        a.mul_vec_into(x.col(j), out.col_mut(j));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    #[test]
    fn compensated_residual_sees_cancellation() {
        let a = CsrMatrix::from_dense(&DenseBlock::from_rows(&[&[1.0, 1e-17, -1.0]]), 0.0);
        let mut r = [0.0];
        a.residual_into(&[0.0], &[1.0, 1.0, 1.0], &mut r);
        assert_eq!(r[0], -1e-17);
    }

    use super::*;

    #[test]
    fn identity_spmv() {
        let x = DenseBlock::column_vector(&[1.0, 2.0, 3.0]);
        assert_eq!(spmv(&CsrMatrix::identity(3), &x).unwrap(), x);
    }

    #[test]
    fn zero_pattern_gives_zero() {
        let x = DenseBlock::from_rows(&[&[1.0, -4.0], &[2.5, 7.0]]);
        let y = spmv(&CsrMatrix::zeros(2, 2), &x).unwrap();
        assert_eq!(y, DenseBlock::zeros(2, 2));
    }

    #[test]
    fn tridiagonal_row_sums() {
        // Interior rows of tridiag(-1,2,-1) sum to zero; the two boundary rows to one.
        let a = CsrMatrix::tridiagonal(4, -1.0, 2.0, -1.0);
        let y = spmv(&a, &DenseBlock::column_vector(&[1.0; 4])).unwrap();
        assert_eq!(y.col(0), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn spmv_dimension_error_names_shapes() {
        let err = spmv(&CsrMatrix::identity(3), &DenseBlock::zeros(2, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(3, 3)") && msg.contains("(2, 1)"), "{msg}");
    }

    #[test]
    fn coo_merges_duplicates_and_sorts() {
        let mut coo = CooBuilder::new(2, 3);
        coo.push(1, 2, 1.0).unwrap();
        coo.push(0, 1, 2.0).unwrap();
        coo.push(1, 0, 3.0).unwrap();
        coo.push(0, 1, 0.5).unwrap();
        let a = coo.build();
        assert_eq!(a.row_offsets(), &[0, 1, 3]);
        assert_eq!(a.col_indices(), &[1, 0, 2]);
        assert_eq!(a.values(), &[2.5, 3.0, 1.0]);
        assert!(CooBuilder::new(2, 2).push(2, 0, 1.0).is_err());
    }

    #[test]
    fn from_parts_rejects_unsorted_columns() {
        assert!(CsrMatrix::try_from_parts(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_from_parts(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_from_parts(1, 3, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn linear_combination_unions_patterns() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0]);
        let b = CsrMatrix::tridiagonal(2, 1.0, 0.0, 1.0);
        let c = CsrMatrix::linear_combination(&[(2.0, &a), (3.0, &b)]).unwrap();
        assert_eq!(
            c.to_dense(),
            DenseBlock::from_rows(&[&[2.0, 3.0], &[3.0, 4.0]])
        );
        let t = CsrMatrix::tridiagonal(3, -1.0, 2.0, 5.0).transpose();
        assert_eq!(t.get(0, 1), -1.0);
        assert_eq!(t.get(1, 0), 5.0);
    }
}
