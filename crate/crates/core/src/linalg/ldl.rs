//! Sparse symmetric `LDLᵀ` factorization (up-looking, elimination-tree based)
//! with a reverse Cuthill–McKee fill-reducing permutation.
//!
//! The same code serves the real SPD shifted operators and the complex
//! symmetric (not Hermitian) matrices `K - ω²M + iωD` evaluated on the
//! imaginary axis.

use crate::error::{Error, Result};
use crate::linalg::sparse::CsrMatrix;
use num_complex::Complex64;
use std::collections::VecDeque;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Field scalar usable by the factorization.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + std::fmt::Debug
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    /// Whether a pivot is acceptable. Real SPD factorizations require `d > 0`.
    fn pivot_ok(self, scale: f64) -> bool;
    fn real_part(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn pivot_ok(self, scale: f64) -> bool {
        self > 1e-14 * scale && self.is_finite()
    }
    fn real_part(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn pivot_ok(self, scale: f64) -> bool {
        self.norm() > 1e-14 * scale && self.re.is_finite() && self.im.is_finite()
    }
    fn real_part(self) -> f64 {
        self.re
    }
}

/// Reverse Cuthill–McKee ordering. `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let adj = a.adjacency();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(start, &adj, &degree);
        let mut queue = VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(start: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = start;
    let mut ecc = 0usize;
    for _ in 0..8 {
        let levels = bfs_levels(root, adj);
        let max_level = levels.iter().filter_map(|&l| l).max().unwrap_or(0);
        if max_level <= ecc && ecc > 0 {
            break;
        }
        ecc = max_level;
        let candidate = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(max_level))
            .min_by_key(|(i, _)| (degree[*i], *i))
            .map(|(i, _)| i)
            .unwrap_or(root);
        if candidate == root {
            break;
        }
        root = candidate;
    }
    root
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut levels = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    levels[root] = Some(0);
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        let lv = levels[v].unwrap();
        for &u in &adj[v] {
            if levels[u].is_none() {
                levels[u] = Some(lv + 1);
                queue.push_back(u);
            }
        }
    }
    levels
}

/// Symbolic analysis shared by every numeric factorization on one pattern.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    parent: Vec<usize>,
    col_ptr: Vec<usize>,
    /// Permuted upper-triangular pattern, by column: `(row, source index into values)`.
    upper: Vec<Vec<(usize, usize)>>,
}

const NONE: usize = usize::MAX;

impl LdlSymbolic {
    /// Analyzes the symmetric pattern of `a` (both triangles stored).
    pub fn analyze(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        if a.n_cols() != n {
            return Err(Error::dims(a.shape(), (n, n), "LDL needs a square matrix"));
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        // Column k of the permuted upper triangle = permuted row k, entries with column <= k.
        let mut upper: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (old_i, &new_i) in inv_perm.iter().enumerate() {
            let s = a.row_offsets()[old_i];
            for (off, &old_j) in a.row(old_i).0.iter().enumerate() {
                let new_j = inv_perm[old_j];
                if new_j <= new_i {
                    upper[new_i].push((new_j, s + off));
                }
            }
        }
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(i0, _) in &upper[k] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = vec![0; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + lnz[k];
        }
        Ok(Self {
            n,
            perm,
            inv_perm,
            parent,
            col_ptr,
            upper,
        })
    }

    pub fn fill_nnz(&self) -> usize {
        self.col_ptr[self.n]
    }

    /// Numeric factorization with values laid out exactly like `pattern.values()`.
    pub fn factor<T: Scalar>(&self, values: &[T]) -> Result<SparseLdl<T>> {
        let n = self.n;
        let nnz = self.fill_nnz();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![T::zero(); nnz];
        let mut d = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
        for k in 0..n {
            y[k] = T::zero();
            let mut top = n;
            flag[k] = k;
            lnz[k] = 0;
            for &(i0, src) in &self.upper[k] {
                y[i0] = y[i0] + values[src];
                let mut i = i0;
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = self.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = T::zero();
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = T::zero();
                let p2 = self.col_ptr[i] + lnz[i];
                for p in self.col_ptr[i]..p2 {
                    y[li[p]] = y[li[p]] - lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] = d[k] - l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if !d[k].pivot_ok(scale) {
                return Err(Error::NotSpd {
                    pivot: self.perm[k],
                    value: d[k].real_part(),
                });
            }
        }
        Ok(SparseLdl {
            n,
            perm: self.perm.clone(),
            inv_perm: self.inv_perm.clone(),
            col_ptr: self.col_ptr.clone(),
            li,
            lx,
            d,
        })
    }
}

/// Numeric `P A Pᵀ = L D Lᵀ` factors.
#[derive(Debug, Clone)]
pub struct SparseLdl<T: Scalar> {
    n: usize,
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    col_ptr: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> SparseLdl<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        debug_assert_eq!(b.len(), self.n);
        let mut x: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                x[self.li[p]] = x[self.li[p]] - self.lx[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] = x[j] / self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s = s - self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        for (old, bi) in b.iter_mut().enumerate() {
            *bi = x[self.inv_perm[old]];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Real SPD sparse Cholesky-equivalent factorization of `a`.
pub fn factor_spd(a: &CsrMatrix) -> Result<SparseLdl<f64>> {
    LdlSymbolic::analyze(a)?.factor(a.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::CooBuilder;

    #[test]
    fn rcm_is_permutation() {
        let a = CsrMatrix::tridiagonal(7, -1.0, 2.0, -1.0);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn solves_spd_arrow_matrix() {
        // Arrow pattern: fill-in without reordering, none with RCM-like orderings.
        let n = 6;
        let mut coo = CooBuilder::new(n, n);
        for i in 0..n {
            coo.push(i, i, 10.0 + i as f64).unwrap();
            if i > 0 {
                coo.push(0, i, 1.0).unwrap();
                coo.push(i, 0, 1.0).unwrap();
            }
        }
        let a = coo.build();
        let f = factor_spd(&a).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let b = a.mul_vec(&x_true);
        let x = f.solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_detected() {
        let a = CsrMatrix::tridiagonal(3, 2.0, 1.0, 2.0);
        assert!(matches!(factor_spd(&a), Err(Error::NotSpd { .. })));
    }

    #[test]
    fn complex_symmetric_solve() {
        let a = CsrMatrix::tridiagonal(5, -1.0, 2.0, -1.0);
        let sym = LdlSymbolic::analyze(&a).unwrap();
        let vals: Vec<Complex64> = a
            .values()
            .iter()
            .map(|&v| Complex64::new(v, if v > 0.0 { 0.3 } else { 0.0 }))
            .collect();
        let f = sym.factor(&vals).unwrap();
        let x_true: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut b = vec![Complex64::new(0.0, 0.0); 5];
        for i in 0..5 {
            let (cols, _) = a.row(i);
            let s = a.row_offsets()[i];
            for (off, &j) in cols.iter().enumerate() {
                b[i] += vals[s + off] * x_true[j];
            }
        }
        let x = f.solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).norm() < 1e-13);
        }
    }
}
