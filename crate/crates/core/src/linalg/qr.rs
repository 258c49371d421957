//! Thin Householder QR for tall-skinny blocks.
//!
//! The factors are sign-normalized so that `diag(r) >= 0`; an orthonormal input
//! therefore comes back unchanged with `r = I`.

use crate::error::{Error, Result};
use crate::linalg::dense::{dot, norm2, DenseBlock};

/// Relative threshold on `|r_kk| / ‖x‖_f` below which a column counts as dependent.
pub const RANK_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    /// `n × p`, orthonormal columns.
    pub q: DenseBlock,
    /// `p × p`, upper triangular with non-negative diagonal.
    pub r: DenseBlock,
}

/// Householder QR that rejects rank-deficient input.
pub fn householder_qr(x: &DenseBlock) -> Result<QrFactors> {
    let qr = thin_qr(x)?;
    let scale = x.frobenius_norm();
    for k in 0..x.n_cols() {
        if qr.r[(k, k)].abs() <= RANK_TOL * scale {
            return Err(Error::Deflation { column: k });
        }
    }
    Ok(qr)
}

/// Householder QR without rank checks. Dependent columns yield zero diagonal
/// entries in `r` and an arbitrary (still orthonormal) column in `q`.
pub fn thin_qr(x: &DenseBlock) -> Result<QrFactors> {
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::dims(x.shape(), (p, p), "thin QR needs rows >= cols"));
    }
    let mut a = x.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut taus = Vec::with_capacity(p);
    for k in 0..p {
        let col = &a.col(k)[k..];
        let alpha = norm2(col);
        let mut v = col.to_vec();
        if alpha == 0.0 {
            reflectors.push(v);
            taus.push(0.0);
            continue;
        }
        let beta = if v[0] >= 0.0 { -alpha } else { alpha };
        v[0] -= beta;
        let vnorm2 = dot(&v, &v);
        let tau = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
        for j in k..p {
            let cj = &mut a.col_mut(j)[k..];
            let s = tau * dot(&v, cj);
            cj.iter_mut().zip(&v).for_each(|(c, vi)| *c -= s * vi);
        }
        reflectors.push(v);
        taus.push(tau);
    }

    let mut r = DenseBlock::zeros(p, p);
    for j in 0..p {
        for i in 0..=j {
            r[(i, j)] = a[(i, j)];
        }
    }

    // Q = H_0 H_1 ... H_{p-1} applied to the first p unit vectors.
    let mut q = DenseBlock::zeros(n, p);
    for j in 0..p {
        q[(j, j)] = 1.0;
    }
    for k in (0..p).rev() {
        let v = &reflectors[k];
        let tau = taus[k];
        if tau == 0.0 {
            continue;
        }
        for j in 0..p {
            let cj = &mut q.col_mut(j)[k..];
            let s = tau * dot(v, cj);
            cj.iter_mut().zip(v).for_each(|(c, vi)| *c -= s * vi);
        }
    }

    for k in 0..p {
        if r[(k, k)] < 0.0 {
            for j in k..p {
                r[(k, j)] = -r[(k, j)];
            }
            q.col_mut(k).iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(QrFactors { q, r })
}

/// Solves `r x = b` for upper-triangular `r` (columns of `b` independently).
pub fn solve_upper(r: &DenseBlock, b: &DenseBlock) -> Result<DenseBlock> {
    let p = r.n_rows();
    if r.n_cols() != p || b.n_rows() != p {
        return Err(Error::dims(r.shape(), b.shape(), "upper-triangular solve"));
    }
    let mut x = b.clone();
    for c in 0..b.n_cols() {
        let col = x.col_mut(c);
        for i in (0..p).rev() {
            let mut s = col[i];
            for k in i + 1..p {
                s -= r[(i, k)] * col[k];
            }
            if r[(i, i)] == 0.0 {
                return Err(Error::Singular(format!("zero diagonal at {i}")));
            }
            col[i] = s / r[(i, i)];
        }
    }
    Ok(x)
}
