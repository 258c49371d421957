//! Symmetric preconditioners: zero-fill incomplete Cholesky and a
//! symmetrized sparse approximate inverse.

use crate::error::{Error, Result};
use crate::linalg::{dot, householder_qr, solve_upper, CooBuilder, CsrMatrix, DenseBlock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    None,
    Ichol0,
    Spai,
}

impl std::str::FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "ichol0" | "ichol" => Ok(Self::Ichol0),
            "spai" => Ok(Self::Spai),
            other => Err(Error::InvalidArgument(format!(
                "unknown preconditioner `{other}`"
            ))),
        }
    }
}

/// Sparsity pattern allowed for each column of the approximate inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaiPattern {
    Diagonal,
    #[default]
    SameAsA,
}

const ICHOL_MAX_RETRIES: usize = 5;
const SPD_PROBES: usize = 10;

#[derive(Debug, Clone)]
enum Inner {
    Identity,
    /// Lower factor `L` with `A ≈ L Lᵀ`, rows stored in CSR.
    Ichol(CsrMatrix),
    Spai(CsrMatrix),
}

/// An SPD approximation `P⁻¹` to `A⁻¹`, applied as `z = P⁻¹ r`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    inner: Inner,
}

impl Preconditioner {
    pub fn identity() -> Self {
        Self {
            kind: PreconditionerKind::None,
            inner: Inner::Identity,
        }
    }

    pub fn build(kind: PreconditionerKind, a: &CsrMatrix) -> Result<Self> {
        match kind {
            PreconditionerKind::None => Ok(Self::identity()),
            PreconditionerKind::Ichol0 => ichol0(a),
            PreconditionerKind::Spai => spai(a, SpaiPattern::SameAsA),
        }
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match &self.inner {
            Inner::Identity => z.copy_from_slice(r),
            Inner::Spai(m) => m.mul_vec_into(r, z),
            Inner::Ichol(l) => {
                let n = l.n_rows();
                // L y = r
                for i in 0..n {
                    let (cols, vals) = l.row(i);
                    let last = cols.len() - 1;
                    let mut s = r[i];
                    for (&c, &v) in cols[..last].iter().zip(&vals[..last]) {
                        s -= v * z[c];
                    }
                    z[i] = s / vals[last];
                }
                // Lᵀ z = y, column sweep over the rows of L
                for i in (0..n).rev() {
                    let (cols, vals) = l.row(i);
                    let last = cols.len() - 1;
                    z[i] /= vals[last];
                    let zi = z[i];
                    for (&c, &v) in cols[..last].iter().zip(&vals[..last]) {
                        z[c] -= v * zi;
                    }
                }
            }
        }
    }
}

/// Zero-fill incomplete Cholesky on the lower pattern of `a`.
///
/// A non-positive pivot triggers a restart on `a + τI` with
/// `τ = 1e-3 · mean(diag a)`, growing tenfold per retry.
pub fn ichol0(a: &CsrMatrix) -> Result<Preconditioner> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::dims(a.shape(), (n, n), "incomplete Cholesky"));
    }
    let diag = a.diagonal();
    let mean_diag = diag.iter().sum::<f64>() / n.max(1) as f64;
    let mut shift = 0.0;
    let mut last_row = 0;
    for attempt in 0..=ICHOL_MAX_RETRIES {
        if attempt > 0 {
            shift = if shift == 0.0 {
                1e-3 * mean_diag.abs()
            } else {
                shift * 10.0
            };
        }
        match ichol0_attempt(a, shift) {
            Ok(l) => {
                return Ok(Preconditioner {
                    kind: PreconditionerKind::Ichol0,
                    inner: Inner::Ichol(l),
                })
            }
            Err(row) => last_row = row,
        }
    }
    Err(Error::IncompleteCholeskyBreakdown {
        row: last_row,
        retries: ICHOL_MAX_RETRIES,
    })
}

fn ichol0_attempt(a: &CsrMatrix, shift: f64) -> std::result::Result<CsrMatrix, usize> {
    let n = a.n_rows();
    let mut offsets = vec![0usize; n + 1];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for i in 0..n {
        let (rc, rv) = a.row(i);
        let mut has_diag = false;
        for (&c, &v) in rc.iter().zip(rv) {
            if c < i {
                cols.push(c);
                vals.push(v);
            } else if c == i {
                has_diag = true;
                cols.push(c);
                vals.push(v + shift);
            }
        }
        if !has_diag {
            cols.push(i);
            vals.push(shift);
        }
        offsets[i + 1] = cols.len();
    }

    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        let (start, end) = (offsets[i], offsets[i + 1]);
        for t in start..end {
            pos[cols[t]] = t;
        }
        for t in start..end - 1 {
            let k = cols[t];
            let mut s = vals[t];
            let (ks, ke) = (offsets[k], offsets[k + 1]);
            for u in ks..ke - 1 {
                let p = pos[cols[u]];
                if p != usize::MAX && p < t {
                    s -= vals[p] * vals[u];
                }
            }
            vals[t] = s / vals[ke - 1];
        }
        let d = vals[end - 1] - vals[start..end - 1].iter().map(|v| v * v).sum::<f64>();
        for t in start..end {
            pos[cols[t]] = usize::MAX;
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(i);
        }
        vals[end - 1] = d.sqrt();
    }
    Ok(CsrMatrix::try_from_parts(n, n, offsets, cols, vals).expect("lower pattern is valid CSR"))
}

/// Unsymmetrized sparse approximate inverse: column `j` minimizes
/// `‖A m_j - e_j‖₂` over the allowed pattern.
pub fn spai_matrix(a: &CsrMatrix, pattern: SpaiPattern) -> Result<CsrMatrix> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::dims(a.shape(), (n, n), "sparse approximate inverse"));
    }
    // Row j of aᵀ lists the nonzero rows of column j of a.
    let at = a.transpose();
    let mut coo = CooBuilder::with_capacity(n, n, a.nnz());
    let mut local = vec![usize::MAX; n];
    for j in 0..n {
        let allowed: Vec<usize> = match pattern {
            SpaiPattern::Diagonal => vec![j],
            SpaiPattern::SameAsA => {
                let mut c = at.row(j).0.to_vec();
                if !c.contains(&j) {
                    c.push(j);
                    c.sort_unstable();
                }
                c
            }
        };
        let mut rows: Vec<usize> = Vec::new();
        for &k in &allowed {
            rows.extend_from_slice(at.row(k).0);
        }
        rows.sort_unstable();
        rows.dedup();
        for (t, &r) in rows.iter().enumerate() {
            local[r] = t;
        }

        let solved = if rows.len() >= allowed.len() {
            let mut sub = DenseBlock::zeros(rows.len(), allowed.len());
            for (q, &k) in allowed.iter().enumerate() {
                let (rc, rv) = at.row(k);
                for (&r, &v) in rc.iter().zip(rv) {
                    sub[(local[r], q)] = v;
                }
            }
            householder_qr(&sub).ok().and_then(|qr| {
                let mut rhs = DenseBlock::zeros(allowed.len(), 1);
                if local[j] != usize::MAX {
                    for q in 0..allowed.len() {
                        rhs[(q, 0)] = qr.q[(local[j], q)];
                    }
                }
                solve_upper(&qr.r, &rhs).ok()
            })
        } else {
            None
        };
        for &r in &rows {
            local[r] = usize::MAX;
        }

        match solved {
            Some(x) => {
                for (q, &k) in allowed.iter().enumerate() {
                    coo.push(k, j, x[(q, 0)])?;
                }
            }
            None => {
                let ajj = a.get(j, j);
                if ajj == 0.0 {
                    return Err(Error::Singular(format!(
                        "zero diagonal at {j} in SPAI fallback"
                    )));
                }
                coo.push(j, j, 1.0 / ajj)?;
            }
        }
    }
    Ok(coo.build())
}

/// Symmetrized SPAI `(M + Mᵀ)/2`, checked for positive definiteness on
/// random probe vectors.
pub fn spai(a: &CsrMatrix, pattern: SpaiPattern) -> Result<Preconditioner> {
    let m = spai_matrix(a, pattern)?;
    let mt = m.transpose();
    let sym = CsrMatrix::linear_combination(&[(0.5, &m), (0.5, &mt)])?;
    let n = sym.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ba1);
    let mut y = vec![0.0; n];
    for _ in 0..SPD_PROBES {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        sym.mul_vec_into(&x, &mut y);
        let q = dot(&x, &y);
        if !(q > 0.0) {
            return Err(Error::PreconditionerNotSpd { value: q });
        }
    }
    Ok(Preconditioner {
        kind: PreconditionerKind::Spai,
        inner: Inner::Spai(sym),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply_vec(p: &Preconditioner, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        p.apply(r, &mut z);
        z
    }

    #[test]
    fn ichol_is_exact_on_tridiagonal() {
        // A tridiagonal matrix has no fill, so IC(0) equals the full factor.
        let a = CsrMatrix::tridiagonal(6, -1.0, 2.0, -1.0);
        let p = ichol0(&a).unwrap();
        let b = vec![1.0, 0.0, 2.0, -1.0, 0.5, 3.0];
        let x = apply_vec(&p, &b);
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn ichol_diagonal_is_inverse_diagonal() {
        let a = CsrMatrix::from_diagonal(&[4.0, 9.0]);
        let p = ichol0(&a).unwrap();
        assert_eq!(apply_vec(&p, &[4.0, 9.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn ichol_reports_hopeless_breakdown() {
        // The largest shift tried is ten times the diagonal mean, far below 100.
        let mut d = vec![1.0; 201];
        d[0] = -100.0;
        let a = CsrMatrix::from_diagonal(&d);
        assert!(matches!(
            ichol0(&a),
            Err(Error::IncompleteCholeskyBreakdown { retries: 5, .. })
        ));
    }

    #[test]
    fn spai_diagonal_pattern_on_diagonal_matrix() {
        let a = CsrMatrix::from_diagonal(&[2.0, 4.0, 8.0]);
        let m = spai_matrix(&a, SpaiPattern::Diagonal).unwrap();
        assert_eq!(m.diagonal(), vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn spai_beats_jacobi_in_frobenius() {
        let a = CsrMatrix::tridiagonal(20, -1.0, 4.0, -1.0);
        let n = a.n_rows();
        let m = spai_matrix(&a, SpaiPattern::SameAsA).unwrap();
        let am = a.to_dense().matmul(&m.to_dense()).unwrap();
        let jac = CsrMatrix::from_diagonal(&vec![0.25; n]);
        let aj = a.to_dense().matmul(&jac.to_dense()).unwrap();
        let eye = DenseBlock::identity(n);
        let e_spai = am.sub(&eye).unwrap().frobenius_norm();
        let e_jac = aj.sub(&eye).unwrap().frobenius_norm();
        assert!(e_spai <= e_jac, "{e_spai} > {e_jac}");
    }

    #[test]
    fn parse_kind() {
        assert_eq!(
            "SPAI".parse::<PreconditionerKind>().unwrap(),
            PreconditionerKind::Spai
        );
        assert!("ilu".parse::<PreconditionerKind>().is_err());
    }
}
