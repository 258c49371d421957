//! Small dense eigenvalue and singular-value helpers.

use crate::error::{Error, Result};
use crate::linalg::dense::DenseBlock;
use crate::linalg::qr::thin_qr;
use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigenvalues of the quadratic pencil `λ² m + λ d + k`.
///
/// The pencil is linearized to the first companion form
/// `[[0, I], [-m⁻¹k, -m⁻¹d]]` and the resulting `2r × 2r` standard problem is
/// solved by Hessenberg reduction followed by shifted (Francis) QR sweeps.
/// Eigenvalues come back sorted by ascending magnitude, ties broken by the
/// imaginary part.
pub fn quadratic_eigenvalues(
    m: &DenseBlock,
    d: &DenseBlock,
    k: &DenseBlock,
) -> Result<Vec<Complex64>> {
    let r = m.n_rows();
    for (name, blk) in [("m", m), ("d", d), ("k", k)] {
        if blk.shape() != (r, r) {
            return Err(Error::dims((r, r), blk.shape(), name_ctx(name)));
        }
    }
    if r == 0 {
        return Ok(Vec::new());
    }
    let m_na = m.to_nalgebra();
    let lu = m_na.clone().lu();
    let scale = m.max_abs();
    let pivot_min = (0..r)
        .map(|i| lu.u()[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if !(pivot_min > 1e-14 * scale) {
        return Err(Error::Singular(
            "mass matrix of the quadratic pencil".into(),
        ));
    }
    let minv_k = lu
        .solve(&k.to_nalgebra())
        .ok_or_else(|| Error::Singular("mass matrix of the quadratic pencil".into()))?;
    let minv_d = lu
        .solve(&d.to_nalgebra())
        .ok_or_else(|| Error::Singular("mass matrix of the quadratic pencil".into()))?;

    let mut companion = DMatrix::<f64>::zeros(2 * r, 2 * r);
    for i in 0..r {
        companion[(i, r + i)] = 1.0;
        for j in 0..r {
            companion[(r + i, j)] = -minv_k[(i, j)];
            companion[(r + i, r + j)] = -minv_d[(i, j)];
        }
    }
    let sweeps = 100 * 2 * r;
    let schur = Schur::try_new(companion, f64::EPSILON, sweeps)
        .ok_or(Error::EigenNoConvergence { sweeps })?;
    let mut eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| {
        a.norm()
            .total_cmp(&b.norm())
            .then(a.im.total_cmp(&b.im))
            .then(a.re.total_cmp(&b.re))
    });
    Ok(eig)
}

fn name_ctx(name: &str) -> &'static str {
    match name {
        "m" => "quadratic pencil m",
        "d" => "quadratic pencil d",
        _ => "quadratic pencil k",
    }
}

/// Largest singular value of a small dense real matrix.
pub fn dense_spectral_norm(a: &DenseBlock) -> f64 {
    if a.n_rows() == 0 || a.n_cols() == 0 {
        return 0.0;
    }
    a.to_nalgebra()
        .singular_values()
        .iter()
        .fold(0.0, |m: f64, &s| m.max(s))
}

/// Both norms of the rank-≤p product `a·b` (`a`: n×p, `b`: p×n), computed from
/// the `p×p` core `r_a r_bᵀ` after thin QR of `a` and `bᵀ`. Returns `(‖·‖₂, ‖·‖_f)`.
pub fn factored_norms(a: &DenseBlock, b: &DenseBlock) -> Result<(f64, f64)> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::dims(a.shape(), b.shape(), "factored product"));
    }
    if a.n_rows() < a.n_cols() || b.n_cols() < b.n_rows() {
        let prod = a.matmul(b)?;
        return Ok((dense_spectral_norm(&prod), prod.frobenius_norm()));
    }
    let ra = thin_qr(a)?.r;
    let rb = thin_qr(&b.transpose())?.r;
    let core = ra.matmul(&rb.transpose())?;
    Ok((dense_spectral_norm(&core), core.frobenius_norm()))
}

/// `σ_max(a·b)` without forming the `n × n` product.
pub fn spectral_norm(a: &DenseBlock, b: &DenseBlock) -> Result<f64> {
    factored_norms(a, b).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn undamped_unit_oscillator() {
        let one = DenseBlock::identity(1);
        let zero = DenseBlock::zeros(1, 1);
        let ev = quadratic_eigenvalues(&one, &zero, &one).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(close(ev[0], 0.0, -1.0));
        assert!(close(ev[1], 0.0, 1.0));
    }

    #[test]
    fn factorable_quadratic() {
        let ev = quadratic_eigenvalues(
            &DenseBlock::identity(1),
            &DenseBlock::from_rows(&[&[3.0]]),
            &DenseBlock::from_rows(&[&[2.0]]),
        )
        .unwrap();
        assert!(close(ev[0], -1.0, 0.0));
        assert!(close(ev[1], -2.0, 0.0));
    }

    #[test]
    fn singular_mass_rejected() {
        let z = DenseBlock::zeros(2, 2);
        let i = DenseBlock::identity(2);
        assert!(matches!(
            quadratic_eigenvalues(&z, &i, &i),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn spectral_norm_rank_one() {
        let n = 5;
        let mut a = DenseBlock::zeros(n, 1);
        a[(0, 0)] = 1.0;
        let b = a.transpose();
        assert!((spectral_norm(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((spectral_norm(&a.scaled(2.0), &b.scaled(3.0)).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_norm_matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, p) = (100, 3);
        let a = DenseBlock::from_col_major(
            n,
            p,
            (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let b = DenseBlock::from_col_major(
            p,
            n,
            (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let dense = dense_spectral_norm(&a.matmul(&b).unwrap());
        let fact = spectral_norm(&a, &b).unwrap();
        assert!((dense - fact).abs() <= 1e-10 * dense);
        let (_, fro) = factored_norms(&a, &b).unwrap();
        assert!((fro - a.matmul(&b).unwrap().frobenius_norm()).abs() <= 1e-10 * fro);
    }
}
