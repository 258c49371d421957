//! Test-model generators and file exchange.
//!
//! The generated families are structurally similar stand-ins for benchmark
//! models (a finite-difference beam and a seeded sparse SPD family); they do
//! not reproduce any archived matrices.

pub mod io;
pub mod mtx;

use crate::error::{Error, Result};
use crate::linalg::{CooBuilder, CsrMatrix, DenseBlock};
use crate::system::SecondOrderSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Beam1d,
    SpdSynthetic,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Beam1d => "beam1d",
            Self::SpdSynthetic => "spd-synthetic",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beam1d" | "beam" => Ok(Self::Beam1d),
            "spd-synthetic" | "synthetic" => Ok(Self::SpdSynthetic),
            other => Err(Error::InvalidArgument(format!(
                "unknown model family `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl ModelSpec {
    /// Beam with `α = β = 0.05`.
    pub fn beam(n: usize) -> Self {
        Self {
            family: ModelFamily::Beam1d,
            n,
            alpha: 0.05,
            beta: 0.05,
            seed: 0,
        }
    }

    /// Sparse SPD family with `α = 0.2`, `β = 1.34e-4`.
    pub fn synthetic(n: usize, seed: u64) -> Self {
        Self {
            family: ModelFamily::SpdSynthetic,
            n,
            alpha: 0.2,
            beta: 1.34e-4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidArgument(format!(
                "model size n = {} must be at least 4",
                self.n
            )));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Builds the system described by `spec`; deterministic in `spec`.
pub fn generate(spec: &ModelSpec) -> Result<SecondOrderSystem> {
    spec.validate()?;
    match spec.family {
        ModelFamily::Beam1d => beam1d(spec),
        ModelFamily::SpdSynthetic => spd_synthetic(spec),
    }
}

/// Clamped-ends stencil: `K = (n+1)² tridiag(-1, 2, -1)`,
/// `M = tridiag(1, 4, 1) / (6(n+1))`, load at the free end, output at the first node.
fn beam1d(spec: &ModelSpec) -> Result<SecondOrderSystem> {
    let n = spec.n;
    let h_inv = (n + 1) as f64;
    let k = CsrMatrix::tridiagonal(n, -1.0, 2.0, -1.0).scaled(h_inv * h_inv);
    let m = CsrMatrix::tridiagonal(n, 1.0, 4.0, 1.0).scaled(1.0 / (6.0 * h_inv));
    let mut f = DenseBlock::zeros(n, 1);
    f[(n - 1, 0)] = 1.0;
    let mut cp = DenseBlock::zeros(1, n);
    cp[(0, 0)] = 1.0;
    SecondOrderSystem::proportional(m, k, f, cp, DenseBlock::zeros(1, n), spec.alpha, spec.beta)
}

/// Half-bandwidth of the random factor used by the synthetic family.
const SYNTHETIC_BAND: usize = 4;
const SYNTHETIC_ROW_NNZ: usize = 3;
/// Entries of the random factor are uniform in `±spread·√n`, so that `AᵀA`
/// rather than the `nI` shift shapes the spectrum.
const STIFFNESS_SPREAD: f64 = 10.0;
const MASS_SPREAD: f64 = 3.0;

/// `AᵀA + nI` for a seeded random banded `A` with about three entries per row,
/// scaled to unit mean diagonal.
fn random_spd(n: usize, spread: f64, rng: &mut ChaCha8Rng) -> Result<CsrMatrix> {
    let scale = spread * (n as f64).sqrt();
    let mut coo = CooBuilder::with_capacity(n, n, n * SYNTHETIC_ROW_NNZ);
    for i in 0..n {
        let lo = i.saturating_sub(SYNTHETIC_BAND);
        let hi = (i + SYNTHETIC_BAND).min(n - 1);
        coo.push(i, i, scale * rng.gen_range(-1.0..1.0))?;
        for _ in 1..SYNTHETIC_ROW_NNZ {
            coo.push(i, rng.gen_range(lo..=hi), scale * rng.gen_range(-1.0..1.0))?;
        }
    }
    let a = coo.build();
    let mut gram = CooBuilder::with_capacity(n, n, n * 16);
    // (AᵀA)_{jk} = Σ_i a_ij a_ik, accumulated row by row of A.
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &vj) in cols.iter().zip(vals) {
            for (&k, &vk) in cols.iter().zip(vals) {
                gram.push(j, k, vj * vk)?;
            }
        }
    }
    let ata = gram.build();
    let shifted =
        CsrMatrix::linear_combination(&[(1.0, &ata), (n as f64, &CsrMatrix::identity(n))])?;
    let mean = shifted.diagonal().iter().sum::<f64>() / n as f64;
    Ok(shifted.scaled(1.0 / mean))
}

fn spd_synthetic(spec: &ModelSpec) -> Result<SecondOrderSystem> {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = random_spd(n, STIFFNESS_SPREAD, &mut rng)?;
    let m = random_spd(n, MASS_SPREAD, &mut rng)?;
    let f = DenseBlock::from_col_major(n, 1, vec![1.0 / (n as f64).sqrt(); n])?;
    let mut cp = DenseBlock::zeros(1, n);
    cp[(0, 0)] = 1.0;
    SecondOrderSystem::proportional(m, k, f, cp, DenseBlock::zeros(1, n), spec.alpha, spec.beta)
}
