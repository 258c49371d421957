//! Frequency-grid quadrature for H₂ and H∞ quantities.
//!
//! The H₂ quantity integrates the Frobenius norm (not its square):
//! `‖H‖_{H₂} = (1/2π) ∫_ℝ ‖H(iω)‖_f dω`. Real-coefficient systems satisfy
//! `H(-iω) = conj(H(iω))`, so the integral is evaluated on `ω > 0` and doubled.

use crate::error::{Error, Result};
use crate::linalg::DenseBlock;
use crate::parallel::{map_indexed, map_indexed_sequential, pairwise_sum};
use crate::system::{CMat, TransferModel};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Sample points on `ω > 0` with trapezoidal weights for `∫ dω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for FrequencyGrid {
    /// 400 log-spaced points over `[1e-2, 1e6]` rad/s.
    fn default() -> Self {
        Self::log(1e-2, 1e6, 400).expect("default grid parameters are valid")
    }
}

impl FrequencyGrid {
    /// Log-spaced grid with trapezoid weights in `u = ln ω`
    /// (`dω = ω du`), i.e. `w_i = ω_i Δu`, halved at both ends.
    pub fn log(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) || count < 2 {
            return Err(Error::InvalidArgument(format!(
                "frequency grid needs 0 < lo < hi and at least 2 points (got {lo}, {hi}, {count})"
            )));
        }
        let (ulo, uhi) = (lo.ln(), hi.ln());
        let du = (uhi - ulo) / (count - 1) as f64;
        let omegas: Vec<f64> = (0..count)
            .map(|i| match i {
                0 => lo,
                _ if i == count - 1 => hi,
                _ => (ulo + i as f64 * du).exp(),
            })
            .collect();
        let weights = omegas
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let end = i == 0 || i == count - 1;
                w * du * if end { 0.5 } else { 1.0 }
            })
            .collect();
        Ok(Self { omegas, weights })
    }

    /// Same range with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let n = self.len();
        Self::log(
            self.omegas[0],
            self.omegas[n - 1],
            (n - 1) * factor.max(1) + 1,
        )
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.omegas[0]
    }

    pub fn hi(&self) -> f64 {
        self.omegas[self.len() - 1]
    }
}

/// How grid samples are evaluated. Both modes reduce in grid order and give
/// bitwise identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

fn sample<T, F>(grid: &FrequencyGrid, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync + Send,
{
    let omegas = grid.omegas();
    let values = match exec {
        Execution::Parallel => map_indexed(omegas.len(), |i| f(omegas[i])),
        Execution::Sequential => map_indexed_sequential(omegas.len(), |i| f(omegas[i])),
    };
    values.into_iter().collect()
}

/// `(1/π) Σ w_i g(ω_i)`, the doubled half-line quadrature of `(1/2π)∫ g`.
pub fn h2_integral<F>(grid: &FrequencyGrid, exec: Execution, g: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    let values = sample(grid, exec, g)?;
    let terms: Vec<f64> = values
        .iter()
        .zip(grid.weights())
        .map(|(v, w)| v * w)
        .collect();
    Ok(pairwise_sum(&terms) / PI)
}

fn iw(omega: f64) -> Complex64 {
    Complex64::new(0.0, omega)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value of a small complex matrix.
pub fn spectral(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.ncols() == 1 || a.nrows() == 1 {
        return frobenius(a);
    }
    a.clone()
        .singular_values()
        .iter()
        .fold(0.0f64, |m, &v| m.max(v))
}

/// `H(s)` of either a full or a reduced system.
pub fn eval_transfer(sys: &dyn TransferModel, s: Complex64) -> Result<CMat> {
    sys.transfer(s)
}

/// Moments `X⁽⁰⁾ … X⁽ᶜᵒᵘⁿᵗ⁻¹⁾` of `L(s)⁻¹F` at real `s0`, with
/// `X⁽ʲ⁾ = P₁X⁽ʲ⁻¹⁾ + P₂X⁽ʲ⁻²⁾`, `P₁ = -L⁻¹(2s₀M + D)`, `P₂ = -L⁻¹M`.
pub fn moments(sys: &dyn TransferModel, s0: f64, count: usize) -> Result<Vec<DenseBlock>> {
    sys.moments(s0, count)
}

fn check_io(a: &dyn TransferModel, b: &dyn TransferModel) -> Result<()> {
    if (a.outputs(), a.inputs()) != (b.outputs(), b.inputs()) {
        return Err(Error::dims(
            (a.outputs(), a.inputs()),
            (b.outputs(), b.inputs()),
            "transfer functions compared",
        ));
    }
    Ok(())
}

/// `‖H‖_{H₂}` on the grid.
pub fn h2_norm(sys: &dyn TransferModel, grid: &FrequencyGrid) -> Result<f64> {
    h2_integral(grid, Execution::Parallel, |w| {
        sys.transfer(iw(w)).map(|h| frobenius(&h))
    })
}

/// `‖H_a - H_b‖_{H₂}` on the grid.
pub fn h2_error(a: &dyn TransferModel, b: &dyn TransferModel, grid: &FrequencyGrid) -> Result<f64> {
    h2_error_with(a, b, grid, Execution::Parallel)
}

pub fn h2_error_with(
    a: &dyn TransferModel,
    b: &dyn TransferModel,
    grid: &FrequencyGrid,
    exec: Execution,
) -> Result<f64> {
    check_io(a, b)?;
    h2_integral(grid, exec, |w| {
        let s = iw(w);
        Ok(frobenius(&(a.transfer(s)? - b.transfer(s)?)))
    })
}

/// `‖H_a - H_b‖_{H₂} / ‖H_a‖_{H₂}`; zero when both vanish.
pub fn relative_h2_error(
    a: &dyn TransferModel,
    b: &dyn TransferModel,
    grid: &FrequencyGrid,
) -> Result<f64> {
    check_io(a, b)?;
    let pairs = sample(grid, Execution::Parallel, |w| {
        let s = iw(w);
        let ha = a.transfer(s)?;
        let hb = b.transfer(s)?;
        Ok((frobenius(&(&ha - &hb)), frobenius(&ha)))
    })?;
    let diff: Vec<f64> = pairs
        .iter()
        .zip(grid.weights())
        .map(|(p, w)| p.0 * w)
        .collect();
    let base: Vec<f64> = pairs
        .iter()
        .zip(grid.weights())
        .map(|(p, w)| p.1 * w)
        .collect();
    let (d, b) = (pairwise_sum(&diff), pairwise_sum(&base));
    Ok(if b == 0.0 {
        if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        d / b
    })
}

/// `‖C(s)L(s)⁻¹‖_{H₂}`.
pub fn output_map_h2(sys: &dyn TransferModel, grid: &FrequencyGrid) -> Result<f64> {
    h2_integral(grid, Execution::Parallel, |w| {
        sys.output_response(iw(w)).map(|x| frobenius(&x))
    })
}

/// Supremum estimate of a scalar frequency function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupNorm {
    pub value: f64,
    pub omega: f64,
    /// Some sample was itself an estimate of degraded accuracy.
    pub degraded: bool,
}

const GOLDEN_ROUNDS: usize = 3;
const GOLDEN_STEPS: usize = 30;

/// Maximum of `g` over the grid, refined by golden-section search (in `ln ω`)
/// around the best grid point. Each of the three rounds re-brackets around
/// the current maximizer.
pub fn sup_over_grid<F>(grid: &FrequencyGrid, exec: Execution, g: F) -> Result<SupNorm>
where
    F: Fn(f64) -> Result<(f64, bool)> + Sync + Send,
{
    let values = sample(grid, exec, &g)?;
    let mut degraded = values.iter().any(|v| v.1);
    let (imax, &(vmax, _)) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .ok_or_else(|| Error::InvalidArgument("empty frequency grid".into()))?;
    let om = grid.omegas();
    let mut best = (om[imax].ln(), vmax);
    let mut lo = om[imax.saturating_sub(1)].ln();
    let mut hi = om[(imax + 1).min(om.len() - 1)].ln();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut eval = |u: f64, best: &mut (f64, f64)| -> Result<f64> {
        let (v, d) = g(u.exp())?;
        degraded |= d;
        if v > best.1 {
            *best = (u, v);
        }
        Ok(v)
    };
    for _ in 0..GOLDEN_ROUNDS {
        if hi <= lo {
            break;
        }
        let (mut a, mut b) = (lo, hi);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = eval(c, &mut best)?;
        let mut fd = eval(d, &mut best)?;
        for _ in 0..GOLDEN_STEPS {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c, &mut best)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d, &mut best)?;
            }
        }
        let width = (b - a).max(1e-12);
        lo = (best.0 - 4.0 * width).max(grid.lo().ln());
        hi = (best.0 + 4.0 * width).min(grid.hi().ln());
    }
    Ok(SupNorm {
        value: best.1,
        omega: best.0.exp(),
        degraded,
    })
}

/// `‖H‖_{H∞}`.
pub fn hinf_norm(sys: &dyn TransferModel, grid: &FrequencyGrid) -> Result<SupNorm> {
    sup_over_grid(grid, Execution::Parallel, |w| {
        Ok((spectral(&sys.transfer(iw(w))?), false))
    })
}

/// `‖H_a - H_b‖_{H∞}`.
pub fn hinf_error(
    a: &dyn TransferModel,
    b: &dyn TransferModel,
    grid: &FrequencyGrid,
) -> Result<SupNorm> {
    check_io(a, b)?;
    sup_over_grid(grid, Execution::Parallel, |w| {
        let s = iw(w);
        Ok((spectral(&(a.transfer(s)? - b.transfer(s)?)), false))
    })
}

/// `‖L(s)⁻¹‖_{H∞}`.
pub fn inverse_pencil_hinf(sys: &dyn TransferModel, grid: &FrequencyGrid) -> Result<SupNorm> {
    sup_over_grid(grid, Execution::Parallel, |w| {
        sys.inverse_norm(iw(w)).map(|e| (e.value, e.degraded))
    })
}

/// `‖L(s)⁻¹F‖_{H∞}`.
pub fn state_map_hinf(sys: &dyn TransferModel, grid: &FrequencyGrid) -> Result<SupNorm> {
    sup_over_grid(grid, Execution::Parallel, |w| {
        Ok((spectral(&sys.state_response(iw(w))?), false))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;
    use crate::system::SecondOrderSystem;

    fn oscillator() -> SecondOrderSystem {
        let one = CsrMatrix::identity(1);
        SecondOrderSystem::proportional(
            one.clone(),
            one,
            DenseBlock::identity(1),
            DenseBlock::identity(1),
            DenseBlock::zeros(1, 1),
            0.5,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn grid_weights_integrate_power_law() {
        // ∫_1^e ω dω = (e² - 1) / 2
        let g = FrequencyGrid::log(1.0, std::f64::consts::E, 2001).unwrap();
        let approx: f64 = g.omegas().iter().zip(g.weights()).map(|(w, c)| w * c).sum();
        let exact = (std::f64::consts::E.powi(2) - 1.0) / 2.0;
        assert!((approx - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn self_error_is_zero() {
        let s = oscillator();
        assert_eq!(h2_error(&s, &s, &FrequencyGrid::default()).unwrap(), 0.0);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let s = oscillator();
        let grid = FrequencyGrid::default();
        let red = s.project(&DenseBlock::identity(1)).unwrap();
        let mut red2 = red.clone();
        red2.k_hat[(0, 0)] = 1.1;
        let a = h2_error_with(&s, &red2, &grid, Execution::Parallel).unwrap();
        let b = h2_error_with(&s, &red2, &grid, Execution::Sequential).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn inverse_pencil_peak_is_two_over_root_three() {
        let s = oscillator();
        let sup = inverse_pencil_hinf(&s, &FrequencyGrid::default()).unwrap();
        assert!((sup.value - 2.0 / 3f64.sqrt()).abs() <= 1e-6);
        assert!((sup.omega - 0.5f64.sqrt()).abs() <= 1e-3);
    }
}
