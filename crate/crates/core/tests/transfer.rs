use airga::linalg::{CsrMatrix, DenseBlock};
use airga::system::SecondOrderSystem;
use airga::transfer::{
    h2_error, h2_norm, hinf_norm, inverse_pencil_hinf, moments, output_map_h2, relative_h2_error,
    FrequencyGrid,
};

/// `m = k = 1`, `d = 1`: `H(s) = 1 / (s² + s + 1)`.
fn oscillator(gain: f64) -> SecondOrderSystem {
    let one = CsrMatrix::identity(1);
    SecondOrderSystem::proportional(
        one.clone(),
        one,
        DenseBlock::column_vector(&[gain]),
        DenseBlock::from_rows(&[&[1.0]]),
        DenseBlock::zeros(1, 1),
        0.5,
        0.5,
    )
    .unwrap()
}

/// Composite Simpson rule in `t = ln ω` on a very fine uniform mesh.
fn simpson_log(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = 200_000;
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / n as f64;
    let g = |t: f64| {
        let w = t.exp();
        f(w) * w
    };
    let mut s = g(a) + g(b);
    for i in 1..n {
        s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn oscillator_h2_matches_independent_quadrature() {
    let grid = FrequencyGrid::default();
    // The H₂ quantity here integrates |H|, not |H|².
    let mag = |w: f64| 1.0 / ((1.0 - w * w).powi(2) + w * w).sqrt();
    let oracle = simpson_log(grid.lo(), grid.hi(), mag) / std::f64::consts::PI;
    let got = h2_norm(&oscillator(1.0), &grid).unwrap();
    assert!((got - oracle).abs() < 1e-4 * oracle, "{got} vs {oracle}");
}

#[test]
fn oscillator_hinf_is_two_over_root_three() {
    let grid = FrequencyGrid::default();
    let exact = 2.0 / 3f64.sqrt();
    let h = hinf_norm(&oscillator(1.0), &grid).unwrap();
    assert!((h.value - exact).abs() < 1e-6);
    assert!((h.omega - 0.5f64.sqrt()).abs() < 1e-3);
    assert!((inverse_pencil_hinf(&oscillator(1.0), &grid).unwrap().value - exact).abs() < 1e-6);
}

#[test]
fn h2_error_is_linear_in_gain_difference() {
    let grid = FrequencyGrid::default();
    let (a, b) = (oscillator(1.0), oscillator(1.25));
    let base = h2_norm(&a, &grid).unwrap();
    assert!((h2_error(&a, &b, &grid).unwrap() - 0.25 * base).abs() < 1e-12);
    assert!((relative_h2_error(&a, &b, &grid).unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(h2_error(&a, &a, &grid).unwrap(), 0.0);
}

#[test]
fn oscillator_moments_are_taylor_coefficients() {
    // 1/L(s) with L(s) = s² + s + 1: X0 = 1/L, X1 = -L'/L², X2 = (L'² - L L''/2)/L³ with L'' = 2.
    let s0: f64 = 0.7;
    let (l, dl) = (s0 * s0 + s0 + 1.0, 2.0 * s0 + 1.0);
    let oracle = [1.0 / l, -dl / (l * l), (dl * dl - l) / l.powi(3)];
    let got = moments(&oscillator(1.0), s0, 3).unwrap();
    for (g, o) in got.iter().zip(oracle) {
        assert!((g[(0, 0)] - o).abs() < 1e-14, "{} vs {o}", g[(0, 0)]);
    }
}

#[test]
fn output_map_equals_transfer_for_unit_input() {
    let grid = FrequencyGrid::default();
    let sys = oscillator(1.0);
    assert!((output_map_h2(&sys, &grid).unwrap() - h2_norm(&sys, &grid).unwrap()).abs() < 1e-14);
}

#[test]
fn grid_rejects_bad_bounds() {
    assert!(FrequencyGrid::log(0.0, 1.0, 10).is_err());
    assert!(FrequencyGrid::log(2.0, 1.0, 10).is_err());
    assert!(FrequencyGrid::log(1.0, 2.0, 1).is_err());
}
