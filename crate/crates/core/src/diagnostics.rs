//! Backward-stability quantities of an inexact reduction.
//!
//! Inexact solves `L(σ) X̃ = B - η` are reinterpreted as exact solves with the
//! stiffness perturbed to `K + Z`, where `Z = η X⁺` is the minimum-Frobenius
//! solution of `Z X = η`. `Z` is only ever held as the factor pair.

use crate::airga::OuterIteration;
use crate::error::{Error, Result};
use crate::linalg::{factored_norms, solve_upper, thin_qr, trace_inner, DenseBlock};
use crate::system::{lanczos_max_eig, SecondOrderSystem};
use crate::transfer::{h2_norm, inverse_pencil_hinf, output_map_h2, state_map_hinf, FrequencyGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Threshold for the normalized orthogonality entries.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;
/// Relative `|r_kk|` threshold below which the solution stack is rank deficient.
pub const STACK_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrthogonalityMaxima {
    pub diag: f64,
    pub upper: f64,
    pub lower: f64,
}

impl OrthogonalityMaxima {
    pub fn off_diagonal(&self) -> f64 {
        self.upper.max(self.lower)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityMatrix {
    /// `J × J`, entry `(t, j) = ⟨Ṽ_t, η_j⟩ / (‖Ṽ_t‖_f ‖η_j‖_f)`.
    pub entries: DenseBlock,
    pub maxima: OrthogonalityMaxima,
}

/// Normalized trace inner products between basis blocks and residual blocks.
/// Entries involving a zero block are zero.
pub fn orthogonality_matrix(
    v_blocks: &[DenseBlock],
    eta_blocks: &[DenseBlock],
) -> Result<OrthogonalityMatrix> {
    let j = v_blocks.len();
    if eta_blocks.len() != j {
        return Err(Error::dims(
            (j, j),
            (eta_blocks.len(), j),
            "orthogonality matrix blocks",
        ));
    }
    let mut entries = DenseBlock::zeros(j, j);
    let mut maxima = OrthogonalityMaxima::default();
    for (t, v) in v_blocks.iter().enumerate() {
        let vn = v.frobenius_norm();
        for (u, eta) in eta_blocks.iter().enumerate() {
            let en = eta.frobenius_norm();
            let value = if vn == 0.0 || en == 0.0 {
                0.0
            } else {
                trace_inner(v, eta)? / (vn * en)
            };
            entries[(t, u)] = value;
            let slot = match t.cmp(&u) {
                std::cmp::Ordering::Equal => &mut maxima.diag,
                std::cmp::Ordering::Less => &mut maxima.upper,
                std::cmp::Ordering::Greater => &mut maxima.lower,
            };
            *slot = slot.max(value.abs());
        }
    }
    Ok(OrthogonalityMatrix { entries, maxima })
}

/// `Z = eta · x_pinv` in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFactors {
    pub eta: DenseBlock,
    pub x_stack: DenseBlock,
    pub x_pinv: DenseBlock,
}

impl PerturbationFactors {
    /// Moore-Penrose factors for the stack `x` (n × p, p < n, full column rank).
    pub fn new(eta: DenseBlock, x_stack: DenseBlock) -> Result<Self> {
        if eta.shape() != x_stack.shape() {
            return Err(Error::dims(
                x_stack.shape(),
                eta.shape(),
                "residual stack vs solution stack",
            ));
        }
        let (n, p) = x_stack.shape();
        if p >= n {
            return Err(Error::InvalidArgument(format!(
                "solution stack has {p} columns but only {n} rows"
            )));
        }
        let qr = thin_qr(&x_stack)?;
        let scale = x_stack.frobenius_norm();
        if (0..p).any(|k| qr.r[(k, k)].abs() <= STACK_RANK_TOL * scale) {
            return Err(Error::StackRankDeficient);
        }
        let x_pinv = solve_upper(&qr.r, &qr.q.transpose())?;
        Ok(Self {
            eta,
            x_stack,
            x_pinv,
        })
    }

    /// `(‖Z‖₂, ‖Z‖_f)`.
    pub fn z_norms(&self) -> Result<(f64, f64)> {
        factored_norms(&self.eta, &self.x_pinv)
    }

    /// `Z v`.
    pub fn apply(&self, v: &DenseBlock) -> Result<DenseBlock> {
        self.eta.matmul(&self.x_pinv.matmul(v)?)
    }

    /// `‖Z X - η‖_f`.
    pub fn defect(&self) -> Result<f64> {
        Ok(self.apply(&self.x_stack)?.sub(&self.eta)?.frobenius_norm())
    }
}

/// Factors of the perturbation for one outer iteration.
pub fn build_perturbation(it: &OuterIteration) -> Result<PerturbationFactors> {
    PerturbationFactors::new(it.eta_stack()?, it.x_stack()?)
}

/// `‖Vᵀ Z V‖_f = ‖(Vᵀη)(X⁺V)‖_f`.
pub fn vtzv_norm(factors: &PerturbationFactors, v: &DenseBlock) -> Result<f64> {
    let left = v.tr_matmul(&factors.eta)?;
    let right = factors.x_pinv.matmul(v)?;
    Ok(left.matmul(&right)?.frobenius_norm())
}

/// `‖K‖₂` by Lanczos on `KᵀK`.
pub fn stiffness_norm(sys: &SecondOrderSystem) -> f64 {
    let k = sys.k();
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let re: Vec<f64> = x.iter().map(|c| c.re).collect();
        let im: Vec<f64> = x.iter().map(|c| c.im).collect();
        let (kre, kim) = (k.mul_vec(&k.mul_vec(&re)), k.mul_vec(&k.mul_vec(&im)));
        kre.iter()
            .zip(&kim)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    };
    lanczos_max_eig(sys.n(), apply).0.sqrt()
}

/// The factors of the condition number `κ(H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    /// `‖C(s)L(s)⁻¹‖_{H₂}`.
    pub output_map_h2: f64,
    /// `‖L(s)⁻¹F‖_{H∞}`.
    pub state_map_hinf: f64,
    pub h2_norm: f64,
    pub k_norm_2: f64,
    /// `‖L(s)⁻¹‖_{H∞}`.
    pub l_inv_hinf: f64,
    pub kappa: f64,
    /// `‖L(s)⁻¹‖_{H∞} < 1`, the hypothesis under which `κ` is meaningful.
    pub hypothesis_ok: bool,
    /// Some norm estimate did not reach its target accuracy.
    pub degraded: bool,
}

impl Conditioning {
    /// `‖H - H̃‖_{H₂}` bound for a perturbation of spectral norm `z2`, or `None`
    /// when `z2 ‖L⁻¹‖_{H∞} ≥ 1`.
    pub fn theorem1_bound(&self, z2: f64) -> Option<f64> {
        let q = self.l_inv_hinf * z2;
        (q < 1.0).then(|| self.output_map_h2 * self.state_map_hinf * z2 / (1.0 - q))
    }
}

/// Condition number of the output H₂ norm with respect to perturbations of `K`.
pub fn condition_number(sys: &SecondOrderSystem, grid: &FrequencyGrid) -> Result<Conditioning> {
    let output_map_h2 = output_map_h2(sys, grid)?;
    let state = state_map_hinf(sys, grid)?;
    let h2 = h2_norm(sys, grid)?;
    let linv = inverse_pencil_hinf(sys, grid)?;
    let k_norm_2 = stiffness_norm(sys);
    let kappa = output_map_h2 * state.value / h2 * k_norm_2 / (1.0 - linv.value);
    Ok(Conditioning {
        output_map_h2,
        state_map_hinf: state.value,
        h2_norm: h2,
        k_norm_2,
        l_inv_hinf: linv.value,
        kappa,
        hypothesis_ok: linv.value < 1.0,
        degraded: state.degraded || linv.degraded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theorem2Checks {
    pub ritz_galerkin_ok: bool,
    pub extra_orthogonality_ok: bool,
    pub l_invertible_ok: bool,
    pub l_hinf_lt_1: bool,
    pub z_norm_lt_1: bool,
}

impl Theorem2Checks {
    pub fn all(&self) -> bool {
        self.ritz_galerkin_ok
            && self.extra_orthogonality_ok
            && self.l_invertible_ok
            && self.l_hinf_lt_1
            && self.z_norm_lt_1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eta_norm_f: f64,
    pub x_pinv_norm_f: f64,
    pub z_norm_2: f64,
    pub z_norm_f: f64,
    /// `‖η‖_f ‖X⁺‖_f`.
    pub z_norm_f_bound: f64,
    /// `‖ZX - η‖_f / ‖η‖_f` (zero when `η = 0`).
    pub z_defect: f64,
    pub l_inv_hinf: f64,
    pub kappa: f64,
    pub theorem1_bound: Option<f64>,
    pub theorem2_checks: Theorem2Checks,
    pub vtzv_norm: f64,
    pub orthogonality_matrix_max: OrthogonalityMaxima,
    /// False when the solution stack was rank deficient; the `Z` norms are
    /// then infinite.
    pub perturbation_defined: bool,
}

impl StabilityReport {
    /// `‖Z‖₂ ≤ ‖Z‖_f ≤ ‖η‖_f ‖X⁺‖_f`, with rounding slack.
    pub fn norm_chain_holds(&self) -> bool {
        let slack = 1e-12 * self.z_norm_f_bound;
        self.z_norm_2 <= self.z_norm_f * (1.0 + 1e-12) + f64::MIN_POSITIVE
            && self.z_norm_f <= self.z_norm_f_bound + slack
    }
}

/// Assembles the stability report of one outer iteration.
pub fn theorem2_checklist(
    it: &OuterIteration,
    sys: &SecondOrderSystem,
    grid: &FrequencyGrid,
) -> Result<StabilityReport> {
    let cond = condition_number(sys, grid);
    stability_report(it, cond.as_ref().ok())
}

/// Like [`theorem2_checklist`] with the system conditioning computed once by
/// the caller. `None` means the pencil could not be inverted on the grid.
pub fn stability_report(
    it: &OuterIteration,
    cond: Option<&Conditioning>,
) -> Result<StabilityReport> {
    let v_tilde = it.v_tilde();
    let eta_blocks: Vec<DenseBlock> = it.sources.iter().map(|s| s.residual.clone()).collect();
    let orth = orthogonality_matrix(&v_tilde, &eta_blocks)?;
    let eta_norm_f = it.eta_stack()?.frobenius_norm();

    let (mut x_pinv_norm_f, mut z2, mut zf, mut vtzv, mut defect) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::INFINITY,
        f64::INFINITY,
        f64::INFINITY,
    );
    let perturbation_defined = match build_perturbation(it) {
        Ok(f) => {
            x_pinv_norm_f = f.x_pinv.frobenius_norm();
            (z2, zf) = f.z_norms()?;
            vtzv = vtzv_norm(
                &f,
                &DenseBlock::hstack(&v_tilde.iter().collect::<Vec<_>>())?,
            )?;
            defect = if eta_norm_f == 0.0 {
                0.0
            } else {
                f.defect()? / eta_norm_f
            };
            true
        }
        Err(Error::StackRankDeficient) => false,
        Err(e) => return Err(e),
    };

    let (l_inv_hinf, kappa) =
        cond.map_or((f64::INFINITY, f64::INFINITY), |c| (c.l_inv_hinf, c.kappa));
    let checks = Theorem2Checks {
        ritz_galerkin_ok: orth.maxima.diag <= ORTHOGONALITY_TOL,
        extra_orthogonality_ok: orth.maxima.off_diagonal() <= ORTHOGONALITY_TOL,
        l_invertible_ok: cond.is_some() && l_inv_hinf.is_finite(),
        l_hinf_lt_1: l_inv_hinf < 1.0,
        z_norm_lt_1: z2 < 1.0,
    };
    Ok(StabilityReport {
        eta_norm_f,
        x_pinv_norm_f,
        z_norm_2: z2,
        z_norm_f: zf,
        z_norm_f_bound: eta_norm_f * x_pinv_norm_f,
        z_defect: defect,
        l_inv_hinf,
        kappa,
        theorem1_bound: cond.and_then(|c| c.theorem1_bound(z2)),
        theorem2_checks: checks,
        vtzv_norm: vtzv,
        orthogonality_matrix_max: orth.maxima,
        perturbation_defined,
    })
}
