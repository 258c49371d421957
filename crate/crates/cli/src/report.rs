//! `report.json` schema.

use airga::airga::{AirgaResult, OuterIteration, SolveInfo, SolverConfig};
use airga::diagnostics::{stability_report, Conditioning, OrthogonalityMaxima, StabilityReport};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Non-finite values (undefined perturbations) serialize as `null`.
fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub source: String,
    pub family: Option<String>,
    pub n: usize,
    pub seed: Option<u64>,
    pub alpha: f64,
    pub beta: f64,
    pub damping_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigInfo {
    pub r_max: usize,
    pub initial_points: Vec<f64>,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub max_outer: usize,
    pub solver: SolverConfig,
    pub grid: GridInfo,
}

/// Checks needing `‖L⁻¹‖_{H∞}` are `null` unless conditioning was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub ritz_galerkin_ok: bool,
    pub extra_orthogonality_ok: bool,
    pub l_invertible_ok: Option<bool>,
    pub l_hinf_lt_1: Option<bool>,
    pub z_norm_lt_1: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningInfo {
    pub output_map_h2: f64,
    pub state_map_hinf: f64,
    pub h2_norm: f64,
    pub k_norm_2: f64,
    pub l_inv_hinf: f64,
    pub kappa: Option<f64>,
    pub hypothesis_ok: bool,
    pub degraded: bool,
}

impl From<&Conditioning> for ConditioningInfo {
    fn from(c: &Conditioning) -> Self {
        Self {
            output_map_h2: c.output_map_h2,
            state_map_hinf: c.state_map_hinf,
            h2_norm: c.h2_norm,
            k_norm_2: c.k_norm_2,
            l_inv_hinf: c.l_inv_hinf,
            kappa: finite(c.kappa),
            hypothesis_ok: c.hypothesis_ok,
            degraded: c.degraded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub points: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub reduced_order: usize,
    /// Relative H₂ distance to the previous outer iterate.
    pub h2_change: Option<f64>,
    pub inner_converged: bool,
    pub eta_norm_f: f64,
    pub x_pinv_norm_f: Option<f64>,
    pub z_norm_2: Option<f64>,
    pub z_norm_f: Option<f64>,
    pub z_defect: Option<f64>,
    pub vtzv_norm: Option<f64>,
    pub orthogonality: OrthogonalityMaxima,
    pub theorem1_bound: Option<f64>,
    pub theorem2_checks: Checks,
    pub solver_iterations: usize,
    pub solve_seconds: f64,
    pub solves: Vec<SolveInfo>,
    pub next_points: Vec<f64>,
    pub padded: bool,
}

impl IterationRecord {
    pub fn new(
        index: usize,
        it: &OuterIteration,
        rep: &StabilityReport,
        cond: Option<&Conditioning>,
    ) -> Self {
        let c = rep.theorem2_checks;
        Self {
            iteration: index + 1,
            points: it.points.clone(),
            sigmas: it.sigmas(),
            reduced_order: it.reduced.dim(),
            h2_change: it.change,
            inner_converged: it.inner_converged,
            eta_norm_f: rep.eta_norm_f,
            x_pinv_norm_f: finite(rep.x_pinv_norm_f),
            z_norm_2: finite(rep.z_norm_2),
            z_norm_f: finite(rep.z_norm_f),
            z_defect: finite(rep.z_defect),
            vtzv_norm: finite(rep.vtzv_norm),
            orthogonality: rep.orthogonality_matrix_max,
            theorem1_bound: rep.theorem1_bound,
            theorem2_checks: Checks {
                ritz_galerkin_ok: c.ritz_galerkin_ok,
                extra_orthogonality_ok: c.extra_orthogonality_ok,
                l_invertible_ok: cond.map(|_| c.l_invertible_ok),
                l_hinf_lt_1: cond.map(|_| c.l_hinf_lt_1),
                z_norm_lt_1: c.z_norm_lt_1,
            },
            solver_iterations: it.total_iterations(),
            solve_seconds: it.solve_seconds(),
            solves: it.solves.clone(),
            next_points: it.next_points.clone(),
            padded: it.padded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub model: ModelInfo,
    pub config: ConfigInfo,
    pub converged: bool,
    pub reduced_order: usize,
    pub conditioning: Option<ConditioningInfo>,
    pub iterations: Vec<IterationRecord>,
    /// Checks of the final outer iteration.
    pub theorem2_checks: Checks,
    pub wall_seconds: f64,
}

impl Report {
    pub fn new(
        model: ModelInfo,
        config: ConfigInfo,
        run: &AirgaResult,
        cond: Option<&Conditioning>,
        wall_seconds: f64,
    ) -> airga::Result<Self> {
        let mut iterations = Vec::with_capacity(run.trace.len());
        for (i, it) in run.trace.iter().enumerate() {
            let rep = stability_report(it, cond)?;
            iterations.push(IterationRecord::new(i, it, &rep, cond));
        }
        let theorem2_checks = iterations
            .last()
            .map(|r| r.theorem2_checks)
            .expect("a run has at least one iteration");
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            model,
            config,
            converged: run.converged,
            reduced_order: run.reduced.dim(),
            conditioning: cond.map(ConditioningInfo::from),
            iterations,
            theorem2_checks,
            wall_seconds,
        })
    }
}
