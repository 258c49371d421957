//! Adaptive iterative rational global Arnoldi.
//!
//! Each outer iteration builds a block rational Krylov basis from shifted
//! solves at a set of real expansion points, projects the second-order system
//! onto it and then moves the points to the magnitudes of the smallest reduced
//! eigenvalues. The trace keeps the raw solves that produced every basis block
//! so that the backward-stability quantities can be formed afterwards.

use crate::error::{Error, Result};
use crate::linalg::{householder_qr, quadratic_eigenvalues, spmv, trace_inner, DenseBlock};
use crate::parallel::try_map_indexed;
use crate::solvers::{
    build_recycle_space, cg_solve, rcg_solve, DirectSolver, Preconditioner, PreconditionerKind,
    RecycleSpace, ShiftedOperator, SolveOptions, SolveRecord,
};
use crate::system::{ReducedSystem, SecondOrderSystem};
use crate::transfer::{relative_h2_error, FrequencyGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Candidates below this Frobenius norm terminate the basis construction.
pub const BREAKDOWN_TOL: f64 = 1e-14;
/// Relative tolerance for merging eigenvalue magnitudes.
const DEDUP_TOL: f64 = 1e-8;
/// Candidate norms within this relative distance count as a tie.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Direct,
    Cg,
    Rcg,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Cg => "cg",
            Self::Rcg => "rcg",
        })
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Self::Direct),
            "cg" => Ok(Self::Cg),
            "rcg" => Ok(Self::Rcg),
            other => Err(Error::InvalidArgument(format!(
                "unknown solver mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Relative residual tolerance of the iterative modes.
    pub rel_tol: f64,
    pub preconditioner: PreconditionerKind,
    /// Per-solve iteration cap; `None` means `10 n`.
    pub max_iter: Option<usize>,
    pub recycling_enabled: bool,
}

impl SolverConfig {
    pub fn direct() -> Self {
        Self {
            mode: SolverMode::Direct,
            rel_tol: 1e-10,
            preconditioner: PreconditionerKind::None,
            max_iter: None,
            recycling_enabled: false,
        }
    }

    pub fn cg(rel_tol: f64, preconditioner: PreconditionerKind) -> Self {
        Self {
            mode: SolverMode::Cg,
            rel_tol,
            preconditioner,
            max_iter: None,
            recycling_enabled: false,
        }
    }

    pub fn rcg(rel_tol: f64, preconditioner: PreconditionerKind) -> Self {
        Self {
            mode: SolverMode::Rcg,
            recycling_enabled: true,
            ..Self::cg(rel_tol, preconditioner)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != SolverMode::Direct && !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.mode == SolverMode::Rcg && !self.recycling_enabled {
            return Err(Error::InvalidArgument("rcg mode requires recycling".into()));
        }
        Ok(())
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            ..SolveOptions::default()
        }
    }
}

/// Real, positive, pairwise distinct expansion points in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPointSet {
    points: Vec<f64>,
}

impl ExpansionPointSet {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "expansion point set is empty".into(),
            ));
        }
        if let Some(p) = points.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "expansion point {p} is not positive"
            )));
        }
        points.sort_by(f64::total_cmp);
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "expansion points must be distinct".into(),
            ));
        }
        Ok(Self { points })
    }

    /// `count` equispaced points on `[lo, hi]`.
    pub fn linear(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::spaced(lo, hi, count, |lo, hi, t| lo + t * (hi - lo))
    }

    /// `count` logarithmically spaced points on `[lo, hi]`.
    pub fn log(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if lo <= 0.0 {
            return Err(Error::InvalidArgument("log spacing needs lo > 0".into()));
        }
        Self::spaced(lo, hi, count, |lo, hi, t| lo * (hi / lo).powf(t))
    }

    fn spaced(lo: f64, hi: f64, count: usize, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        if count == 0 || (count > 1 && !(hi > lo)) {
            return Err(Error::InvalidArgument(format!(
                "need count >= 1 and lo < hi, got {count} points on [{lo}, {hi}]"
            )));
        }
        if count == 1 {
            return Self::new(vec![lo]);
        }
        let last = (count - 1) as f64;
        Self::new((0..count).map(|i| f(lo, hi, i as f64 / last)).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Index of the largest norm. Near-ties (relative `1e-12`) resolve to the
/// smallest index so the choice does not depend on rounding noise.
pub fn select_sigma(norms: &[f64]) -> usize {
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    norms
        .iter()
        .position(|&v| v >= max - TIE_TOL * max.abs())
        .unwrap_or(0)
}

/// Next expansion points from reduced eigenvalues: the `count` smallest
/// distinct positive magnitudes, padded geometrically when too few exist.
/// The flag reports whether padding happened.
pub fn points_from_eigenvalues(
    eigs: &[Complex64],
    count: usize,
) -> Result<(ExpansionPointSet, bool)> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "need at least one expansion point".into(),
        ));
    }
    let mut mags: Vec<f64> = eigs
        .iter()
        .map(|l| l.norm())
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();
    mags.sort_by(f64::total_cmp);
    let mut kept: Vec<f64> = Vec::with_capacity(count);
    for v in mags {
        match kept.last() {
            Some(&last) if v - last <= DEDUP_TOL * v => {}
            _ => kept.push(v),
        }
        if kept.len() == count {
            break;
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidArgument(
            "reduced pencil has no eigenvalue of positive magnitude".into(),
        ));
    }
    let padded = kept.len() < count;
    if padded {
        let lo = kept[0];
        let mut hi = *kept.last().unwrap();
        if hi <= lo * (1.0 + DEDUP_TOL) {
            hi = 10.0 * lo;
            kept.push(hi);
        }
        let mut t: usize = 1;
        while kept.len() < count {
            // Interpolants lo·(hi/lo)^(t/2^k) visit ever finer dyadic levels.
            let level = usize::BITS - t.leading_zeros();
            let denom = (1usize << level) as f64;
            let frac = (2 * (t - (1 << (level - 1))) + 1) as f64 / denom;
            let cand = lo * (hi / lo).powf(frac);
            if kept.iter().all(|k| (k - cand).abs() > DEDUP_TOL * cand) {
                kept.push(cand);
            }
            t += 1;
        }
    }
    Ok((ExpansionPointSet::new(kept)?, padded))
}

/// Expansion points for the next outer iteration of `reduced`.
pub fn refresh_expansion_points(
    reduced: &ReducedSystem,
    count: usize,
) -> Result<(ExpansionPointSet, bool)> {
    let eigs = quadratic_eigenvalues(&reduced.m_hat, &reduced.d_hat, &reduced.k_hat)?;
    points_from_eigenvalues(&eigs, count)
}

/// Relative H₂ distance between consecutive reduced systems, measured
/// against the newer one.
pub fn reduced_change(
    previous: &ReducedSystem,
    current: &ReducedSystem,
    grid: &FrequencyGrid,
) -> Result<f64> {
    relative_h2_error(current, previous, grid)
}

/// Whether two consecutive temporary reduced systems agree to `tol`.
pub fn inner_converged(
    previous: &ReducedSystem,
    current: &ReducedSystem,
    tol: f64,
    grid: &FrequencyGrid,
) -> Result<bool> {
    Ok(reduced_change(previous, current, grid)? <= tol)
}

/// Recorded choices of one outer iteration, enough to repeat it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub points: Vec<f64>,
    /// Index into `points` of each σ_j, `j = 1..J`.
    pub sigma_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirgaOptions {
    pub r_max: usize,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub max_outer: usize,
    pub grid: FrequencyGrid,
    pub solver: SolverConfig,
    /// When set, the point sets, σ sequences, basis sizes and outer count are
    /// taken from here instead of being decided adaptively.
    pub replay: Option<Vec<ReplayStep>>,
}

impl AirgaOptions {
    pub fn new(r_max: usize, solver: SolverConfig) -> Self {
        Self {
            r_max,
            outer_tol: 1e-4,
            inner_tol: 1e-6,
            max_outer: 10,
            grid: FrequencyGrid::default(),
            solver,
            replay: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStage {
    /// Solve with right-hand side `F` at every expansion point.
    Initial,
    /// Solve with right-hand side `-M V_j`.
    Arnoldi { step: usize },
}

/// Bookkeeping for one block solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub stage: SolveStage,
    pub point_index: usize,
    pub shift: f64,
    pub iterations: usize,
    pub floor_limited: bool,
    pub final_relative_residual: f64,
    pub recycle_dim: usize,
    pub seconds: f64,
}

/// One raw solve `X̃` with its residual `η = B - L(σ) X̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSolve {
    pub solution: DenseBlock,
    pub residual: DenseBlock,
    /// Position of the producing solve in [`OuterIteration::solves`].
    pub solve_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterIteration {
    pub points: Vec<f64>,
    pub sigma_indices: Vec<usize>,
    pub solves: Vec<SolveInfo>,
    /// The raw solve behind each basis block `V_1..V_J`, in block order.
    pub sources: Vec<SourceSolve>,
    /// `V_1..V_J` after global Gram-Schmidt, before the final QR.
    pub blocks: Vec<DenseBlock>,
    pub reduced: ReducedSystem,
    /// Relative H₂ change against the previous outer iteration.
    pub change: Option<f64>,
    pub inner_converged: bool,
    /// Points proposed for the next iteration.
    pub next_points: Vec<f64>,
    pub padded: bool,
}

impl OuterIteration {
    pub fn sigmas(&self) -> Vec<f64> {
        self.sigma_indices.iter().map(|&i| self.points[i]).collect()
    }

    /// Number of basis blocks `J`.
    pub fn j_final(&self) -> usize {
        self.sources.len()
    }

    /// `X = [X̃_1, …, X̃_J]`.
    pub fn x_stack(&self) -> Result<DenseBlock> {
        DenseBlock::hstack(&self.sources.iter().map(|s| &s.solution).collect::<Vec<_>>())
    }

    /// `η = [η_1, …, η_J]`.
    pub fn eta_stack(&self) -> Result<DenseBlock> {
        DenseBlock::hstack(&self.sources.iter().map(|s| &s.residual).collect::<Vec<_>>())
    }

    /// `Ṽ_j = X̃_j / ‖X̃_j‖_f`.
    pub fn v_tilde(&self) -> Vec<DenseBlock> {
        self.sources
            .iter()
            .map(|s| s.solution.scaled(1.0 / s.solution.frobenius_norm()))
            .collect()
    }

    pub fn total_iterations(&self) -> usize {
        self.solves.iter().map(|s| s.iterations).sum()
    }

    pub fn solve_seconds(&self) -> f64 {
        self.solves.iter().map(|s| s.seconds).sum()
    }

    /// How many basis blocks were generated from the point `points[i]`.
    pub fn multiplicity(&self, i: usize) -> usize {
        self.sigma_indices.iter().filter(|&&k| k == i).count()
    }

    pub fn replay_step(&self) -> ReplayStep {
        ReplayStep {
            points: self.points.clone(),
            sigma_indices: self.sigma_indices.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirgaResult {
    pub reduced: ReducedSystem,
    pub trace: Vec<OuterIteration>,
    pub converged: bool,
}

impl AirgaResult {
    pub fn replay_plan(&self) -> Vec<ReplayStep> {
        self.trace.iter().map(OuterIteration::replay_step).collect()
    }

    pub fn outer_iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Everything needed to solve repeatedly at one shift.
struct PointSolver {
    op: ShiftedOperator,
    precond: Preconditioner,
    direct: Option<DirectSolver>,
}

struct BlockSolve {
    solution: DenseBlock,
    residual: DenseBlock,
    iterations: usize,
    floor_limited: bool,
    final_relative_residual: f64,
    seconds: f64,
}

impl PointSolver {
    fn new(sys: &SecondOrderSystem, shift: f64, cfg: &SolverConfig) -> Result<Self> {
        let op = sys.shifted(shift)?;
        let (precond, direct) = match cfg.mode {
            SolverMode::Direct => (Preconditioner::identity(), Some(DirectSolver::new(&op)?)),
            _ => (
                Preconditioner::build(cfg.preconditioner, op.matrix())?,
                None,
            ),
        };
        Ok(Self {
            op,
            precond,
            direct,
        })
    }

    fn solve(
        &self,
        b: &DenseBlock,
        recycle: Option<&RecycleSpace>,
        cfg: &SolverConfig,
    ) -> Result<BlockSolve> {
        let (n, p) = b.shape();
        let opts = cfg.solve_options();
        let mut out = BlockSolve {
            solution: DenseBlock::zeros(n, p),
            residual: DenseBlock::zeros(n, p),
            iterations: 0,
            floor_limited: false,
            final_relative_residual: 0.0,
            seconds: 0.0,
        };
        for c in 0..p {
            let rhs = b.col(c);
            let rec: SolveRecord = match (&self.direct, recycle) {
                (Some(d), _) => d.solve(rhs)?,
                (None, Some(u)) => rcg_solve(&self.op, rhs, None, u, &self.precond, &opts)?,
                (None, None) => cg_solve(&self.op, rhs, &self.precond, &opts)?,
            };
            if !rec.converged {
                return Err(Error::SolverNotConverged {
                    shift: self.op.shift(),
                    iterations: rec.iterations,
                    relative_residual: rec.final_relative_residual,
                });
            }
            out.solution.col_mut(c).copy_from_slice(rec.solution.col(0));
            // A factorization solves exactly up to rounding; its residual is
            // not part of the perturbation being analysed.
            if self.direct.is_none() {
                out.residual.col_mut(c).copy_from_slice(rec.residual.col(0));
            }
            out.iterations += rec.iterations;
            out.floor_limited |= rec.floor_limited;
            out.final_relative_residual =
                out.final_relative_residual.max(rec.final_relative_residual);
            out.seconds += rec.seconds;
        }
        Ok(out)
    }
}

/// Runs the reduction from the initial points `s0`.
pub fn airga_reduce(
    sys: &SecondOrderSystem,
    s0: &ExpansionPointSet,
    opts: &AirgaOptions,
) -> Result<AirgaResult> {
    opts.solver.validate()?;
    let m = sys.f().n_cols();
    if m == 0 || opts.r_max < 2 * m {
        return Err(Error::InvalidArgument(format!(
            "r_max = {} must be at least twice the number of inputs ({m})",
            opts.r_max
        )));
    }
    if opts.r_max > sys.n() {
        return Err(Error::InvalidArgument(format!(
            "r_max = {} exceeds the model order {}",
            opts.r_max,
            sys.n()
        )));
    }
    let ell = s0.len();
    let mut points = s0.points().to_vec();
    let mut trace: Vec<OuterIteration> = Vec::new();
    let mut converged = false;
    let outer_count = match &opts.replay {
        Some(plan) => plan.len(),
        None => opts.max_outer,
    };

    for k in 0..outer_count {
        let replay = opts.replay.as_ref().map(|plan| &plan[k]);
        if let Some(step) = replay {
            points = step.points.clone();
        }
        let mut it = outer_iteration(sys, &points, replay, opts)?;
        if let Some(prev) = trace.last() {
            let change = reduced_change(&prev.reduced, &it.reduced, &opts.grid)?;
            it.change = Some(change);
            converged = change <= opts.outer_tol;
        }
        let (next, padded) = refresh_expansion_points(&it.reduced, ell)?;
        it.next_points = next.points().to_vec();
        it.padded = padded;
        points = it.next_points.clone();
        trace.push(it);
        if converged && opts.replay.is_none() {
            break;
        }
    }
    let reduced = trace
        .last()
        .expect("at least one outer iteration")
        .reduced
        .clone();
    Ok(AirgaResult {
        reduced,
        trace,
        converged,
    })
}

fn outer_iteration(
    sys: &SecondOrderSystem,
    points: &[f64],
    replay: Option<&ReplayStep>,
    opts: &AirgaOptions,
) -> Result<OuterIteration> {
    let cfg = &opts.solver;
    let j_max = match replay {
        Some(step) => step.sigma_indices.len(),
        None => opts.r_max.div_ceil(sys.f().n_cols()),
    };
    if let Some(step) = replay {
        if step.sigma_indices.iter().any(|&i| i >= points.len()) || j_max == 0 {
            return Err(Error::InvalidArgument(
                "replay step does not fit its point set".into(),
            ));
        }
    }

    let solvers = try_map_indexed(points.len(), |i| PointSolver::new(sys, points[i], cfg))?;
    let initial = try_map_indexed(points.len(), |i| solvers[i].solve(sys.f(), None, cfg))?;

    let mut solves: Vec<SolveInfo> = Vec::new();
    // Latest raw solve at each point and the candidate derived from it.
    let mut latest: Vec<SourceSolve> = Vec::with_capacity(points.len());
    let mut cands: Vec<DenseBlock> = Vec::with_capacity(points.len());
    for (i, s) in initial.into_iter().enumerate() {
        solves.push(info(SolveStage::Initial, i, points[i], 0, &s));
        cands.push(householder_qr(&s.solution)?.q);
        latest.push(SourceSolve {
            solution: s.solution,
            residual: s.residual,
            solve_index: i,
        });
    }

    let mut sigma_indices = Vec::new();
    let mut sources: Vec<SourceSolve> = Vec::new();
    let mut blocks: Vec<DenseBlock> = Vec::new();
    let mut previous_temp: Option<ReducedSystem> = None;
    let mut inner_done = false;
    let mut j = 1;
    loop {
        let norms: Vec<f64> = cands.iter().map(DenseBlock::frobenius_norm).collect();
        let sigma = match replay {
            Some(step) => step.sigma_indices[j - 1],
            None => select_sigma(&norms),
        };
        if norms[sigma] < BREAKDOWN_TOL {
            return Err(Error::Breakdown {
                step: j,
                norm: norms[sigma],
            });
        }
        sigma_indices.push(sigma);
        blocks.push(cands[sigma].scaled(1.0 / norms[sigma]));
        sources.push(latest[sigma].clone());

        if j >= j_max {
            break;
        }
        if replay.is_none() {
            let temp = sys.project(
                &householder_qr(&DenseBlock::hstack(&blocks.iter().collect::<Vec<_>>())?)?.q,
            )?;
            if let Some(prev) = &previous_temp {
                if inner_converged(prev, &temp, opts.inner_tol, &opts.grid)? {
                    inner_done = true;
                    break;
                }
            }
            previous_temp = Some(temp);
        }

        let v_j = blocks.last().unwrap();
        let rhs = spmv(sys.m(), v_j)?.scaled(-1.0);
        let recycle = if cfg.mode == SolverMode::Rcg && cfg.recycling_enabled {
            Some(recycle_space(&solvers[sigma].op, &sources)?)
        } else {
            None
        };
        let s = solvers[sigma].solve(&rhs, recycle.as_ref(), cfg)?;
        let recycle_dim = recycle.map_or(0, |u| u.dim());
        solves.push(info(
            SolveStage::Arnoldi { step: j },
            sigma,
            points[sigma],
            recycle_dim,
            &s,
        ));
        cands[sigma] = s.solution.clone();
        latest[sigma] = SourceSolve {
            solution: s.solution,
            residual: s.residual,
            solve_index: solves.len() - 1,
        };
        for cand in cands.iter_mut() {
            for v in &blocks {
                let gamma = trace_inner(v, cand)?;
                cand.axpy(-gamma, v)?;
            }
        }
        j += 1;
    }

    let basis = householder_qr(&DenseBlock::hstack(&blocks.iter().collect::<Vec<_>>())?)?.q;
    let reduced = sys.project(&basis)?;
    Ok(OuterIteration {
        points: points.to_vec(),
        sigma_indices,
        solves,
        sources,
        blocks,
        reduced,
        change: None,
        inner_converged: inner_done,
        next_points: Vec::new(),
        padded: false,
    })
}

/// `U = [η_1 … η_j, Ṽ_1 … Ṽ_j]` for the solve following block `j`.
fn recycle_space(op: &ShiftedOperator, sources: &[SourceSolve]) -> Result<RecycleSpace> {
    let v_tilde: Vec<DenseBlock> = sources
        .iter()
        .map(|s| s.solution.scaled(1.0 / s.solution.frobenius_norm()))
        .collect();
    let mut parts: Vec<&DenseBlock> = sources
        .iter()
        .map(|s| &s.residual)
        .filter(|r| r.frobenius_norm() > 0.0)
        .collect();
    parts.extend(v_tilde.iter());
    build_recycle_space(op, &parts)
}

fn info(
    stage: SolveStage,
    point_index: usize,
    shift: f64,
    recycle_dim: usize,
    s: &BlockSolve,
) -> SolveInfo {
    SolveInfo {
        stage,
        point_index,
        shift,
        iterations: s.iterations,
        floor_limited: s.floor_limited,
        final_relative_residual: s.final_relative_residual,
        recycle_dim,
        seconds: s.seconds,
    }
}
