use super::{Preconditioner, RecycleSpace, ShiftedOperator, SolveRecord};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, DenseBlock, DenseCholesky};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop once `‖b - A x‖ ≤ rel_tol · ‖b‖`.
    pub rel_tol: f64,
    /// Iteration cap; `None` means `10 n`.
    pub max_iter: Option<usize>,
    /// Keep the normalized preconditioned residuals that generate the search space.
    pub keep_basis: bool,
    /// How many times the recurrence residual may be replaced by the true
    /// residual before giving up.
    pub max_replacements: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: None,
            keep_basis: false,
            max_replacements: 5,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

/// Preconditioned CG from a zero initial guess.
pub fn cg_solve(
    op: &ShiftedOperator,
    b: &[f64],
    precond: &Preconditioner,
    opts: &SolveOptions,
) -> Result<SolveRecord> {
    let empty = RecycleSpace::empty(op.dim());
    deflated_pcg(op, b, None, &empty, precond, opts)
}

/// CG deflated by `recycle`, started from the Galerkin projection of
/// `x_init` (zero when absent) onto `span(U)`.
///
/// With an empty recycle space this performs exactly the same floating-point
/// operations as [`cg_solve`].
pub fn rcg_solve(
    op: &ShiftedOperator,
    b: &[f64],
    x_init: Option<&[f64]>,
    recycle: &RecycleSpace,
    precond: &Preconditioner,
    opts: &SolveOptions,
) -> Result<SolveRecord> {
    if recycle.basis().n_rows() != op.dim() {
        return Err(Error::dims(
            (op.dim(), op.dim()),
            recycle.basis().shape(),
            "recycle space vs operator",
        ));
    }
    deflated_pcg(op, b, x_init, recycle, precond, opts)
}

fn true_residual(op: &ShiftedOperator, b: &[f64], x: &[f64], r: &mut [f64]) {
    op.matrix().residual_into(b, x, r);
}

/// Smallest relative residual attainable by a stored iterate: rounding `x`
/// to working precision moves `b - A x` by about
/// `(nnz_row + 1) ε ‖ |A||x| + |b| ‖ / ‖b‖`.
fn residual_floor(op: &ShiftedOperator, b: &[f64], x: &[f64], bnorm: f64) -> f64 {
    let ax = op.matrix().abs_mul_vec(x);
    let s: Vec<f64> = ax.iter().zip(b).map(|(a, bi)| a + bi.abs()).collect();
    (op.matrix().max_row_nnz() + 1) as f64 * f64::EPSILON * norm2(&s) / bnorm
}

fn deflation_ratio(recycle: &RecycleSpace, r: &[f64]) -> f64 {
    let rn = norm2(r);
    if rn == 0.0 {
        0.0
    } else {
        norm2(&recycle.project(r)) / rn
    }
}

fn push_normalized(basis: &mut Option<Vec<Vec<f64>>>, z: &[f64]) {
    if let Some(b) = basis {
        let nz = norm2(z);
        if nz > 0.0 {
            b.push(z.iter().map(|v| v / nz).collect());
        }
    }
}

/// Final Ritz-Galerkin step on `span([U, x])` against the recomputed residual.
///
/// In floating point the recurrences only keep the residual orthogonal to
/// recent search directions; this restores `Uᵀr = 0` and `xᵀr = 0` to working
/// precision. Leaves `rt` holding the true residual of the returned `x`. The
/// step is discarded if it would push the residual above both its previous
/// value and `accept`.
fn galerkin_refine(
    op: &ShiftedOperator,
    b: &[f64],
    x: &mut Vec<f64>,
    rt: &mut [f64],
    recycle: &RecycleSpace,
    accept: f64,
) {
    true_residual(op, b, x, rt);
    let xnorm = norm2(x);
    if xnorm == 0.0 {
        return;
    }
    let mut w = x.clone();
    for _ in 0..2 {
        for c in recycle.basis().columns() {
            let d = dot(c, &w);
            axpy(-d, c, &mut w);
        }
    }
    let wnorm = norm2(&w);
    let mut cols: Vec<&[f64]> = recycle.basis().columns().collect();
    let mut applied: Vec<&[f64]> = recycle.applied_basis().columns().collect();
    let mut aw = vec![0.0; x.len()];
    if wnorm > 1e-8 * xnorm {
        w.iter_mut().for_each(|v| *v /= wnorm);
        op.apply(&w, &mut aw);
        cols.push(&w);
        applied.push(&aw);
    }
    let k = cols.len();
    if k == 0 {
        return;
    }
    let mut g = DenseBlock::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = 0.5 * (dot(cols[i], applied[j]) + dot(cols[j], applied[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let Ok(chol) = DenseCholesky::factor(&g) else {
        return;
    };
    let mut y: Vec<f64> = cols.iter().map(|c| dot(c, rt)).collect();
    chol.solve_in_place(&mut y);
    let mut candidate = x.clone();
    for (c, yi) in cols.iter().zip(&y) {
        axpy(*yi, c, &mut candidate);
    }
    let mut r_new = vec![0.0; x.len()];
    true_residual(op, b, &candidate, &mut r_new);
    let (old, new) = (norm2(rt), norm2(&r_new));
    if new <= old.max(accept) {
        *x = candidate;
        rt.copy_from_slice(&r_new);
    }
}

fn deflated_pcg(
    op: &ShiftedOperator,
    b: &[f64],
    x_init: Option<&[f64]>,
    recycle: &RecycleSpace,
    precond: &Preconditioner,
    opts: &SolveOptions,
) -> Result<SolveRecord> {
    let start = Instant::now();
    let n = op.dim();
    if b.len() != n {
        return Err(Error::dims((n, n), (b.len(), 1), "right-hand side"));
    }
    if let Some(x0) = x_init {
        if x0.len() != n {
            return Err(Error::dims((n, n), (x0.len(), 1), "initial guess"));
        }
    }
    let deflating = !recycle.is_empty();
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let tol = opts.rel_tol;
    let bnorm = norm2(b);
    let mut basis = opts.keep_basis.then(Vec::new);

    if bnorm == 0.0 {
        return Ok(SolveRecord {
            solution: DenseBlock::zeros(n, 1),
            residual: DenseBlock::zeros(n, 1),
            iterations: 0,
            converged: true,
            relative_residual_history: vec![0.0],
            final_relative_residual: 0.0,
            floor_limited: false,
            deflation_history: if deflating { vec![0.0] } else { Vec::new() },
            krylov_basis: basis,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let mut x = x_init.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    true_residual(op, b, &x, &mut r);
    recycle.correct(&mut x, &mut r);

    let mut history = vec![norm2(&r) / bnorm];
    let mut deflation_history = Vec::new();
    if deflating {
        deflation_history.push(deflation_ratio(recycle, &r));
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    recycle.deflate_direction(&mut p);
    let mut rz = dot(&r, &z);
    push_normalized(&mut basis, &z);

    let mut q = vec![0.0; n];
    let mut rt = vec![0.0; n];
    let mut recurrence = history[0];
    let mut iterations = 0;
    let mut replacements = 0;
    let mut converged = false;
    let mut floor_limited = false;

    loop {
        if recurrence <= tol {
            true_residual(op, b, &x, &mut rt);
            let tr = norm2(&rt) / bnorm;
            if tr <= tol {
                converged = true;
                break;
            }
            if tr <= 10.0 * residual_floor(op, b, &x, bnorm) {
                converged = true;
                floor_limited = true;
                break;
            }
            if replacements >= opts.max_replacements {
                break;
            }
            // Residual replacement: restart from the true residual.
            replacements += 1;
            r.copy_from_slice(&rt);
            recycle.correct(&mut x, &mut r);
            precond.apply(&r, &mut z);
            p.copy_from_slice(&z);
            recycle.deflate_direction(&mut p);
            rz = dot(&r, &z);
            recurrence = norm2(&r) / bnorm;
            push_normalized(&mut basis, &z);
            continue;
        }
        if iterations >= max_iter {
            break;
        }
        op.apply(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(Error::OperatorNotSpd {
                iteration: iterations,
                curvature,
            });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        if deflating {
            recycle.correct(&mut x, &mut r);
        }
        iterations += 1;
        recurrence = norm2(&r) / bnorm;
        history.push(recurrence);
        if deflating {
            deflation_history.push(deflation_ratio(recycle, &r));
        }

        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        if rz_new < 0.0 {
            return Err(Error::PreconditionerNotSpd { value: rz_new });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        let mut w = z.clone();
        recycle.deflate_direction(&mut w);
        p.iter_mut()
            .zip(&w)
            .for_each(|(pi, wi)| *pi = wi + beta * *pi);
        push_normalized(&mut basis, &z);
    }

    galerkin_refine(op, b, &mut x, &mut rt, recycle, tol * bnorm);
    let final_relative_residual = norm2(&rt) / bnorm;
    if converged && !floor_limited && final_relative_residual > tol {
        floor_limited = true;
    }
    Ok(SolveRecord {
        solution: DenseBlock::column_vector(&x),
        residual: DenseBlock::column_vector(&rt),
        iterations,
        converged,
        relative_residual_history: history,
        final_relative_residual,
        floor_limited,
        deflation_history,
        krylov_basis: basis,
        seconds: start.elapsed().as_secs_f64(),
    })
}
