use airga::linalg::{dot, norm2, CsrMatrix};
use airga::model::{generate, ModelSpec};
use airga::solvers::{
    build_recycle_space, cg_solve, direct_solve, ichol0, rcg_solve, spai_matrix, Preconditioner,
    PreconditionerKind, SolveOptions, SpaiPattern,
};

fn laplacian_operator(n: usize, shift: f64) -> airga::solvers::ShiftedOperator {
    let a = CsrMatrix::linear_combination(&[
        (1.0, &CsrMatrix::tridiagonal(n, -1.0, 2.0, -1.0)),
        (shift, &CsrMatrix::identity(n)),
    ])
    .unwrap();
    airga::solvers::ShiftedOperator::from_matrix(a)
}

#[test]
fn cg_matches_closed_form_laplacian_solution() {
    // 2 x_i - x_{i-1} - x_{i+1} = 0 with x_{n+1} = 0 and load at the last node
    // gives the linear profile x_i = i / (n + 1).
    let n = 64;
    let op = laplacian_operator(n, 0.0);
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let rec = cg_solve(
        &op,
        &b,
        &Preconditioner::identity(),
        &SolveOptions::with_tol(1e-12),
    )
    .unwrap();
    assert!(rec.converged);
    for (i, xi) in rec.solution.col(0).iter().enumerate() {
        assert!((xi - (i + 1) as f64 / (n + 1) as f64).abs() < 1e-10);
    }
    assert!(rec.final_relative_residual <= 1e-12);
}

#[test]
fn cg_agrees_with_direct_on_beam() {
    let sys = generate(&ModelSpec::beam(120)).unwrap();
    let op = sys.shifted(3.0).unwrap();
    let b = sys.f().col(0).to_vec();
    let exact = direct_solve(&op, &b).unwrap();
    let rec = cg_solve(
        &op,
        &b,
        &Preconditioner::identity(),
        &SolveOptions::with_tol(1e-12),
    )
    .unwrap();
    let diff: Vec<f64> = rec
        .solution
        .col(0)
        .iter()
        .zip(exact.solution.col(0))
        .map(|(a, b)| a - b)
        .collect();
    assert!(norm2(&diff) <= 1e-6 * norm2(exact.solution.col(0)));
}

#[test]
fn residual_record_is_true_residual() {
    let op = laplacian_operator(30, 0.5);
    let b: Vec<f64> = (0..30).map(|i| 1.0 + i as f64 * 0.1).collect();
    let rec = cg_solve(
        &op,
        &b,
        &Preconditioner::identity(),
        &SolveOptions::with_tol(1e-6),
    )
    .unwrap();
    let ax = op.matrix().mul_vec(rec.solution.col(0));
    for ((bi, axi), ri) in b.iter().zip(&ax).zip(rec.residual.col(0)) {
        assert!((bi - axi - ri).abs() < 1e-13);
    }
}

#[test]
fn cg_residual_is_orthogonal_to_its_solution() {
    // Galerkin condition: x lies in the Krylov space, r is orthogonal to it.
    let sys = generate(&ModelSpec::synthetic(300, 3)).unwrap();
    let op = sys.shifted(2.0).unwrap();
    let b = sys.f().col(0).to_vec();
    let rec = cg_solve(
        &op,
        &b,
        &Preconditioner::identity(),
        &SolveOptions::with_tol(1e-6),
    )
    .unwrap();
    let (x, r) = (rec.solution.col(0), rec.residual.col(0));
    assert!(dot(x, r).abs() <= 1e-8 * norm2(x) * norm2(r));
}

#[test]
fn rcg_keeps_residual_orthogonal_to_recycle_space() {
    let sys = generate(&ModelSpec::synthetic(300, 4)).unwrap();
    let op = sys.shifted(1.5).unwrap();
    let first = cg_solve(
        &op,
        sys.f().col(0),
        &Preconditioner::identity(),
        &SolveOptions::with_tol(1e-4),
    )
    .unwrap();
    let recycle = build_recycle_space(&op, &[&first.solution, &first.residual]).unwrap();
    let b: Vec<f64> = sys
        .m()
        .mul_vec(first.solution.col(0))
        .iter()
        .map(|v| -v)
        .collect();
    let rec = rcg_solve(
        &op,
        &b,
        None,
        &recycle,
        &Preconditioner::identity(),
        &SolveOptions::with_tol(1e-8),
    )
    .unwrap();
    assert!(rec.converged);
    let r = rec.residual.col(0);
    for u in recycle.basis().columns() {
        assert!(dot(u, r).abs() <= 1e-8 * norm2(r).max(1e-300) * 10.0);
    }
}

#[test]
fn rcg_with_empty_space_is_cg() {
    let op = laplacian_operator(50, 0.1);
    let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
    let opts = SolveOptions::with_tol(1e-10);
    let a = cg_solve(&op, &b, &Preconditioner::identity(), &opts).unwrap();
    let empty = build_recycle_space(&op, &[]).unwrap();
    let c = rcg_solve(&op, &b, None, &empty, &Preconditioner::identity(), &opts).unwrap();
    assert_eq!(a.solution, c.solution);
    assert_eq!(a.iterations, c.iterations);
}

#[test]
fn ichol_of_tridiagonal_is_exact() {
    // Zero fill loses nothing on a tridiagonal matrix, so one iteration suffices.
    let op = laplacian_operator(200, 0.01);
    let pc = ichol0(op.matrix()).unwrap();
    let b = vec![1.0; 200];
    let rec = cg_solve(&op, &b, &pc, &SolveOptions::with_tol(1e-10)).unwrap();
    assert!(rec.converged && rec.iterations <= 2);
}

#[test]
fn spai_diagonal_pattern_is_inverse_diagonal_scaling() {
    // Column j of argmin ‖A m_j − e_j‖ with m_j = c e_j gives c = a_jj / ‖A e_j‖².
    let a = CsrMatrix::tridiagonal(10, -1.0, 4.0, -1.0);
    let m = spai_matrix(&a, SpaiPattern::Diagonal).unwrap();
    for j in 0..10 {
        let col = a.to_dense();
        let col_norm2: f64 = col.col(j).iter().map(|v| v * v).sum();
        assert!((m.get(j, j) - 4.0 / col_norm2).abs() < 1e-14);
    }
}

#[test]
fn preconditioners_reduce_iterations_on_beam() {
    let sys = generate(&ModelSpec::beam(400)).unwrap();
    let op = sys.shifted(1.0).unwrap();
    let b = sys.f().col(0).to_vec();
    let opts = SolveOptions::with_tol(1e-8);
    let count = |kind| {
        let pc = Preconditioner::build(kind, op.matrix()).unwrap();
        cg_solve(&op, &b, &pc, &opts).unwrap().iterations
    };
    let none = count(PreconditionerKind::None);
    assert!(count(PreconditionerKind::Ichol0) < none);
    assert!(count(PreconditionerKind::Spai) < none);
}

#[test]
fn direct_solution_has_tiny_residual() {
    let sys = generate(&ModelSpec::synthetic(200, 9)).unwrap();
    let op = sys.shifted(10.0).unwrap();
    let rec = direct_solve(&op, sys.f().col(0)).unwrap();
    assert!(rec.final_relative_residual < 1e-13);
}
