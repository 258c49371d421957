use airga::airga::{points_from_eigenvalues, select_sigma};
use airga::diagnostics::PerturbationFactors;
use airga::linalg::{householder_qr, trace_inner, CooBuilder, CsrMatrix, DenseBlock};
use airga::parallel::pairwise_sum;
use airga::solvers::{cg_solve, Preconditioner, ShiftedOperator, SolveOptions};
use num_complex::Complex64;
use proptest::prelude::*;

fn block(n: usize, p: usize) -> impl Strategy<Value = DenseBlock> {
    prop::collection::vec(-1.0f64..1.0, n * p)
        .prop_map(move |v| DenseBlock::from_col_major(n, p, v).unwrap())
}

fn spd(n: usize) -> impl Strategy<Value = CsrMatrix> {
    prop::collection::vec((0..n, 0..n, -1.0f64..1.0), 0..3 * n).prop_map(move |entries| {
        // Symmetric, strictly diagonally dominant with positive diagonal.
        let mut coo = CooBuilder::new(n, n);
        let mut row_sums = vec![0.0; n];
        for (i, j, v) in entries {
            if i != j {
                coo.push(i, j, v).unwrap();
                coo.push(j, i, v).unwrap();
                row_sums[i] += v.abs();
                row_sums[j] += v.abs();
            }
        }
        for (i, s) in row_sums.iter().enumerate() {
            coo.push(i, i, s + 1.0).unwrap();
        }
        coo.build()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qr_factors_reproduce_input(x in block(12, 4)) {
        if let Ok(qr) = householder_qr(&x) {
            let back = qr.q.matmul(&qr.r).unwrap();
            prop_assert!(back.sub(&x).unwrap().max_abs() <= 1e-13);
            let gram = qr.q.tr_matmul(&qr.q).unwrap();
            prop_assert!(gram.sub(&DenseBlock::identity(4)).unwrap().max_abs() <= 1e-13);
        }
    }

    #[test]
    fn trace_inner_is_symmetric_and_bounded(a in block(6, 3), b in block(6, 3)) {
        let ab = trace_inner(&a, &b).unwrap();
        prop_assert_eq!(ab, trace_inner(&b, &a).unwrap());
        prop_assert!(ab.abs() <= a.frobenius_norm() * b.frobenius_norm() * (1.0 + 1e-14));
    }

    #[test]
    fn cg_reaches_tolerance_on_spd(a in spd(25), b in prop::collection::vec(-1.0f64..1.0, 25)) {
        prop_assume!(b.iter().any(|v| *v != 0.0));
        let op = ShiftedOperator::from_matrix(a);
        let rec = cg_solve(&op, &b, &Preconditioner::identity(), &SolveOptions::with_tol(1e-10)).unwrap();
        prop_assert!(rec.converged);
        prop_assert!(rec.final_relative_residual <= 1e-10 || rec.floor_limited);
    }

    #[test]
    fn perturbation_maps_stack_onto_residuals(x in block(20, 3), eta in block(20, 3)) {
        if let Ok(f) = PerturbationFactors::new(eta.clone(), x.clone()) {
            let cond = x.frobenius_norm() * f.x_pinv.frobenius_norm();
            prop_assert!(f.defect().unwrap() <= 1e-13 * cond * eta.frobenius_norm().max(1.0));
            let (z2, zf) = f.z_norms().unwrap();
            prop_assert!(z2 <= zf * (1.0 + 1e-12));
            prop_assert!(zf <= eta.frobenius_norm() * f.x_pinv.frobenius_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sigma_is_a_maximizer(norms in prop::collection::vec(0.0f64..10.0, 1..8)) {
        let i = select_sigma(&norms);
        let max = norms.iter().cloned().fold(0.0, f64::max);
        prop_assert!(norms[i] >= max * (1.0 - 1e-12));
        prop_assert!(norms[..i].iter().all(|&v| v < max * (1.0 - 1e-12)));
    }

    #[test]
    fn refreshed_points_are_sorted_positive_and_distinct(
        eigs in prop::collection::vec((-50.0f64..-1e-3, -50.0f64..50.0), 1..10),
        count in 1usize..5,
    ) {
        let eigs: Vec<Complex64> = eigs.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        let (set, _) = points_from_eigenvalues(&eigs, count).unwrap();
        prop_assert_eq!(set.len(), count);
        let pts = set.points();
        prop_assert!(pts.iter().all(|&p| p > 0.0 && p.is_finite()));
        prop_assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pairwise_sum_matches_naive_sum(x in prop::collection::vec(-1e3f64..1e3, 0..200)) {
        let naive: f64 = x.iter().sum();
        let scale: f64 = x.iter().map(|v| v.abs()).sum();
        prop_assert!((pairwise_sum(&x) - naive).abs() <= 1e-12 * scale.max(1.0));
    }
}
