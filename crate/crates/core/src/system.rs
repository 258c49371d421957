//! Full-order and reduced second-order systems
//! `M q'' + D q' + K q = F u`, `y = Cp q + Cv q'`.

use crate::error::{Error, Result};
use crate::linalg::{spmv, CsrMatrix, DenseBlock, LdlSymbolic, SparseLdl};
use crate::solvers::{DirectSolver, ShiftedOperator};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

/// Dense complex matrix used for frequency-domain values.
pub type CMat = DMatrix<Complex64>;

const SYMMETRY_TOL: f64 = 1e-12;
const DAMPING_TOL: f64 = 1e-12;

/// Result of a largest-singular-value estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    /// The iterative estimate did not settle within its iteration budget.
    pub degraded: bool,
}

/// Anything with a transfer function `H(s) = (Cp + sCv)(s²M + sD + K)⁻¹F`.
pub trait TransferModel: Sync {
    fn order(&self) -> usize;
    fn inputs(&self) -> usize;
    fn outputs(&self) -> usize;
    /// `H(s)`, `q × m`.
    fn transfer(&self, s: Complex64) -> Result<CMat>;
    /// `L(s)⁻¹F`, `n × m`.
    fn state_response(&self, s: Complex64) -> Result<CMat>;
    /// `L(s)⁻ᵀ C(s)ᵀ`, `n × q`; its Frobenius norm equals that of `C(s)L(s)⁻¹`.
    fn output_response(&self, s: Complex64) -> Result<CMat>;
    /// `‖L(s)⁻¹‖₂`.
    fn inverse_norm(&self, s: Complex64) -> Result<NormEstimate>;
    /// Taylor coefficients of `L(s)⁻¹F` at real `s0` (see [`crate::transfer::moments`]).
    fn moments(&self, s0: f64, count: usize) -> Result<Vec<DenseBlock>>;
}

fn to_complex(b: &DenseBlock) -> CMat {
    CMat::from_fn(b.n_rows(), b.n_cols(), |i, j| {
        Complex64::new(b[(i, j)], 0.0)
    })
}

fn check_block(b: &DenseBlock, shape: (usize, usize), what: &'static str) -> Result<()> {
    if b.shape() != shape {
        return Err(Error::dims(shape, b.shape(), what));
    }
    Ok(())
}

/// Three-term moment recurrence shared by full and reduced systems.
///
/// `X⁰ = L⁻¹F`, `X¹ = -L⁻¹(2s₀M + D)X⁰`,
/// `Xʲ = -L⁻¹((2s₀M + D)Xʲ⁻¹ + M Xʲ⁻²)`.
fn moment_recurrence(
    count: usize,
    s0: f64,
    f: &DenseBlock,
    apply_m: impl Fn(&DenseBlock) -> Result<DenseBlock>,
    apply_d: impl Fn(&DenseBlock) -> Result<DenseBlock>,
    solve: impl Fn(&DenseBlock) -> Result<DenseBlock>,
) -> Result<Vec<DenseBlock>> {
    let mut out: Vec<DenseBlock> = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    out.push(solve(f)?);
    for j in 1..count {
        let prev = &out[j - 1];
        let mut rhs = apply_m(prev)?.scaled(2.0 * s0);
        rhs.axpy(1.0, &apply_d(prev)?)?;
        if j >= 2 {
            rhs.axpy(1.0, &apply_m(&out[j - 2])?)?;
        }
        let mut x = solve(&rhs)?;
        x.scale(-1.0);
        out.push(x);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Pencil {
    symbolic: LdlSymbolic,
    m: Vec<f64>,
    d: Vec<f64>,
    k: Vec<f64>,
}

/// Full-order system with sparse `M, D, K`.
#[derive(Debug, Clone)]
pub struct SecondOrderSystem {
    m: CsrMatrix,
    d: CsrMatrix,
    k: CsrMatrix,
    f: DenseBlock,
    cp: DenseBlock,
    cv: DenseBlock,
    alpha: f64,
    beta: f64,
    damping_consistent: bool,
    pencil: OnceLock<Pencil>,
}

impl SecondOrderSystem {
    /// Validates shapes and symmetry. Whether `D = αM + βK` holds is recorded
    /// (see [`Self::damping_consistent`]) rather than enforced.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: CsrMatrix,
        d: CsrMatrix,
        k: CsrMatrix,
        f: DenseBlock,
        cp: DenseBlock,
        cv: DenseBlock,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let n = k.n_rows();
        for (a, what) in [
            (&m, "mass matrix"),
            (&d, "damping matrix"),
            (&k, "stiffness matrix"),
        ] {
            if a.shape() != (n, n) {
                return Err(Error::dims((n, n), a.shape(), what));
            }
        }
        if f.n_rows() != n {
            return Err(Error::dims((n, f.n_cols()), f.shape(), "input matrix"));
        }
        if cp.n_cols() != n {
            return Err(Error::dims(
                (cp.n_rows(), n),
                cp.shape(),
                "position output matrix",
            ));
        }
        check_block(&cv, cp.shape(), "velocity output matrix")?;
        if !m.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidArgument(
                "mass matrix is not symmetric".into(),
            ));
        }
        if !k.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidArgument(
                "stiffness matrix is not symmetric".into(),
            ));
        }
        if !d.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidArgument(
                "damping matrix is not symmetric".into(),
            ));
        }
        let expected = CsrMatrix::linear_combination(&[(alpha, &m), (beta, &k)])?;
        let diff = CsrMatrix::linear_combination(&[(1.0, &d), (-1.0, &expected)])?;
        let scale = d.frobenius_norm().max(expected.frobenius_norm());
        let damping_consistent =
            diff.frobenius_norm() <= DAMPING_TOL * scale.max(f64::MIN_POSITIVE);
        Ok(Self {
            m,
            d,
            k,
            f,
            cp,
            cv,
            alpha,
            beta,
            damping_consistent,
            pencil: OnceLock::new(),
        })
    }

    /// Builds the system with `D = αM + βK`.
    pub fn proportional(
        m: CsrMatrix,
        k: CsrMatrix,
        f: DenseBlock,
        cp: DenseBlock,
        cv: DenseBlock,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let d = CsrMatrix::linear_combination(&[(alpha, &m), (beta, &k)])?;
        Self::new(m, d, k, f, cp, cv, alpha, beta)
    }

    pub fn n(&self) -> usize {
        self.k.n_rows()
    }
    pub fn m(&self) -> &CsrMatrix {
        &self.m
    }
    pub fn d(&self) -> &CsrMatrix {
        &self.d
    }
    pub fn k(&self) -> &CsrMatrix {
        &self.k
    }
    pub fn f(&self) -> &DenseBlock {
        &self.f
    }
    pub fn cp(&self) -> &DenseBlock {
        &self.cp
    }
    pub fn cv(&self) -> &DenseBlock {
        &self.cv
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `D = αM + βK` to `1e-12` relative.
    pub fn damping_consistent(&self) -> bool {
        self.damping_consistent
    }

    pub fn shifted(&self, s: f64) -> Result<ShiftedOperator> {
        ShiftedOperator::new(&self.m, &self.d, &self.k, s)
    }

    /// Galerkin projection onto the orthonormal columns of `v`.
    pub fn project(&self, v: &DenseBlock) -> Result<ReducedSystem> {
        if v.n_rows() != self.n() {
            return Err(Error::dims(
                (self.n(), v.n_cols()),
                v.shape(),
                "projection basis",
            ));
        }
        let sym = |a: &CsrMatrix| -> Result<DenseBlock> {
            let mut p = v.tr_matmul(&spmv(a, v)?)?;
            let r = p.n_rows();
            for i in 0..r {
                for j in i + 1..r {
                    let s = 0.5 * (p[(i, j)] + p[(j, i)]);
                    p[(i, j)] = s;
                    p[(j, i)] = s;
                }
            }
            Ok(p)
        };
        Ok(ReducedSystem {
            m_hat: sym(&self.m)?,
            d_hat: sym(&self.d)?,
            k_hat: sym(&self.k)?,
            f_hat: v.tr_matmul(&self.f)?,
            cp_hat: self.cp.matmul(v)?,
            cv_hat: self.cv.matmul(v)?,
            basis_v: v.clone(),
        })
    }

    fn pencil(&self) -> &Pencil {
        self.pencil.get_or_init(|| {
            let pattern =
                CsrMatrix::linear_combination(&[(1.0, &self.m), (1.0, &self.d), (1.0, &self.k)])
                    .expect("blocks share a validated shape");
            let symbolic = LdlSymbolic::analyze(&pattern).expect("pattern is square");
            Pencil {
                m: self.m.values_on_pattern(&pattern),
                d: self.d.values_on_pattern(&pattern),
                k: self.k.values_on_pattern(&pattern),
                symbolic,
            }
        })
    }

    /// Complex symmetric `LDLᵀ` of `L(s)`.
    pub fn factor_pencil(&self, s: Complex64) -> Result<SparseLdl<Complex64>> {
        let p = self.pencil();
        let s2 = s * s;
        let vals: Vec<Complex64> = (0..p.k.len())
            .map(|t| s2 * p.m[t] + s * p.d[t] + p.k[t])
            .collect();
        p.symbolic
            .factor(&vals)
            .map_err(|_| Error::Singular(format!("pencil singular at s = {s}")))
    }

    fn output_at(&self, s: Complex64) -> CMat {
        CMat::from_fn(self.cp.n_rows(), self.n(), |i, j| {
            self.cp[(i, j)] + s * self.cv[(i, j)]
        })
    }

    fn solve_block(ldl: &SparseLdl<Complex64>, rhs: &CMat) -> CMat {
        let mut out = rhs.clone();
        for j in 0..rhs.ncols() {
            let col: Vec<Complex64> = rhs.column(j).iter().copied().collect();
            let x = ldl.solve(&col);
            out.column_mut(j)
                .iter_mut()
                .zip(x)
                .for_each(|(o, v)| *o = v);
        }
        out
    }
}

impl TransferModel for SecondOrderSystem {
    fn order(&self) -> usize {
        self.n()
    }
    fn inputs(&self) -> usize {
        self.f.n_cols()
    }
    fn outputs(&self) -> usize {
        self.cp.n_rows()
    }

    fn transfer(&self, s: Complex64) -> Result<CMat> {
        let x = self.state_response(s)?;
        Ok(self.output_at(s) * x)
    }

    fn state_response(&self, s: Complex64) -> Result<CMat> {
        let ldl = self.factor_pencil(s)?;
        Ok(Self::solve_block(&ldl, &to_complex(&self.f)))
    }

    fn output_response(&self, s: Complex64) -> Result<CMat> {
        let ldl = self.factor_pencil(s)?;
        Ok(Self::solve_block(&ldl, &self.output_at(s).transpose()))
    }

    /// Largest eigenvalue of `B = (LᴴL)⁻¹` by restarted Lanczos (a Krylov
    /// accelerated inverse power iteration). `Lᴴ = conj(L)` for the complex
    /// symmetric pencil, so both solves per step reuse one factorization.
    fn inverse_norm(&self, s: Complex64) -> Result<NormEstimate> {
        let ldl = self.factor_pencil(s)?;
        let apply = |v: &[Complex64]| -> Vec<Complex64> {
            let w: Vec<Complex64> = ldl.solve(v).into_iter().map(|c| c.conj()).collect();
            ldl.solve(&w).into_iter().map(|c| c.conj()).collect()
        };
        let (lambda, degraded) = lanczos_max_eig(self.n(), apply);
        Ok(NormEstimate {
            value: lambda.sqrt(),
            degraded,
        })
    }

    fn moments(&self, s0: f64, count: usize) -> Result<Vec<DenseBlock>> {
        let op = self.shifted(s0)?;
        let solver = DirectSolver::new(&op)?;
        moment_recurrence(
            count,
            s0,
            &self.f,
            |x| spmv(&self.m, x),
            |x| spmv(&self.d, x),
            |b| {
                let cols: Result<Vec<Vec<f64>>> = b
                    .columns()
                    .map(|c| solver.solve(c).map(|r| r.solution.into_values()))
                    .collect();
                DenseBlock::from_columns(&cols?)
            },
        )
    }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest eigenvalue of a Hermitian positive definite operator given only
/// its action. Returns the estimate and whether it is of degraded accuracy.
pub(crate) fn lanczos_max_eig(
    n: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
) -> (f64, bool) {
    const CYCLES: usize = 10;
    const EXTRA_CYCLES: usize = 1;
    const TOL: f64 = 1e-8;
    let steps = n.clamp(1, 24);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1dea);
    let mut start: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(0.5..1.5), 0.0))
        .collect();
    let mut theta = 0.0;
    for cycle in 0..CYCLES + EXTRA_CYCLES {
        let nv = cnorm(&start);
        let mut basis: Vec<Vec<Complex64>> = vec![start.iter().map(|c| c / nv).collect()];
        let mut alphas = Vec::with_capacity(steps);
        let mut betas: Vec<f64> = Vec::with_capacity(steps);
        let mut tail = 0.0;
        for j in 0..steps {
            let mut w = apply(&basis[j]);
            let a = cdot(&basis[j], &w).re;
            alphas.push(a);
            // Full reorthogonalization, applied twice.
            for _ in 0..2 {
                for q in &basis {
                    let h = cdot(q, &w);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= h * qi);
                }
            }
            let b = cnorm(&w);
            tail = b;
            if j + 1 == steps || b <= 1e-14 * a.abs() {
                break;
            }
            betas.push(b);
            basis.push(w.iter().map(|c| c / b).collect());
        }
        let k = alphas.len();
        let t = DMatrix::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (idx, &top) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one Lanczos step");
        theta = top;
        let y = eig.eigenvectors.column(idx);
        let residual = tail * y[k - 1].abs();
        if residual <= TOL * theta || k < steps {
            return (theta, cycle >= CYCLES);
        }
        start = vec![Complex64::new(0.0, 0.0); n];
        for (q, &c) in basis.iter().zip(y.iter()) {
            start.iter_mut().zip(q).for_each(|(s, qi)| *s += c * qi);
        }
    }
    (theta, true)
}

/// Projected system `(VᵀMV, VᵀDV, VᵀKV, VᵀF, CpV, CvV)` plus the basis `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub m_hat: DenseBlock,
    pub d_hat: DenseBlock,
    pub k_hat: DenseBlock,
    pub f_hat: DenseBlock,
    pub cp_hat: DenseBlock,
    pub cv_hat: DenseBlock,
    pub basis_v: DenseBlock,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.m_hat.n_rows()
    }

    fn pencil_at(&self, s: Complex64) -> CMat {
        let r = self.dim();
        CMat::from_fn(r, r, |i, j| {
            s * s * self.m_hat[(i, j)] + s * self.d_hat[(i, j)] + self.k_hat[(i, j)]
        })
    }

    fn lu_at(&self, s: Complex64) -> Result<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
        let l = self.pencil_at(s);
        let scale = l.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let lu = l.lu();
        let r = self.dim();
        let pivot_min = (0..r)
            .map(|i| lu.u()[(i, i)].norm())
            .fold(f64::INFINITY, f64::min);
        if r > 0 && !(pivot_min > 1e-14 * scale) {
            return Err(Error::Singular(format!(
                "reduced pencil singular at s = {s}"
            )));
        }
        Ok(lu)
    }

    fn output_at(&self, s: Complex64) -> CMat {
        CMat::from_fn(self.cp_hat.n_rows(), self.dim(), |i, j| {
            self.cp_hat[(i, j)] + s * self.cv_hat[(i, j)]
        })
    }

    fn solve(
        &self,
        lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
        rhs: &CMat,
    ) -> Result<CMat> {
        lu.solve(rhs)
            .ok_or_else(|| Error::Singular("reduced pencil".into()))
    }
}

impl TransferModel for ReducedSystem {
    fn order(&self) -> usize {
        self.dim()
    }
    fn inputs(&self) -> usize {
        self.f_hat.n_cols()
    }
    fn outputs(&self) -> usize {
        self.cp_hat.n_rows()
    }

    fn transfer(&self, s: Complex64) -> Result<CMat> {
        Ok(self.output_at(s) * self.state_response(s)?)
    }

    fn state_response(&self, s: Complex64) -> Result<CMat> {
        let lu = self.lu_at(s)?;
        self.solve(&lu, &to_complex(&self.f_hat))
    }

    fn output_response(&self, s: Complex64) -> Result<CMat> {
        let lu = self.lu_at(s)?;
        self.solve(&lu, &self.output_at(s).transpose())
    }

    fn inverse_norm(&self, s: Complex64) -> Result<NormEstimate> {
        let lu = self.lu_at(s)?;
        let inv = self.solve(&lu, &CMat::identity(self.dim(), self.dim()))?;
        let value = inv.singular_values().iter().fold(0.0f64, |m, &v| m.max(v));
        Ok(NormEstimate {
            value,
            degraded: false,
        })
    }

    fn moments(&self, s0: f64, count: usize) -> Result<Vec<DenseBlock>> {
        let r = self.dim();
        let l = DenseBlock::from_col_major(
            r,
            r,
            (0..r * r)
                .map(|t| {
                    let (i, j) = (t % r, t / r);
                    s0 * s0 * self.m_hat[(i, j)] + s0 * self.d_hat[(i, j)] + self.k_hat[(i, j)]
                })
                .collect(),
        )?;
        let lu = l.to_nalgebra().lu();
        moment_recurrence(
            count,
            s0,
            &self.f_hat,
            |x| self.m_hat.matmul(x),
            |x| self.d_hat.matmul(x),
            |b| {
                lu.solve(&b.to_nalgebra())
                    .map(|x| DenseBlock::from_nalgebra(&x))
                    .ok_or_else(|| Error::Singular(format!("reduced pencil singular at s = {s0}")))
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn oscillator(m: f64, d: f64, k: f64) -> SecondOrderSystem {
        let one = |v: f64| CsrMatrix::from_diagonal(&[v]);
        SecondOrderSystem::new(
            one(m),
            one(d),
            one(k),
            DenseBlock::identity(1),
            DenseBlock::identity(1),
            DenseBlock::zeros(1, 1),
            0.0,
            d / k,
        )
        .unwrap()
    }

    #[test]
    fn oscillator_transfer_values() {
        let sys = oscillator(1.0, 1.0, 1.0);
        let h0 = sys.transfer(Complex64::new(0.0, 0.0)).unwrap();
        assert!((h0[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        // 1 / (-1 + i + 1) = -i
        let hi = sys.transfer(Complex64::new(0.0, 1.0)).unwrap();
        assert!((hi[(0, 0)] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn oscillator_moments_by_hand() {
        // m = k = 1, d = 0, s0 = 0: P1 = 0, P2 = -1, Q = 1.
        let sys = oscillator(1.0, 0.0, 1.0);
        let mo = sys.moments(0.0, 3).unwrap();
        assert_eq!(mo[0][(0, 0)], 1.0);
        assert_eq!(mo[1][(0, 0)], 0.0);
        assert_eq!(mo[2][(0, 0)], -1.0);
    }

    #[test]
    fn inverse_norm_of_diagonal_pencil() {
        let sys = oscillator(1.0, 1.0, 1.0);
        let s = Complex64::new(0.0, 0.5f64.sqrt());
        let est = sys.inverse_norm(s).unwrap();
        assert!((est.value - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!(!est.degraded);
    }

    #[test]
    fn identity_projection_reproduces_system() {
        let n = 5;
        let k = CsrMatrix::tridiagonal(n, -1.0, 2.0, -1.0);
        let m = CsrMatrix::identity(n);
        let mut f = DenseBlock::zeros(n, 1);
        f[(n - 1, 0)] = 1.0;
        let mut cp = DenseBlock::zeros(1, n);
        cp[(0, 0)] = 1.0;
        let sys = SecondOrderSystem::proportional(m, k, f, cp, DenseBlock::zeros(1, n), 0.1, 0.1)
            .unwrap();
        assert!(sys.damping_consistent());
        let red = sys.project(&DenseBlock::identity(n)).unwrap();
        for w in [0.1, 1.0, 10.0] {
            let s = Complex64::new(0.0, w);
            let a = sys.transfer(s).unwrap()[(0, 0)];
            let b = red.transfer(s).unwrap()[(0, 0)];
            assert!((a - b).norm() <= 1e-13 * a.norm());
            let na = sys.inverse_norm(s).unwrap().value;
            let nb = red.inverse_norm(s).unwrap().value;
            assert!((na - nb).abs() <= 1e-8 * nb, "{na} vs {nb}");
        }
    }

    #[test]
    fn inconsistent_damping_is_flagged() {
        let one = |v: f64| CsrMatrix::from_diagonal(&[v]);
        let sys = SecondOrderSystem::new(
            one(1.0),
            one(0.5),
            one(1.0),
            DenseBlock::identity(1),
            DenseBlock::identity(1),
            DenseBlock::zeros(1, 1),
            0.1,
            0.1,
        )
        .unwrap();
        assert!(!sys.damping_consistent());
    }

    #[test]
    fn asymmetric_stiffness_rejected() {
        let k = CsrMatrix::from_dense(&DenseBlock::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]), 0.0);
        let m = CsrMatrix::identity(2);
        let r = SecondOrderSystem::proportional(
            m,
            k,
            DenseBlock::zeros(2, 1),
            DenseBlock::zeros(1, 2),
            DenseBlock::zeros(1, 2),
            0.1,
            0.1,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
