//! Maximizers of the generalized Rayleigh quotient `xᴴAx / xᴴ(B + σ²I)x`.
//!
//! Solvers are registered by name. `eig-whiten` diagonalizes the
//! denominator and takes the top eigenpair of the whitened numerator;
//! `cholesky` whitens with a Cholesky factor and finds the top eigenpair
//! by restarted Lanczos, seeded with the caller's previous iterate.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernels::HermitianKernel;
use crate::{Error, Result, C64};

/// Inputs of one quotient maximization. Vectors are indexed like the kernel window.
#[derive(Debug, Clone, Copy)]
pub struct QuotientProblem<'a> {
    pub useful: &'a HermitianKernel,
    pub interference: &'a HermitianKernel,
    /// `σ²` added to the interference diagonal; must be positive.
    pub noise: f64,
    pub warm_start: Option<&'a [C64]>,
}

#[derive(Debug, Clone)]
pub struct QuotientSolution {
    /// Maximizer scaled so that `xᴴ(B + σ²I)x = 1`.
    pub vector: Vec<C64>,
    /// Attained quotient.
    pub value: f64,
    /// Largest relative eigen-residual of the decompositions used.
    pub residual: f64,
}

pub trait QuotientSolver: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &QuotientProblem<'_>) -> Result<QuotientSolution>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EigWhiten;

#[derive(Debug, Clone, Copy, Default)]
pub struct CholeskyLanczos;

static SOLVERS: [&dyn QuotientSolver; 2] = [&EigWhiten, &CholeskyLanczos];

pub fn solvers() -> &'static [&'static dyn QuotientSolver] {
    &SOLVERS
}

pub fn solver_by_name(name: &str) -> Option<&'static dyn QuotientSolver> {
    SOLVERS.iter().copied().find(|s| s.name().eq_ignore_ascii_case(name))
}

pub fn default_solver() -> &'static dyn QuotientSolver {
    &EigWhiten
}

impl QuotientSolver for EigWhiten {
    fn name(&self) -> &'static str {
        "eig-whiten"
    }

    fn solve(&self, problem: &QuotientProblem<'_>) -> Result<QuotientSolution> {
        check(problem)?;
        if is_real(problem) {
            eig_whiten::<f64>(problem)
        } else {
            eig_whiten::<C64>(problem)
        }
    }
}

impl QuotientSolver for CholeskyLanczos {
    fn name(&self) -> &'static str {
        "cholesky"
    }

    fn solve(&self, problem: &QuotientProblem<'_>) -> Result<QuotientSolution> {
        check(problem)?;
        let out = if is_real(problem) {
            cholesky_lanczos::<f64>(problem)
        } else {
            cholesky_lanczos::<C64>(problem)
        };
        match out {
            Some(s) => Ok(s),
            // not numerically positive definite; the eigen path clamps
            None => EigWhiten.solve(problem),
        }
    }
}

fn check(problem: &QuotientProblem<'_>) -> Result<()> {
    if problem.useful.window() != problem.interference.window() {
        return Err(Error::Kernel("useful and interference kernels live on different windows".into()));
    }
    if !(problem.noise > 0.0 && problem.noise.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise floor must be positive, got {}", problem.noise)));
    }
    if let Some(w) = problem.warm_start {
        if w.len() != problem.useful.size() {
            return Err(Error::InvalidArgument("warm start length differs from kernel size".into()));
        }
    }
    Ok(())
}

fn is_real(problem: &QuotientProblem<'_>) -> bool {
    problem.useful.is_real()
        && problem.interference.is_real()
        && problem.warm_start.is_none_or(|w| w.iter().all(|x| x.im == 0.0))
}

/// Scalar field of the dense linear algebra: `f64` for the real fast path, `C64` otherwise.
pub(crate) trait Field:
    Copy
    + Send
    + Sync
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    const ZERO: Self;
    fn from_c64(z: C64) -> Self;
    fn to_c64(self) -> C64;
    fn from_re(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn abs2(self) -> f64;
    fn random<R: Rng>(rng: &mut R) -> Self;
    /// Ascending eigenvalues and eigenvectors of a self-adjoint matrix.
    fn eigh(m: &Mat<Self>) -> Result<(Vec<f64>, Mat<Self>)>;
    fn cholesky(m: &Mat<Self>) -> Option<Mat<Self>>;
    fn matmul(a: &Mat<Self>, b: &Mat<Self>) -> Mat<Self>;
    fn adjoint_matmul(a: &Mat<Self>, b: &Mat<Self>) -> Mat<Self>;
    /// `L⁻¹ A L⁻ᴴ` for lower triangular `L`.
    fn whiten(l: &Mat<Self>, a: &Mat<Self>) -> Mat<Self>;
    /// Solves `Lᴴ x = y`.
    fn solve_adjoint(l: &Mat<Self>, y: &[Self]) -> Vec<Self>;
}

macro_rules! dense_ops {
    () => {
        fn eigh(m: &Mat<Self>) -> Result<(Vec<f64>, Mat<Self>)> {
            let e = m
                .self_adjoint_eigen(Side::Lower)
                .map_err(|err| Error::Eigen(format!("self-adjoint eigendecomposition failed: {err:?}")))?;
            let s = e.S().column_vector();
            let values = (0..m.nrows()).map(|i| Field::re(s[i])).collect();
            Ok((values, e.U().to_owned()))
        }

        fn cholesky(m: &Mat<Self>) -> Option<Mat<Self>> {
            m.llt(Side::Lower).ok().map(|c| c.L().to_owned())
        }

        fn matmul(a: &Mat<Self>, b: &Mat<Self>) -> Mat<Self> {
            a * b
        }

        fn adjoint_matmul(a: &Mat<Self>, b: &Mat<Self>) -> Mat<Self> {
            a.adjoint() * b
        }

        fn whiten(l: &Mat<Self>, a: &Mat<Self>) -> Mat<Self> {
            let mut x = a.clone();
            solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), Par::Seq);
            let mut c = x.adjoint().to_owned();
            solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), Par::Seq);
            let n = c.nrows();
            Mat::from_fn(n, n, |i, j| (c[(i, j)] + c[(j, i)].conj()) * 0.5)
        }

        fn solve_adjoint(l: &Mat<Self>, y: &[Self]) -> Vec<Self> {
            let mut x = Mat::from_fn(y.len(), 1, |i, _| y[i]);
            solve_upper_triangular_in_place(l.adjoint(), x.as_mut(), Par::Seq);
            (0..y.len()).map(|i| x[(i, 0)]).collect()
        }
    };
}

impl Field for f64 {
    const ZERO: Self = 0.0;

    fn from_c64(z: C64) -> Self {
        z.re
    }

    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }

    fn from_re(x: f64) -> Self {
        x
    }

    fn conj(self) -> Self {
        self
    }

    fn re(self) -> f64 {
        self
    }

    fn abs2(self) -> f64 {
        self * self
    }

    fn random<R: Rng>(rng: &mut R) -> Self {
        rng.random::<f64>() - 0.5
    }

    dense_ops!();
}

impl Field for C64 {
    const ZERO: Self = C64 { re: 0.0, im: 0.0 };

    fn from_c64(z: C64) -> Self {
        z
    }

    fn to_c64(self) -> C64 {
        self
    }

    fn from_re(x: f64) -> Self {
        C64::new(x, 0.0)
    }

    fn conj(self) -> Self {
        num_complex::Complex::conj(&self)
    }

    fn re(self) -> f64 {
        self.re
    }

    fn abs2(self) -> f64 {
        self.norm_sqr()
    }

    fn random<R: Rng>(rng: &mut R) -> Self {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    dense_ops!();
}

fn to_mat<T: Field>(k: &HermitianKernel) -> Mat<T> {
    Mat::from_fn(k.size(), k.size(), |i, j| T::from_c64(k.get(i, j)))
}

fn frobenius<T: Field>(m: &Mat<T>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].abs2();
        }
    }
    s.sqrt()
}

fn matvec<T: Field>(m: &Mat<T>, x: &[T]) -> Vec<T> {
    let n = m.nrows();
    let mut y = vec![T::ZERO; n];
    for (j, &xj) in x.iter().enumerate() {
        if xj == T::ZERO {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += m[(i, j)] * xj;
        }
    }
    y
}

/// `xᴴ y`.
fn dot<T: Field>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::ZERO, |acc, (&a, &b)| acc + a.conj() * b)
}

fn norm<T: Field>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
}

fn denominator<T: Field>(problem: &QuotientProblem<'_>) -> Mat<T> {
    let mut b = to_mat::<T>(problem.interference);
    for i in 0..b.nrows() {
        b[(i, i)] += T::from_re(problem.noise);
    }
    b
}

fn eig_whiten<T: Field>(problem: &QuotientProblem<'_>) -> Result<QuotientSolution> {
    let a = to_mat::<T>(problem.useful);
    let b = denominator::<T>(problem);
    let n = a.nrows();
    let (mut lambda, u) = T::eigh(&b)?;

    let mut bu = T::matmul(&b, &u);
    for j in 0..n {
        for i in 0..n {
            bu[(i, j)] -= u[(i, j)] * lambda[j];
        }
    }
    let residual_b = frobenius(&bu) / frobenius(&b);

    let tolerance = 1e-9 * problem.interference.trace().abs() + 1e-6 * problem.noise;
    for l in lambda.iter_mut() {
        if *l < problem.noise - tolerance {
            return Err(Error::Kernel(format!(
                "interference-plus-noise eigenvalue {l:e} below the noise floor {:e}",
                problem.noise
            )));
        }
        *l = l.max(problem.noise);
    }

    let w = Mat::from_fn(n, n, |i, j| u[(i, j)] * (1.0 / lambda[j].sqrt()));
    let wa = T::adjoint_matmul(&w, &a);
    let c_raw = T::matmul(&wa, &w);
    let c = Mat::from_fn(n, n, |i, j| (c_raw[(i, j)] + c_raw[(j, i)].conj()) * 0.5);
    let (mu, v) = T::eigh(&c)?;
    let top = n - 1;
    let value = mu[top];
    let vt: Vec<T> = (0..n).map(|i| v[(i, top)]).collect();
    let cv = matvec(&c, &vt);
    let r: Vec<T> = cv.iter().zip(&vt).map(|(&x, &y)| x - y * value).collect();
    let residual_c = norm(&r) / frobenius(&c).max(f64::MIN_POSITIVE);

    let x = matvec(&w, &vt);
    Ok(QuotientSolution {
        vector: x.into_iter().map(Field::to_c64).collect(),
        value,
        residual: residual_b.max(residual_c),
    })
}

const LANCZOS_BASIS: usize = 48;
const LANCZOS_RESTARTS: usize = 200;
const LANCZOS_TOLERANCE: f64 = 1e-12;

fn cholesky_lanczos<T: Field>(problem: &QuotientProblem<'_>) -> Option<QuotientSolution> {
    let a = to_mat::<T>(problem.useful);
    let b = denominator::<T>(problem);
    let l = T::cholesky(&b)?;
    let c = T::whiten(&l, &a);
    let n = c.nrows();

    let start: Vec<T> = match problem.warm_start {
        Some(w) => {
            // y = Lᴴ x
            let x: Vec<T> = w.iter().map(|&z| T::from_c64(z)).collect();
            (0..n)
                .map(|i| (i..n).fold(T::ZERO, |acc, k| acc + l[(k, i)].conj() * x[k]))
                .collect()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            (0..n).map(|_| T::random(&mut rng)).collect()
        }
    };
    let (value, y, residual) = lanczos_top(&c, start)?;
    let x = T::solve_adjoint(&l, &y);
    if x.iter().any(|v| !v.re().is_finite()) {
        return None;
    }
    Some(QuotientSolution { vector: x.into_iter().map(Field::to_c64).collect(), value, residual })
}

/// Largest eigenpair of a self-adjoint matrix by restarted Lanczos with full
/// reorthogonalization. The returned Ritz value is never below the
/// Rayleigh quotient of `start`.
fn lanczos_top<T: Field>(c: &Mat<T>, start: Vec<T>) -> Option<(f64, Vec<T>, f64)> {
    let n = c.nrows();
    let mut v0 = start;
    let s = norm(&v0);
    if !(s > 0.0 && s.is_finite()) {
        return None;
    }
    v0.iter_mut().for_each(|x| *x = *x * (1.0 / s));
    let scale = frobenius(c).max(f64::MIN_POSITIVE);
    let mut best = (0.0, v0.clone(), f64::INFINITY);

    for _ in 0..LANCZOS_RESTARTS {
        let m = LANCZOS_BASIS.min(n);
        let mut basis: Vec<Vec<T>> = vec![v0.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut exhausted = false;
        for j in 0..m {
            let mut w = matvec(c, &basis[j]);
            alpha.push(dot(&basis[j], &w).re());
            for _ in 0..2 {
                for v in &basis {
                    let h = dot(v, &w);
                    for (wi, &vi) in w.iter_mut().zip(v) {
                        *wi -= vi * h;
                    }
                }
            }
            let b = norm(&w);
            if j + 1 == m {
                break;
            }
            if b <= 1e-14 * scale {
                exhausted = true;
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x = *x * (1.0 / b));
            basis.push(w);
        }

        let k = alpha.len();
        let t = Mat::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i == j + 1 {
                beta[j]
            } else if j == i + 1 {
                beta[i]
            } else {
                0.0
            }
        });
        let (theta, s) = f64::eigh(&t).ok()?;
        let value = theta[k - 1];
        let mut x = vec![T::ZERO; n];
        for (idx, v) in basis.iter().take(k).enumerate() {
            let coef = s[(idx, k - 1)];
            for (xi, &vi) in x.iter_mut().zip(v) {
                *xi += vi * coef;
            }
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v = *v * (1.0 / nx));
        let cx = matvec(c, &x);
        let value = dot(&x, &cx).re().max(value);
        let r: Vec<T> = cx.iter().zip(&x).map(|(&a, &b)| a - b * value).collect();
        let residual = norm(&r) / value.abs().max(f64::MIN_POSITIVE);
        if value >= best.0 {
            best = (value, x.clone(), residual);
        }
        if residual <= LANCZOS_TOLERANCE || exhausted {
            break;
        }
        v0 = x;
    }
    Some(best)
}
