//! Dense complex linear algebra used throughout the crate.
//!
//! Everything is computed in `Complex64`; real inputs are embedded. The
//! solvers here (Stein/Lyapunov, stabilizing Riccati, Hermitian square
//! roots, least squares over Hermitian matrices) are the building blocks of
//! the state-space calculus in [`crate::statespace`].

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// Spectral radius must stay below `1 - STABILITY_MARGIN` to count as stable.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Relative residual accepted for a Riccati solution.
pub const RICCATI_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not stable (spectral radius {0})")]
    NotStable(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix is not positive definite (min eigenvalue {0:e})")]
    NotPd(f64),
    #[error("least squares problem has no columns")]
    EmptyBasis,
    #[error("matrix is singular or too ill-conditioned to invert")]
    Singular,
    #[error("decomposition did not converge: {0}")]
    NoConvergence(&'static str),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real_to_complex(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Frobenius norm of a complex matrix.
pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute imaginary part over all entries.
pub fn max_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

/// A complex square matrix equal to its conjugate transpose.
///
/// Construction symmetrizes as `(M + M*)/2`, so rounding drift from upstream
/// solvers never leaks into the Hermitian algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::json::MatrixJson", into = "crate::json::MatrixJson")]
pub struct Hermitian(CMat);

impl Hermitian {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes a square matrix; panics on non-square input.
    pub fn symmetrize(m: CMat) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let adj = m.adjoint();
        Hermitian((m + adj) * c(0.5, 0.0))
    }

    pub fn from_real(m: &RMat) -> Result<Self> {
        Self::new(real_to_complex(m))
    }

    pub fn zeros(n: usize) -> Self {
        Hermitian(CMat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Hermitian(identity(n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Hermitian(CMat::from_fn(n, n, |i, j| if i == j { c(d[i], 0.0) } else { c(0.0, 0.0) }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// Real inner product `Re tr(A B*)`.
    pub fn inner(&self, other: &Hermitian) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        fro(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Hermitian {
        Hermitian(&self.0 * c(s, 0.0))
    }

    pub fn add_scaled(&self, s: f64, other: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &other.0 * c(s, 0.0))
    }

    /// Congruence `X M X*`.
    pub fn congruence(&self, x: &CMat) -> Hermitian {
        Hermitian::symmetrize(x * &self.0 * x.adjoint())
    }

    /// Coordinates as a real vector: real parts then imaginary parts, row-major.
    pub fn to_real_vec(&self) -> Vec<f64> {
        let n = self.dim();
        let mut v = Vec::with_capacity(2 * n * n);
        for i in 0..n {
            for j in 0..n {
                v.push(self.0[(i, j)].re);
            }
        }
        for i in 0..n {
            for j in 0..n {
                v.push(self.0[(i, j)].im);
            }
        }
        v
    }

    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        hermitian_eigen(self)
    }
}

impl Add for &Hermitian {
    type Output = Hermitian;
    fn add(self, rhs: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &rhs.0)
    }
}

impl Sub for &Hermitian {
    type Output = Hermitian;
    fn sub(self, rhs: &Hermitian) -> Hermitian {
        Hermitian(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &Hermitian {
    type Output = Hermitian;
    fn mul(self, rhs: f64) -> Hermitian {
        self.scale(rhs)
    }
}

/// Complex Schur form `A = U T U*` with `T` upper triangular.
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    let upper = (0..n).all(|j| ((j + 1)..n).all(|i| a[(i, j)].norm() == 0.0));
    if upper {
        return Ok((identity(n), a.clone()));
    }
    let lower = (0..n).all(|i| ((i + 1)..n).all(|j| a[(i, j)].norm() == 0.0));
    if lower {
        // the reversal permutation maps lower to upper triangular
        let flip = CMat::from_fn(n, n, |i, j| if i + j == n - 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let t = &flip * a * &flip;
        return Ok((flip, t));
    }
    if let Some(found) = francis(a) {
        return Ok(found);
    }
    // exact defective structure can stall the shifted QR iteration; a fixed
    // unitary similarity breaks it
    for k in 1..=3 {
        let w = CMat::from_fn(n, n, |i, j| {
            let x = (k * 7 + 3 * i + 5 * j * j) as f64;
            c(x.sin(), (1.3 * x).cos())
        })
        .qr()
        .q();
        if let Some((v, t)) = francis(&(w.adjoint() * a * &w)) {
            return Ok((w * v, t));
        }
    }
    Err(LinalgError::NoConvergence("complex Schur"))
}

fn francis(a: &CMat) -> Option<(CMat, CMat)> {
    let n = a.nrows();
    let s = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 1000 * n.max(10))?;
    let (u, mut t) = s.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = c(0.0, 0.0);
        }
    }
    Some((u, t))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    let (_, t) = schur(a)?;
    Ok((0..a.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn spectral_radius(a: &CMat) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().fold(0.0, |acc, z| acc.max(z.norm())))
}

pub fn is_stable(a: &CMat) -> bool {
    matches!(spectral_radius(a), Ok(r) if r < 1.0 - STABILITY_MARGIN)
}

fn check_stable(a: &CMat) -> Result<()> {
    let r = spectral_radius(a)?;
    if r >= 1.0 - STABILITY_MARGIN {
        return Err(LinalgError::NotStable(r));
    }
    Ok(())
}

/// Solves the upper triangular system `U x = b` in place.
fn upper_solve(u: &CMat, b: &mut [Complex64]) -> Result<()> {
    let n = u.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= u[(i, k)] * b[k];
        }
        let d = u[(i, i)];
        if d.norm() == 0.0 {
            return Err(LinalgError::Singular);
        }
        b[i] = s / d;
    }
    Ok(())
}

/// Solves the Stein equation `X = A1 X A2* + Q` by Schur reduction of both
/// coefficient matrices (Bartels–Stewart). Requires `|λ_i(A1) λ_j(A2)| ≠ 1`.
pub fn solve_stein(a1: &CMat, a2: &CMat, q: &CMat) -> Result<CMat> {
    let (n1, n2) = (a1.nrows(), a2.nrows());
    if !a1.is_square() || !a2.is_square() || q.nrows() != n1 || q.ncols() != n2 {
        return Err(LinalgError::DimensionMismatch(format!(
            "stein: A1 {}x{}, A2 {}x{}, Q {}x{}",
            a1.nrows(),
            a1.ncols(),
            a2.nrows(),
            a2.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if n1 == 0 || n2 == 0 {
        return Ok(q.clone());
    }
    let (u1, t1) = schur(a1)?;
    let (u2, t2) = if std::ptr::eq(a1, a2) {
        (u1.clone(), t1.clone())
    } else {
        schur(a2)?
    };
    let qt = u1.adjoint() * q * &u2;
    let mut y = CMat::zeros(n1, n2);
    let mut shifted = CMat::zeros(n1, n1);
    for j in (0..n2).rev() {
        // r = sum_{l>j} conj(T2[j,l]) Y[:,l]
        let mut r = vec![c(0.0, 0.0); n1];
        for l in (j + 1)..n2 {
            let w = t2[(j, l)].conj();
            if w.norm() == 0.0 {
                continue;
            }
            for i in 0..n1 {
                r[i] += w * y[(i, l)];
            }
        }
        let mut rhs: Vec<Complex64> = (0..n1)
            .map(|i| {
                let mut s = qt[(i, j)];
                for k in i..n1 {
                    s += t1[(i, k)] * r[k];
                }
                s
            })
            .collect();
        let tjj = t2[(j, j)].conj();
        for i in 0..n1 {
            for k in 0..n1 {
                shifted[(i, k)] = if k < i { c(0.0, 0.0) } else { -tjj * t1[(i, k)] };
            }
            shifted[(i, i)] += c(1.0, 0.0);
        }
        upper_solve(&shifted, &mut rhs)?;
        for i in 0..n1 {
            y[(i, j)] = rhs[i];
        }
    }
    Ok(&u1 * y * u2.adjoint())
}

/// Unique solution `Π = A Π A* + Q` for stable `A`.
pub fn solve_discrete_lyapunov(a: &CMat, q: &Hermitian) -> Result<Hermitian> {
    if !a.is_square() || a.nrows() != q.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "lyapunov: A {}x{}, Q {}x{}",
            a.nrows(),
            a.ncols(),
            q.dim(),
            q.dim()
        )));
    }
    check_stable(a)?;
    let x = solve_stein(a, a, q.matrix())?;
    Ok(Hermitian::symmetrize(x))
}

/// Stabilizing solution of a discrete Riccati equation with cross term,
/// `X = A*XA − (A*XB + S)(R + B*XB)⁻¹(B*XA + S*) + Q`.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub x: Hermitian,
    /// `K = (R + B*XB)⁻¹(B*XA + S*)`
    pub gain: CMat,
    /// `A − BK`, spectral radius below one.
    pub closed_loop: CMat,
    /// `R + B*XB`, positive definite.
    pub weight: Hermitian,
    pub residual: f64,
}

/// Problem data for [`solve_riccati`].
pub struct RiccatiProblem<'a> {
    pub a: &'a CMat,
    pub b: &'a CMat,
    pub q: &'a Hermitian,
    pub r: &'a Hermitian,
    pub s: Option<&'a CMat>,
}

impl RiccatiProblem<'_> {
    fn cross(&self) -> CMat {
        match self.s {
            Some(s) => s.clone(),
            None => CMat::zeros(self.a.nrows(), self.b.ncols()),
        }
    }

    fn gain(&self, x: &CMat) -> Result<(CMat, Hermitian)> {
        let (a, b) = (self.a, self.b);
        let w = Hermitian::symmetrize(self.r.matrix() + b.adjoint() * x * b);
        let rhs = b.adjoint() * x * a + self.cross().adjoint();
        let k = solve_hpd(&w, &rhs)?;
        Ok((k, w))
    }

    fn residual(&self, x: &CMat) -> Result<f64> {
        let (a, b) = (self.a, self.b);
        let s = self.cross();
        let (k, _) = self.gain(x)?;
        let res = a.adjoint() * x * a - (a.adjoint() * x * b + s) * k + self.q.matrix() - x;
        Ok(fro(&res) / (1.0 + fro(x) + self.q.norm()))
    }

    /// One Newton–Kleinman step from gain `k`: solves
    /// `X = A_K* X A_K + Q − SK − K*S* + K*RK` with `A_K = A − BK`.
    fn newton_from_gain(&self, k: &CMat) -> Result<CMat> {
        let ak = self.a - self.b * k;
        if !is_stable(&ak) {
            return Err(LinalgError::NotStable(spectral_radius(&ak)?));
        }
        let s = self.cross();
        let rhs = self.q.matrix() - &s * k - k.adjoint() * s.adjoint()
            + k.adjoint() * self.r.matrix() * k;
        let akh = ak.adjoint();
        let x = solve_stein(&akh, &akh, &rhs)?;
        Ok(Hermitian::symmetrize(x).into_matrix())
    }

    /// Structure-preserving doubling on the cross-term-free form
    /// `X = Â* X (I + G X)⁻¹ Â + H`.
    fn doubling(&self) -> Result<CMat> {
        let n = self.a.nrows();
        let rinv_sh = solve_hpd(self.r, &self.cross().adjoint())?;
        let rinv_bh = solve_hpd(self.r, &self.b.adjoint())?;
        let mut ak = self.a - self.b * &rinv_sh;
        let mut gk = Hermitian::symmetrize(self.b * rinv_bh).into_matrix();
        let mut hk = Hermitian::symmetrize(self.q.matrix() - self.cross() * rinv_sh).into_matrix();
        let eye = identity(n);
        for _ in 0..100 {
            let w = &eye + &gk * &hk;
            let lu = w.clone().lu();
            let winv_a = lu.solve(&ak).ok_or(LinalgError::Singular)?;
            let winv_g = lu.solve(&gk).ok_or(LinalgError::Singular)?;
            let a_next = &ak * &winv_a;
            let g_next = Hermitian::symmetrize(&gk + &ak * winv_g * ak.adjoint()).into_matrix();
            let h_next =
                Hermitian::symmetrize(&hk + ak.adjoint() * &hk * &winv_a).into_matrix();
            let step = fro(&(&h_next - &hk));
            let scale = 1.0 + fro(&h_next);
            if !step.is_finite() || !scale.is_finite() {
                return Err(LinalgError::NoConvergence("doubling diverged"));
            }
            ak = a_next;
            gk = g_next;
            hk = h_next;
            if step <= 1e-15 * scale || fro(&ak) <= 1e-300 {
                return Ok(hk);
            }
        }
        Err(LinalgError::NoConvergence("doubling iteration limit"))
    }

    fn newton_kleinman(&self, mut k: CMat) -> Result<CMat> {
        let mut x_prev: Option<CMat> = None;
        for _ in 0..200 {
            let x = self.newton_from_gain(&k)?;
            let (k_next, w) = self.gain(&x)?;
            if min_eigenvalue(&w) <= 0.0 {
                return Err(LinalgError::NotPd(min_eigenvalue(&w)));
            }
            if let Some(prev) = &x_prev {
                if fro(&(&x - prev)) <= 1e-14 * (1.0 + fro(&x)) {
                    return Ok(x);
                }
            }
            x_prev = Some(x);
            k = k_next;
        }
        x_prev.ok_or(LinalgError::NoConvergence("newton-kleinman"))
    }

    fn verify(&self, x: CMat) -> Result<RiccatiSolution> {
        let x = Hermitian::symmetrize(x);
        if x.matrix().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NoStabilizingSolution("non-finite iterate".into()));
        }
        let (gain, weight) = self.gain(x.matrix())?;
        let wmin = min_eigenvalue(&weight);
        if wmin <= 0.0 {
            return Err(LinalgError::NoStabilizingSolution(format!(
                "R + B*XB not positive definite (min eigenvalue {wmin:e})"
            )));
        }
        let closed_loop = self.a - self.b * &gain;
        let rho = spectral_radius(&closed_loop)?;
        if rho >= 1.0 - STABILITY_MARGIN {
            return Err(LinalgError::NoStabilizingSolution(format!(
                "closed loop spectral radius {rho}"
            )));
        }
        let residual = self.residual(x.matrix())?;
        if !(residual < RICCATI_TOL) {
            return Err(LinalgError::NoStabilizingSolution(format!(
                "Riccati residual {residual:e}"
            )));
        }
        Ok(RiccatiSolution { x, gain, closed_loop, weight, residual })
    }

    fn check_dims(&self) -> Result<()> {
        let n = self.a.nrows();
        let p = self.b.ncols();
        let ok = self.a.is_square()
            && self.b.nrows() == n
            && self.q.dim() == n
            && self.r.dim() == p
            && self.s.is_none_or(|s| s.nrows() == n && s.ncols() == p);
        if ok {
            Ok(())
        } else {
            Err(LinalgError::DimensionMismatch("riccati data".into()))
        }
    }
}

/// Solves for the stabilizing Riccati solution.
///
/// Doubling is tried first and polished with one Newton step; if that fails
/// verification, Newton–Kleinman from the zero gain (valid when `A` is
/// stable) is used. The result is always checked for closed-loop stability,
/// positivity of `R + B*XB` and a small residual.
pub fn solve_riccati(p: &RiccatiProblem<'_>) -> Result<RiccatiSolution> {
    p.check_dims()?;
    if min_eigenvalue(p.r) <= 0.0 {
        return Err(LinalgError::NotPd(min_eigenvalue(p.r)));
    }
    let mut last_err = LinalgError::NoStabilizingSolution("no method succeeded".into());
    if let Ok(x) = p.doubling() {
        let polished = p
            .gain(&x)
            .and_then(|(k, _)| p.newton_from_gain(&k))
            .unwrap_or_else(|_| x.clone());
        let candidate = if p.residual(&polished).unwrap_or(f64::INFINITY)
            <= p.residual(&x).unwrap_or(f64::INFINITY)
        {
            polished
        } else {
            x
        };
        match p.verify(candidate) {
            Ok(sol) => return Ok(sol),
            Err(e) => last_err = e,
        }
    }
    if is_stable(p.a) {
        let k0 = CMat::zeros(p.b.ncols(), p.a.nrows());
        match p.newton_kleinman(k0).and_then(|x| p.verify(x)) {
            Ok(sol) => return Ok(sol),
            Err(e) => last_err = e,
        }
    }
    Err(match last_err {
        e @ LinalgError::NoStabilizingSolution(_) => e,
        e => LinalgError::NoStabilizingSolution(e.to_string()),
    })
}

/// Stabilizing solution of `P = A*PA − A*PB(B*PB + I)⁻¹B*PA + Λ`.
pub fn solve_dare_stabilizing(a: &CMat, b: &CMat, lambda: &Hermitian) -> Result<Hermitian> {
    Ok(dare_control(a, b, lambda)?.x)
}

pub(crate) fn dare_control(a: &CMat, b: &CMat, lambda: &Hermitian) -> Result<RiccatiSolution> {
    let r = Hermitian::identity(b.ncols());
    solve_riccati(&RiccatiProblem { a, b, q: lambda, r: &r, s: None })
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &Hermitian) -> (Vec<f64>, CMat) {
    let n = m.dim();
    if n == 0 {
        return (vec![], CMat::zeros(0, 0));
    }
    let eig = m.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (vals, vecs)
}

pub fn min_eigenvalue(m: &Hermitian) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eigenvalue(m: &Hermitian) -> f64 {
    hermitian_eigen(m).0.last().copied().unwrap_or(f64::NEG_INFINITY)
}

fn spectral_map(m: &Hermitian, f: impl Fn(f64) -> f64) -> Hermitian {
    let (vals, vecs) = hermitian_eigen(m);
    let n = vals.len();
    let d = CMat::from_fn(n, n, |i, j| if i == j { c(f(vals[i]), 0.0) } else { c(0.0, 0.0) });
    Hermitian::symmetrize(&vecs * d * vecs.adjoint())
}

/// Hermitian positive semidefinite square root. Eigenvalues down to
/// `-1e-8‖M‖` are clipped to zero.
pub fn hermitian_sqrt(m: &Hermitian) -> Result<Hermitian> {
    let (vals, _) = hermitian_eigen(m);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if let Some(&lo) = vals.first() {
        if lo < -1e-8 * scale {
            return Err(LinalgError::NotPsd(lo));
        }
    }
    Ok(spectral_map(m, |x| x.max(0.0).sqrt()))
}

/// `M^{-1/2}` for positive definite `M`.
pub fn hermitian_inv_sqrt(m: &Hermitian) -> Result<Hermitian> {
    let lo = min_eigenvalue(m);
    if lo <= 1e-14 * m.norm() || lo <= 0.0 {
        return Err(LinalgError::NotPd(lo));
    }
    Ok(spectral_map(m, |x| 1.0 / x.sqrt()))
}

/// Solves `W X = B` for Hermitian positive definite `W`.
pub fn solve_hpd(w: &Hermitian, b: &CMat) -> Result<CMat> {
    match w.matrix().clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => w.matrix().clone().lu().solve(b).ok_or(LinalgError::Singular),
    }
}

/// Inverse of a square complex matrix; fails when the 2-norm condition
/// number exceeds `max_cond`.
pub fn inverse_checked(m: &CMat, max_cond: f64) -> Result<CMat> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch("inverse of non-square matrix".into()));
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let sv = singular_values(m);
    let smax = sv[0];
    let smin = *sv.last().expect("non-empty");
    if smin <= 0.0 || smax / smin > max_cond {
        return Err(LinalgError::Singular);
    }
    m.clone().try_inverse().ok_or(LinalgError::Singular)
}

/// Result of a least squares fit over Hermitian matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquaresSolution {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub rank: usize,
}

/// Minimum-norm real coefficients minimizing `‖Σ α_k column_k − target‖_F`,
/// treating Hermitian matrices as vectors under `⟨A, B⟩ = Re tr(AB*)`.
pub fn least_squares(columns: &[Hermitian], target: &Hermitian) -> Result<LeastSquaresSolution> {
    if columns.is_empty() {
        return Err(LinalgError::EmptyBasis);
    }
    let n = target.dim();
    if let Some(bad) = columns.iter().find(|h| h.dim() != n) {
        return Err(LinalgError::DimensionMismatch(format!(
            "column of size {} vs target of size {n}",
            bad.dim()
        )));
    }
    let rows = 2 * n * n;
    let mut a = RMat::zeros(rows, columns.len());
    for (k, col) in columns.iter().enumerate() {
        for (r, v) in col.to_real_vec().into_iter().enumerate() {
            a[(r, k)] = v;
        }
    }
    let b = RVec::from_vec(target.to_real_vec());
    let (x, rank) = pinv_solve(&a, &b)?;
    let resid = &a * &x - &b;
    Ok(LeastSquaresSolution {
        coefficients: x.iter().copied().collect(),
        residual_norm: resid.norm(),
        rank,
    })
}

/// Minimum-norm least squares solution of a real system via the SVD.
pub fn pinv_solve(a: &RMat, b: &RVec) -> Result<(RVec, usize)> {
    if a.nrows() != b.len() {
        return Err(LinalgError::DimensionMismatch("pinv_solve".into()));
    }
    let svd = Svd::new(&real_to_complex(a));
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let tol = smax * f64::EPSILON * (a.nrows().max(a.ncols()) as f64);
    let rank = svd.s.iter().filter(|&&s| s > tol).count();
    let bc = b.map(|x| c(x, 0.0));
    let mut x = nalgebra::DVector::<Complex64>::zeros(a.ncols());
    for k in 0..rank {
        let coeff = (svd.u.column(k).adjoint() * &bc)[(0, 0)] / svd.s[k];
        x += svd.v.column(k) * coeff;
    }
    Ok((x.map(|z| z.re), rank))
}

/// Thin singular value decomposition `M = U diag(s) V*` with `s` descending.
/// Columns of `U` belonging to zero singular values are zero.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    /// One-sided (Hestenes) Jacobi iteration, which delivers singular values
    /// to high relative accuracy.
    pub fn new(m: &CMat) -> Svd {
        let (rows, cols) = m.shape();
        if rows < cols {
            let t = Svd::new(&m.adjoint());
            return Svd { u: t.v, s: t.s, v: t.u };
        }
        let mut a = m.clone();
        let mut v = identity(cols);
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..cols {
                for q in (p + 1)..cols {
                    let alpha = a.column(p).norm_squared();
                    let beta = a.column(q).norm_squared();
                    let gamma = a.column(p).dotc(&a.column(q));
                    let g = gamma.norm();
                    if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let cs = 1.0 / (1.0 + t * t).sqrt();
                    let sn = cs * t;
                    for mat in [&mut a, &mut v] {
                        for r in 0..mat.nrows() {
                            let xp = mat[(r, p)];
                            let xq = mat[(r, q)] * phase.conj();
                            mat[(r, p)] = xp * cs - xq * sn;
                            mat[(r, q)] = (xp * sn + xq * cs) * phase;
                        }
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let norms: Vec<f64> = (0..cols).map(|k| a.column(k).norm()).collect();
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
        let mut u = CMat::zeros(rows, cols);
        let mut vs = CMat::zeros(cols, cols);
        let mut s = Vec::with_capacity(cols);
        for (k, &j) in order.iter().enumerate() {
            let sj = norms[j];
            if sj > 0.0 {
                u.set_column(k, &(a.column(j) / c(sj, 0.0)));
            }
            vs.set_column(k, &v.column(j));
            s.push(sj);
        }
        Svd { u, s, v: vs }
    }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    Svd::new(m).s
}
