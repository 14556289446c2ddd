//! State-space calculus on the unit circle.
//!
//! A [`Realization`] `(A, B, C, D)` stands for `F(z) = C(zI − A)⁻¹B + D`, always
//! with `A` stable so `F` is analytic outside the disk. Spectra are handled
//! through their factors: left (`Φ = W W*`) or right (`Φ = H* H`). Integrals
//! over the circle are exact via Lyapunov equations; frequency grids exist
//! only to cross-check.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::cmat;
use crate::matrix::{
    self, c, fro, hermitian_inv_sqrt, hermitian_sqrt, identity, solve_discrete_lyapunov,
    solve_riccati, CMat, Hermitian, LinalgError, RiccatiProblem,
};

/// Relative rank tolerance for minimality reduction.
pub const MINIMALITY_TOL: f64 = 1e-9;

/// Maximum condition number of `D` accepted by [`invert_realization`].
pub const MAX_D_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("resolvent (zI - A) is singular at theta = {0}")]
    SingularResolvent(f64),
    #[error("spectrum is not coercive: {0}")]
    NotCoercive(String),
    #[error("feedthrough D is singular or ill-conditioned")]
    SingularD,
    #[error("observability Gramian is singular (min eigenvalue {0:e}); reduce the realization first")]
    SingularObservabilityGramian(f64),
    #[error("Lambda is outside the domain (Q_Lambda not factorizable): {0}")]
    NotInDomain(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, FactorError>;

/// `F(z) = C(zI − A)⁻¹B + D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    #[serde(rename = "A", with = "cmat")]
    pub a: CMat,
    #[serde(rename = "B", with = "cmat")]
    pub b: CMat,
    #[serde(rename = "C", with = "cmat")]
    pub c: CMat,
    #[serde(rename = "D", with = "cmat")]
    pub d: CMat,
}

impl Realization {
    pub fn new(a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self> {
        let n = a.nrows();
        let ok = a.is_square()
            && b.nrows() == n
            && c.ncols() == n
            && d.nrows() == c.nrows()
            && d.ncols() == b.ncols();
        if !ok {
            return Err(FactorError::DimensionMismatch(format!(
                "A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Realization { a, b, c, d })
    }

    /// Memoryless realization `F(z) ≡ D`.
    pub fn constant(d: CMat) -> Self {
        let (q, p) = d.shape();
        Realization { a: CMat::zeros(0, 0), b: CMat::zeros(0, p), c: CMat::zeros(q, 0), d }
    }

    /// `(zI − A)⁻¹B`.
    pub fn resolvent(a: CMat, b: CMat) -> Self {
        let (n, p) = b.shape();
        Realization { a, b, c: identity(n), d: CMat::zeros(n, p) }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_stable(&self) -> bool {
        matrix::is_stable(&self.a)
    }

    pub fn check_stable(&self) -> Result<()> {
        if self.states() == 0 {
            return Ok(());
        }
        let r = matrix::spectral_radius(&self.a)?;
        if r >= 1.0 - matrix::STABILITY_MARGIN {
            return Err(LinalgError::NotStable(r).into());
        }
        Ok(())
    }

    /// Value at an arbitrary complex point `z`.
    pub fn eval_z(&self, z: Complex64) -> Option<CMat> {
        if self.states() == 0 {
            return Some(self.d.clone());
        }
        let n = self.states();
        let res = identity(n) * z - &self.a;
        let x = res.lu().solve(&self.b)?;
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return None;
        }
        Some(&self.c * x + &self.d)
    }

    /// Value at `z = e^{jθ}`.
    pub fn eval(&self, theta: f64) -> Result<CMat> {
        self.eval_z(Complex64::from_polar(1.0, theta))
            .ok_or(FactorError::SingularResolvent(theta))
    }

    /// Series connection `self(z) · rhs(z)`.
    pub fn series(&self, rhs: &Realization) -> Result<Realization> {
        if self.inputs() != rhs.outputs() {
            return Err(FactorError::DimensionMismatch(format!(
                "series: {} inputs vs {} outputs",
                self.inputs(),
                rhs.outputs()
            )));
        }
        let (n1, n2) = (self.states(), rhs.states());
        let mut a = CMat::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((0, n1), (n1, n2)).copy_from(&(&self.b * &rhs.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&rhs.a);
        let mut b = CMat::zeros(n1 + n2, rhs.inputs());
        b.view_mut((0, 0), (n1, rhs.inputs())).copy_from(&(&self.b * &rhs.d));
        b.view_mut((n1, 0), (n2, rhs.inputs())).copy_from(&rhs.b);
        let mut cm = CMat::zeros(self.outputs(), n1 + n2);
        cm.view_mut((0, 0), (self.outputs(), n1)).copy_from(&self.c);
        cm.view_mut((0, n1), (self.outputs(), n2)).copy_from(&(&self.d * &rhs.c));
        let d = &self.d * &rhs.d;
        Ok(Realization { a, b, c: cm, d })
    }

    /// Parallel connection `self(z) + rhs(z)`.
    pub fn parallel(&self, rhs: &Realization) -> Result<Realization> {
        if self.inputs() != rhs.inputs() || self.outputs() != rhs.outputs() {
            return Err(FactorError::DimensionMismatch("parallel: shapes differ".into()));
        }
        let (n1, n2) = (self.states(), rhs.states());
        let mut a = CMat::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&rhs.a);
        let mut b = CMat::zeros(n1 + n2, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs())).copy_from(&rhs.b);
        let mut cm = CMat::zeros(self.outputs(), n1 + n2);
        cm.view_mut((0, 0), (self.outputs(), n1)).copy_from(&self.c);
        cm.view_mut((0, n1), (self.outputs(), n2)).copy_from(&rhs.c);
        Ok(Realization { a, b, c: cm, d: &self.d + &rhs.d })
    }

    /// `M · F(z)`.
    pub fn left_mul(&self, m: &CMat) -> Realization {
        Realization { a: self.a.clone(), b: self.b.clone(), c: m * &self.c, d: m * &self.d }
    }

    /// `F(z) · M`.
    pub fn right_mul(&self, m: &CMat) -> Realization {
        Realization { a: self.a.clone(), b: &self.b * m, c: self.c.clone(), d: &self.d * m }
    }

    /// `(A*, C*, B*, D*)`: the function `z ↦ F(1/z̄)*`, so that on the circle
    /// `dual(F)(e^{-jθ}) = F(e^{jθ})*`.
    pub fn dual(&self) -> Realization {
        Realization {
            a: self.a.adjoint(),
            b: self.c.adjoint(),
            c: self.b.adjoint(),
            d: self.d.adjoint(),
        }
    }

    /// State coordinate change `x ↦ T⁻¹x` restricted to an orthonormal basis `V`.
    fn project(&self, v: &CMat) -> Realization {
        let vh = v.adjoint();
        Realization {
            a: &vh * &self.a * v,
            b: &vh * &self.b,
            c: &self.c * v,
            d: self.d.clone(),
        }
    }

    /// Removes uncontrollable then unobservable states (orthogonal staircase
    /// with relative rank tolerance `tol`).
    pub fn minimal(&self, tol: f64) -> Realization {
        if self.states() == 0 {
            return self.clone();
        }
        let v = reachable_basis(&self.a, &self.b, tol);
        let ctrl = self.project(&v);
        if ctrl.states() == 0 {
            return Realization::constant(self.d.clone());
        }
        let w = reachable_basis(&ctrl.a.adjoint(), &ctrl.c.adjoint(), tol);
        let red = ctrl.project(&w);
        if red.states() == 0 {
            return Realization::constant(self.d.clone());
        }
        red
    }

    pub fn minimal_default(&self) -> Realization {
        self.minimal(MINIMALITY_TOL)
    }

    /// Square-root balanced truncation returned in output-normal coordinates
    /// (observability Gramian equal to `I`). States whose Hankel singular
    /// value is at most `tol · max(σ₁, ‖D‖₂)` are dropped; the H∞ error is
    /// bounded by twice the sum of the dropped values.
    pub fn output_normal(&self, tol: f64) -> Result<Realization> {
        if self.states() == 0 {
            return Ok(self.clone());
        }
        self.check_stable()?;
        let bb = Hermitian::symmetrize(&self.b * self.b.adjoint());
        let cc = Hermitian::symmetrize(self.c.adjoint() * &self.c);
        let lc = gramian_factor(&solve_discrete_lyapunov(&self.a, &bb)?);
        let lo = gramian_factor(&solve_discrete_lyapunov(&self.a.adjoint(), &cc)?);
        let svd = matrix::Svd::new(&(lo.adjoint() * &lc));
        let (u, v, sv) = (&svd.u, &svd.v, &svd.s);
        let dnorm = if self.d.is_empty() { 0.0 } else { matrix::singular_values(&self.d)[0] };
        let floor = tol * sv[0].max(dnorm);
        let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > floor && sv[k] > 0.0).collect();
        if keep.is_empty() {
            return Ok(Realization::constant(self.d.clone()));
        }
        let r = keep.len();
        let n = self.states();
        let mut t = CMat::zeros(n, r);
        let mut t_inv = CMat::zeros(r, n);
        for (col, &k) in keep.iter().enumerate() {
            t.set_column(col, &(&lc * v.column(k) * c(1.0 / sv[k], 0.0)));
            t_inv.set_row(col, &(u.column(k).adjoint() * lo.adjoint()));
        }
        Ok(Realization {
            a: &t_inv * &self.a * &t,
            b: &t_inv * &self.b,
            c: &self.c * &t,
            d: self.d.clone(),
        })
    }
}

/// `L` with `P = LL*`, from the eigendecomposition of a PSD Gramian.
fn gramian_factor(p: &Hermitian) -> CMat {
    let (vals, vecs) = matrix::hermitian_eigen(p);
    let mut l = vecs;
    for (k, v) in vals.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        l.column_mut(k).scale_mut(s);
    }
    l
}

/// Orthonormal basis of the reachable subspace of `(A, B)` via block Krylov
/// iteration with SVD rank decisions at each step.
pub fn reachable_basis(a: &CMat, b: &CMat, tol: f64) -> CMat {
    let n = a.nrows();
    let scale = fro(a).max(fro(b)).max(f64::MIN_POSITIVE);
    let thr = tol * scale;
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    let mut block = b.clone();
    while basis.len() < n && block.ncols() > 0 {
        for _ in 0..2 {
            for v in &basis {
                let coeffs = v.adjoint() * &block;
                block -= v * coeffs;
            }
        }
        if fro(&block) <= thr {
            break;
        }
        let svd = matrix::Svd::new(&block);
        let u = svd.u;
        let mut added = Vec::new();
        for (k, &s) in svd.s.iter().enumerate() {
            if s > thr && basis.len() + added.len() < n {
                added.push(u.column(k).into_owned());
            }
        }
        if added.is_empty() {
            break;
        }
        // re-orthogonalize the new directions against the basis once more
        for v in added.iter_mut() {
            for w in &basis {
                let coeff = (w.adjoint() * &*v)[(0, 0)];
                *v -= w * coeff;
            }
            let nrm = v.norm();
            *v /= c(nrm, 0.0);
        }
        let new_block = CMat::from_columns(&added);
        basis.extend(added);
        block = a * new_block;
    }
    if basis.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&basis)
    }
}

/// Uniform grid `θ_k = −π + 2πk/N`, `k = 0..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    thetas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn uniform(count: usize) -> Self {
        assert!(count > 0, "grid needs at least one point");
        let step = 2.0 * PI / count as f64;
        FrequencyGrid { thetas: (0..count).map(|k| -PI + step * k as f64).collect() }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Trapezoidal rule over the periodic grid, normalized by 2π.
    pub fn mean<F>(&self, mut f: F) -> CMat
    where
        F: FnMut(f64) -> CMat,
    {
        let mut acc: Option<CMat> = None;
        for &t in &self.thetas {
            let v = f(t);
            acc = Some(match acc {
                Some(s) => s + v,
                None => v,
            });
        }
        acc.expect("non-empty grid") / c(self.thetas.len() as f64, 0.0)
    }
}

/// Which side of the spectrum the factor sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `Φ = W W*`
    Left,
    /// `Φ = H* H`
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralFactor {
    pub realization: Realization,
    pub side: Side,
}

impl SpectralFactor {
    pub fn left(realization: Realization) -> Self {
        SpectralFactor { realization, side: Side::Left }
    }

    pub fn right(realization: Realization) -> Self {
        SpectralFactor { realization, side: Side::Right }
    }

    /// Spectrum value at `e^{jθ}`.
    pub fn spectrum(&self, theta: f64) -> Result<Hermitian> {
        let f = self.realization.eval(theta)?;
        Ok(match self.side {
            Side::Left => Hermitian::symmetrize(&f * f.adjoint()),
            Side::Right => Hermitian::symmetrize(f.adjoint() * &f),
        })
    }
}

/// `Z(z)` with `Φ = Z + Z*` on the circle.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalPart {
    pub realization: Realization,
}

impl CausalPart {
    pub fn spectrum(&self, theta: f64) -> Result<Hermitian> {
        let z = self.realization.eval(theta)?;
        Ok(Hermitian::symmetrize(&z + z.adjoint()))
    }

    /// Sum of causal parts, i.e. the causal part of the summed spectra.
    pub fn add(&self, other: &CausalPart) -> Result<CausalPart> {
        Ok(CausalPart { realization: self.realization.parallel(&other.realization)? })
    }
}

/// `∫ W W*` over the circle: `CΠC* + DD*` with `Π = AΠA* + BB*`.
pub fn lyapunov_integral(w: &Realization) -> Result<Hermitian> {
    let dd = Hermitian::symmetrize(&w.d * w.d.adjoint());
    if w.states() == 0 {
        return Ok(dd);
    }
    let bb = Hermitian::symmetrize(&w.b * w.b.adjoint());
    let pi = solve_discrete_lyapunov(&w.a, &bb)?;
    Ok(&pi.congruence(&w.c) + &dd)
}

/// Causal part of `W W*`: `Z(z) = C(zI−A)⁻¹(AΠC* + BD*) + ½(CΠC* + DD*)`.
pub fn causal_part(w: &Realization) -> Result<CausalPart> {
    let dd = &w.d * w.d.adjoint();
    if w.states() == 0 {
        return Ok(CausalPart { realization: Realization::constant(dd * c(0.5, 0.0)) });
    }
    let bb = Hermitian::symmetrize(&w.b * w.b.adjoint());
    let pi = solve_discrete_lyapunov(&w.a, &bb)?;
    let g = &w.a * pi.matrix() * w.c.adjoint() + &w.b * w.d.adjoint();
    let c0 = Hermitian::symmetrize(&w.c * pi.matrix() * w.c.adjoint() + dd);
    Ok(CausalPart {
        realization: Realization { a: w.a.clone(), b: g, c: w.c.clone(), d: c0.matrix() * c(0.5, 0.0) },
    })
}

/// Minimum phase left factor of `Φ = Z + Z*` from the stabilizing solution of
/// the filtering Riccati equation
/// `P = APA* + (G − APC*)(Σ − CPC*)⁻¹(G* − CPA*)` with `Σ = 2 D_Z`.
pub fn min_phase_factor(z: &CausalPart) -> Result<SpectralFactor> {
    let zr = z.realization.minimal_default();
    if zr.outputs() != zr.inputs() {
        return Err(FactorError::DimensionMismatch("causal part must be square".into()));
    }
    zr.check_stable()?;
    let sigma = Hermitian::symmetrize(&zr.d * c(2.0, 0.0));
    let smin = matrix::min_eigenvalue(&sigma);
    if smin <= 0.0 {
        return Err(FactorError::NotCoercive(format!(
            "zeroth moment not positive definite (min eigenvalue {smin:e})"
        )));
    }
    if zr.states() == 0 {
        return Ok(SpectralFactor::left(Realization::constant(
            hermitian_sqrt(&sigma)?.into_matrix(),
        )));
    }
    // With X = −P the equation is a control-type Riccati equation in
    // (A*, C*) with weight Σ and cross term G.
    let ah = zr.a.adjoint();
    let ch = zr.c.adjoint();
    let zero = Hermitian::zeros(zr.states());
    let sol = solve_riccati(&RiccatiProblem { a: &ah, b: &ch, q: &zero, r: &sigma, s: Some(&zr.b) })
        .map_err(|e| FactorError::NotCoercive(e.to_string()))?;
    let p = sol.x.scale(-1.0);
    let dsq = Hermitian::symmetrize(sigma.matrix() - &zr.c * p.matrix() * zr.c.adjoint());
    let dmin = matrix::min_eigenvalue(&dsq);
    if dmin <= 0.0 {
        return Err(FactorError::NotCoercive(format!("Σ − CPC* min eigenvalue {dmin:e}")));
    }
    let d = hermitian_sqrt(&dsq)?.into_matrix();
    let d_inv_sqrt = hermitian_inv_sqrt(&dsq)?.into_matrix();
    let b = (&zr.b - &zr.a * p.matrix() * zr.c.adjoint()) * d_inv_sqrt;
    Ok(SpectralFactor::left(Realization { a: zr.a, b, c: zr.c, d }))
}

/// Realization of `F⁻¹`: `(A − BD⁻¹C, BD⁻¹, −D⁻¹C, D⁻¹)`.
pub fn invert_realization(f: &Realization) -> Result<Realization> {
    if f.inputs() != f.outputs() {
        return Err(FactorError::DimensionMismatch("inverse of non-square transfer function".into()));
    }
    let dinv = matrix::inverse_checked(&f.d, MAX_D_CONDITION).map_err(|_| FactorError::SingularD)?;
    let bd = &f.b * &dinv;
    Ok(Realization {
        a: &f.a - &bd * &f.c,
        b: bd,
        c: -(&dinv * &f.c),
        d: dinv,
    })
}

/// Orthonormal basis of `ker M` for `M` with orthonormal rows.
fn kernel_of_coisometry(m: &CMat) -> CMat {
    let (r, k) = m.shape();
    let mut aug = CMat::zeros(k, r + k);
    aug.view_mut((0, 0), (k, r)).copy_from(&m.adjoint());
    aug.view_mut((0, r), (k, k)).copy_from(&identity(k));
    let q = aug.qr().q();
    q.columns(r, k - r).into_owned()
}

/// Left factor from a right factor: given `H` with `Φ = H*H`, returns `H₁` with
/// `H₁ H₁* = Φ`, where
/// `H₁(z) = (D*C + B*PA)(zI − A)⁻¹G + B*PG + D*J`, `P = A*PA + C*C`,
/// `G = P^{-1/2}K` and `[K; J]` an orthonormal basis of `ker [A*P^{1/2}, C*]`.
pub fn right_to_left(h: &SpectralFactor) -> Result<SpectralFactor> {
    let r = &h.realization;
    if h.side != Side::Right {
        return Err(FactorError::DimensionMismatch("right_to_left needs a right factor".into()));
    }
    if r.states() == 0 {
        // H*H = D*D; a left factor with the same spectrum is D* (up to unitary).
        return Ok(SpectralFactor::left(Realization::constant(r.d.adjoint())));
    }
    r.check_stable()?;
    let ah = r.a.adjoint();
    let cc = Hermitian::symmetrize(r.c.adjoint() * &r.c);
    let p = solve_discrete_lyapunov(&ah, &cc)?;
    let (vals, _) = p.eigen();
    let pmin = vals[0];
    let pmax = *vals.last().unwrap();
    if pmin < 1e-10 * pmax || pmax <= 0.0 {
        return Err(FactorError::SingularObservabilityGramian(pmin));
    }
    let p_half = hermitian_sqrt(&p)?.into_matrix();
    let p_inv_half = hermitian_inv_sqrt(&p)?.into_matrix();
    let n = r.states();
    let q = r.outputs();
    // P^{-1/2}[A*P^{1/2}, C*] has orthonormal rows
    let mut m = CMat::zeros(n, n + q);
    m.view_mut((0, 0), (n, n)).copy_from(&(&p_inv_half * &ah * &p_half));
    m.view_mut((0, n), (n, q)).copy_from(&(&p_inv_half * r.c.adjoint()));
    let kj = kernel_of_coisometry(&m);
    let k = kj.rows(0, n).into_owned();
    let j = kj.rows(n, q).into_owned();
    let g = &p_inv_half * k;
    let pm = p.matrix();
    let bh = r.b.adjoint();
    let c1 = r.d.adjoint() * &r.c + &bh * pm * &r.a;
    let d1 = &bh * pm * &g + r.d.adjoint() * j;
    Ok(SpectralFactor::left(Realization { a: r.a.clone(), b: g, c: c1, d: d1 }))
}

/// Right factor from a left factor through the `ζ = z⁻¹` transposition:
/// `W₁ = dual(right_to_left(dual(W)))`.
pub fn left_to_right(w: &SpectralFactor) -> Result<SpectralFactor> {
    if w.side != Side::Left {
        return Err(FactorError::DimensionMismatch("left_to_right needs a left factor".into()));
    }
    let h = SpectralFactor::right(w.realization.dual());
    let h1 = right_to_left(&h)?;
    Ok(SpectralFactor::right(h1.realization.dual()))
}

/// Co-analytic minimum phase factorization `Q_Λ = Δ* Δ` of
/// `Q_Λ(z) = I + G*(z) Λ G(z)`, `G(z) = (zI − A)⁻¹B`.
#[derive(Clone, Debug)]
pub struct QFactorization {
    /// Stabilizing solution of `P = A*PA − A*PB(B*PB + I)⁻¹B*PA + Λ`.
    pub p: Hermitian,
    pub delta: Realization,
    pub delta_inv: Realization,
    /// `A − B(B*PB + I)⁻¹B*PA`
    pub closed_loop: CMat,
}

impl QFactorization {
    /// `G(z) Δ⁻¹(z) = (zI − Γ)⁻¹ B N⁻¹`, with `Γ` the closed loop matrix.
    pub fn filtered_inverse(&self) -> Realization {
        Realization::resolvent(self.closed_loop.clone(), self.delta_inv.b.clone())
    }

    /// `Q_Λ(e^{jθ})⁻¹ = Δ⁻¹ Δ⁻*`.
    pub fn q_inverse(&self, theta: f64) -> Result<CMat> {
        let di = self.delta_inv.eval(theta)?;
        Ok(&di * di.adjoint())
    }
}

pub fn factorize_q(a: &CMat, b: &CMat, lambda: &Hermitian) -> Result<QFactorization> {
    if lambda.dim() != a.nrows() || b.nrows() != a.nrows() {
        return Err(FactorError::DimensionMismatch("factorize_q".into()));
    }
    let sol = matrix::dare_control(a, b, lambda).map_err(|e| FactorError::NotInDomain(e.to_string()))?;
    let w = sol.weight; // B*PB + I
    let n_mat = hermitian_sqrt(&w)?.into_matrix();
    let n_inv = hermitian_inv_sqrt(&w)?.into_matrix();
    let bpa = b.adjoint() * sol.x.matrix() * a;
    let m = &n_inv * &bpa;
    let delta = Realization { a: a.clone(), b: b.clone(), c: m.clone(), d: n_mat };
    let delta_inv = Realization {
        a: sol.closed_loop.clone(),
        b: b * &n_inv,
        c: -(&n_inv * &m),
        d: n_inv,
    };
    Ok(QFactorization { p: sol.x, delta, delta_inv, closed_loop: sol.closed_loop })
}
