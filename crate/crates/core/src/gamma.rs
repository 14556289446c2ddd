//! The moment operator `Γ(Φ) = ∫ G Φ G*` of a filter bank and its range.
//!
//! `Range Γ` is a real vector space of Hermitian matrices. It is spanned by
//! the solutions `Σ_k` of `Σ_k − AΣ_kA* = BH_k + H_k*B*` as `H_k` runs over
//! a real basis of `C^{m×n}`; [`GammaBasis`] keeps both those generators and
//! an orthonormal subset obtained by Gram–Schmidt.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::cmat;
use crate::matrix::{
    self, c, hermitian_inv_sqrt, hermitian_sqrt, solve_discrete_lyapunov, CMat, Hermitian,
    LinalgError,
};
use crate::statespace::{
    lyapunov_integral, reachable_basis, FactorError, Realization, Side, SpectralFactor,
};

/// Gram–Schmidt drop tolerance, relative to the largest generator norm.
pub const GRAM_SCHMIDT_TOL: f64 = 1e-10;

/// Default relative tolerance for [`feasibility_check`].
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GammaError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("filter bank A is not stable (spectral radius {0})")]
    NotStable(f64),
    #[error("(A, B) is not reachable (reachable dimension {reachable} of {states})")]
    NotReachable { reachable: usize, states: usize },
    #[error("B does not have full column rank")]
    RankDeficientB,
    #[error("Sigma is not positive definite (min eigenvalue {0:e})")]
    NotPd(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, GammaError>;

/// `G(z) = (zI − A)⁻¹B` with `A` stable and `(A, B)` reachable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterBankJson", into = "FilterBankJson")]
pub struct FilterBank {
    a: CMat,
    b: CMat,
}

#[derive(Serialize, Deserialize)]
struct FilterBankJson {
    #[serde(rename = "A", with = "cmat")]
    a: CMat,
    #[serde(rename = "B", with = "cmat")]
    b: CMat,
}

impl TryFrom<FilterBankJson> for FilterBank {
    type Error = GammaError;
    fn try_from(j: FilterBankJson) -> Result<Self> {
        FilterBank::new(j.a, j.b)
    }
}

impl From<FilterBank> for FilterBankJson {
    fn from(g: FilterBank) -> Self {
        FilterBankJson { a: g.a, b: g.b }
    }
}

impl FilterBank {
    pub fn new(a: CMat, b: CMat) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || n == 0 || b.ncols() == 0 {
            return Err(GammaError::DimensionMismatch(format!(
                "filter bank A {:?}, B {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let rho = matrix::spectral_radius(&a)?;
        if rho >= 1.0 - matrix::STABILITY_MARGIN {
            return Err(GammaError::NotStable(rho));
        }
        if b.ncols() > n {
            return Err(GammaError::RankDeficientB);
        }
        let sv = matrix::singular_values(&b);
        if *sv.last().expect("non-empty") <= 1e-9 * sv[0] {
            return Err(GammaError::RankDeficientB);
        }
        let reach = reachable_basis(&a, &b, 1e-9).ncols();
        if reach < n {
            return Err(GammaError::NotReachable { reachable: reach, states: n });
        }
        Ok(FilterBank { a, b })
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn realization(&self) -> Realization {
        Realization::resolvent(self.a.clone(), self.b.clone())
    }

    pub fn eval(&self, theta: f64) -> std::result::Result<CMat, FactorError> {
        self.realization().eval(theta)
    }

    /// Steady-state state covariance for a white unit-variance input: `Γ(I)`.
    pub fn white_noise_covariance(&self) -> Result<Hermitian> {
        let bb = Hermitian::symmetrize(&self.b * self.b.adjoint());
        Ok(solve_discrete_lyapunov(&self.a, &bb)?)
    }
}

/// `Γ(Φ) = ∫ G Φ G*` for `Φ = W W*`.
pub fn gamma_apply(g: &FilterBank, w: &SpectralFactor) -> Result<Hermitian> {
    if w.side != Side::Left {
        return Err(GammaError::DimensionMismatch("gamma_apply needs a left factor".into()));
    }
    if w.realization.outputs() != g.inputs() {
        return Err(GammaError::DimensionMismatch(format!(
            "spectrum of size {} for a bank with {} inputs",
            w.realization.outputs(),
            g.inputs()
        )));
    }
    let gw = g.realization().series(&w.realization)?;
    Ok(lyapunov_integral(&gw)?)
}

/// Spanning data for `Range Γ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaBasis {
    /// `H_k`, the canonical real basis of `C^{m×n}` in processing order.
    #[serde(skip)]
    h_base: Vec<CMat>,
    generators: Vec<Hermitian>,
    orthonormal: Vec<Hermitian>,
}

impl GammaBasis {
    pub fn generators(&self) -> &[Hermitian] {
        &self.generators
    }

    pub fn h_base(&self) -> &[CMat] {
        &self.h_base
    }

    pub fn orthonormal(&self) -> &[Hermitian] {
        &self.orthonormal
    }

    /// Real dimension `d` of `Range Γ`.
    pub fn dimension(&self) -> usize {
        self.orthonormal.len()
    }

    pub fn matrix_dim(&self) -> usize {
        self.orthonormal.first().map_or(0, Hermitian::dim)
    }

    /// Coordinates of `M` over the orthonormal basis.
    pub fn coordinates(&self, m: &Hermitian) -> Vec<f64> {
        self.orthonormal.iter().map(|e| m.inner(e)).collect()
    }

    /// `Σ_k x_k e_k`.
    pub fn combine(&self, coords: &[f64]) -> Hermitian {
        assert_eq!(coords.len(), self.dimension(), "coordinate length");
        let mut acc = Hermitian::zeros(self.matrix_dim());
        for (x, e) in coords.iter().zip(&self.orthonormal) {
            acc = acc.add_scaled(*x, e);
        }
        acc
    }
}

/// Canonical real basis of `C^{m×n}`: for each entry (row-major) the real
/// unit then the imaginary unit.
fn canonical_h_base(m: usize, n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(2 * m * n);
    for i in 0..m {
        for j in 0..n {
            for unit in [c(1.0, 0.0), c(0.0, 1.0)] {
                let mut h = CMat::zeros(m, n);
                h[(i, j)] = unit;
                out.push(h);
            }
        }
    }
    out
}

/// Builds generators from the canonical `H` base in its natural order.
pub fn build_gamma_basis(g: &FilterBank) -> Result<GammaBasis> {
    build_gamma_basis_with(g, canonical_h_base(g.inputs(), g.states()))
}

/// Builds generators from a caller-supplied `H` base (processing order matters
/// only for which orthonormal set is produced, not for its span).
pub fn build_gamma_basis_with(g: &FilterBank, h_base: Vec<CMat>) -> Result<GammaBasis> {
    let (n, m) = (g.states(), g.inputs());
    let mut generators = Vec::with_capacity(h_base.len());
    for h in &h_base {
        if h.shape() != (m, n) {
            return Err(GammaError::DimensionMismatch("H base element shape".into()));
        }
        let rhs = Hermitian::symmetrize(g.b() * h * c(2.0, 0.0));
        generators.push(solve_discrete_lyapunov(g.a(), &rhs)?);
    }
    let scale = generators.iter().map(Hermitian::norm).fold(0.0, f64::max);
    let mut orthonormal: Vec<Hermitian> = Vec::new();
    for s in &generators {
        let mut v = s.clone();
        for _ in 0..2 {
            for e in &orthonormal {
                v = v.add_scaled(-v.inner(e), e);
            }
        }
        let nrm = v.norm();
        if nrm > GRAM_SCHMIDT_TOL * scale.max(f64::MIN_POSITIVE) {
            orthonormal.push(v.scale(1.0 / nrm));
        }
    }
    Ok(GammaBasis { h_base, generators, orthonormal })
}

/// Orthogonal projection onto `Range Γ` under `⟨A, B⟩ = Re tr(AB*)`.
pub fn project_onto_range(basis: &GammaBasis, m: &Hermitian) -> Result<Hermitian> {
    if m.dim() != basis.matrix_dim() {
        return Err(GammaError::DimensionMismatch(format!(
            "matrix of size {} vs range of {}x{} matrices",
            m.dim(),
            basis.matrix_dim(),
            basis.matrix_dim()
        )));
    }
    Ok(basis.combine(&basis.coordinates(m)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// `‖Σ − P(Σ)‖_F`
    pub residual: f64,
}

/// Membership test `‖Σ − P(Σ)‖_F ≤ tol (1 + ‖Σ‖_F)`.
pub fn feasibility_check(basis: &GammaBasis, sigma: &Hermitian, tol: f64) -> Result<Feasibility> {
    let p = project_onto_range(basis, sigma)?;
    let residual = (sigma - &p).norm();
    Ok(Feasibility { feasible: residual <= tol * (1.0 + sigma.norm()), residual })
}

/// Change of basis `Ā = Σ^{-1/2} A Σ^{1/2}`, `B̄ = Σ^{-1/2} B`, after which
/// the moment constraint reads `∫ Ḡ Φ Ḡ* = I`.
pub fn normalize_to_identity(g: &FilterBank, sigma: &Hermitian) -> Result<FilterBank> {
    if sigma.dim() != g.states() {
        return Err(GammaError::DimensionMismatch("Sigma vs bank size".into()));
    }
    let lo = matrix::min_eigenvalue(sigma);
    if lo <= 1e-10 * sigma.norm() {
        return Err(GammaError::NotPd(lo));
    }
    let half = hermitian_sqrt(sigma)?.into_matrix();
    let inv_half = hermitian_inv_sqrt(sigma)?.into_matrix();
    FilterBank::new(&inv_half * g.a() * half, &inv_half * g.b())
}
