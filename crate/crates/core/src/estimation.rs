//! Spectral estimation from data: feed the samples through a filter bank,
//! estimate the steady-state state covariance, project it onto `Range Γ`,
//! pick a prior and refine it with the Hellinger approximation.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamma::{
    build_gamma_basis, gamma_apply, normalize_to_identity, project_onto_range, FilterBank,
    GammaBasis, GammaError, FEASIBILITY_TOL,
};
use crate::matrix::{self, c, hermitian_inv_sqrt, CMat, Hermitian, LinalgError};
use crate::newton::{hellinger_distance, DualProblem, NewtonError, Prior, SolverConfig, SolverTrace};
use crate::series::TimeSeries;
use crate::statespace::{FactorError, FrequencyGrid, Realization, SpectralFactor};

/// Poles closer than this are treated as repeated.
pub const POLE_SEPARATION: f64 = 1e-12;

/// Relative eigenvalue floor of the projected covariance, measured after
/// whitening by `Γ(I)`.
pub const PROJECTION_PD_TOL: f64 = 1e-8;

/// Relative eigenvalue floor below which a grid spectrum is not PSD.
pub const PSD_CLIP_TOL: f64 = 1e-10;

pub const MAX_AR_ORDER: usize = 10;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("pole {0} is repeated")]
    DuplicatePole(Complex64),
    #[error("pole {0} is not inside the unit disk")]
    PoleOutsideDisk(Complex64),
    #[error("complex pole {0} has no conjugate partner")]
    UnpairedPole(Complex64),
    #[error("{available} samples after burn-in, need at least {needed}")]
    TooFewSamples { available: usize, needed: usize },
    #[error("projected covariance is not positive definite (min eigenvalue {min:e}, norm {norm:e})")]
    ProjectionNotPd { min: f64, norm: f64 },
    #[error("sample covariance is singular (min eigenvalue {0:e})")]
    DegenerateSamples(f64),
    #[error("autocovariance Toeplitz matrix is singular")]
    SingularToeplitz,
    #[error("grid spectrum not PSD at node {node} (min eigenvalue {min:e})")]
    NotPsd { node: usize, min: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error(transparent)]
    Newton(#[from] NewtonError),
    #[error("{stage}: {source}")]
    Stage { stage: Stage, source: Box<EstimationError> },
}

impl EstimationError {
    /// The error with pipeline annotations stripped.
    pub fn root(&self) -> &EstimationError {
        match self {
            EstimationError::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            EstimationError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, EstimationError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Covariance,
    Projection,
    Normalization,
    Prior,
    Solve,
    Spectrum,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Covariance => "covariance estimation",
            Stage::Projection => "projection onto Range Γ",
            Stage::Normalization => "normalization",
            Stage::Prior => "prior construction",
            Stage::Solve => "Newton solve",
            Stage::Spectrum => "optimal spectrum",
        })
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<EstimationError>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| EstimationError::Stage { stage, source: Box::new(e.into()) })
    }
}

/// Shift-register bank: `Σ` is Toeplitz in the input lags `c₀, ..., c_{n−1}`.
pub fn build_g_covariance_extension(n: usize) -> Result<FilterBank> {
    if n == 0 {
        return Err(EstimationError::Invalid("bank needs at least one state".into()));
    }
    let mut a = CMat::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = c(1.0, 0.0);
    }
    let mut b = CMat::zeros(n, 1);
    b[(n - 1, 0)] = c(1.0, 0.0);
    Ok(FilterBank::new(a, b)?)
}

/// `A = diag(p_i)`, `B` a column of ones. With `real_structured` each
/// conjugate pair becomes the real block `[[Re p, Im p], [−Im p, Re p]]`.
pub fn build_g_from_poles(poles: &[Complex64], real_structured: bool) -> Result<FilterBank> {
    let a = pole_matrix(poles, real_structured)?;
    let n = a.nrows();
    Ok(FilterBank::new(a, CMat::from_element(n, 1, c(1.0, 0.0)))?)
}

fn pole_matrix(poles: &[Complex64], real_structured: bool) -> Result<CMat> {
    if poles.is_empty() {
        return Err(EstimationError::Invalid("empty pole list".into()));
    }
    for (i, p) in poles.iter().enumerate() {
        if !(p.norm() < 1.0) {
            return Err(EstimationError::PoleOutsideDisk(*p));
        }
        if poles[..i].iter().any(|q| (p - q).norm() <= POLE_SEPARATION) {
            return Err(EstimationError::DuplicatePole(*p));
        }
    }
    let n = poles.len();
    let mut a = CMat::zeros(n, n);
    if !real_structured {
        for (i, p) in poles.iter().enumerate() {
            a[(i, i)] = *p;
        }
        return Ok(a);
    }
    let mut used = vec![false; n];
    let mut k = 0;
    for i in 0..n {
        if used[i] {
            continue;
        }
        used[i] = true;
        let p = poles[i];
        if p.im.abs() <= POLE_SEPARATION {
            a[(k, k)] = c(p.re, 0.0);
            k += 1;
            continue;
        }
        let partner = (i + 1..n)
            .find(|&j| !used[j] && (poles[j] - p.conj()).norm() <= POLE_SEPARATION)
            .ok_or(EstimationError::UnpairedPole(p))?;
        used[partner] = true;
        let (re, im) = (p.re, p.im.abs());
        a[(k, k)] = c(re, 0.0);
        a[(k, k + 1)] = c(im, 0.0);
        a[(k + 1, k)] = c(-im, 0.0);
        a[(k + 1, k + 1)] = c(re, 0.0);
        k += 2;
    }
    Ok(a)
}

/// Poles of the narrow-band bank used for line detection near 0.42–0.53 rad.
pub fn sinusoid_poles() -> Vec<Complex64> {
    let mut p = vec![c(0.0, 0.0), c(0.85, 0.0), c(-0.85, 0.0)];
    for k in 0..5 {
        let w = 0.42 + 0.02 * k as f64;
        p.push(Complex64::from_polar(0.9, w));
        p.push(Complex64::from_polar(0.9, -w));
    }
    p
}

pub fn sinusoid_bank() -> FilterBank {
    build_g_from_poles(&sinusoid_poles(), true).expect("fixed pole list is valid")
}

/// Two-input bank: one pole at the origin and four conjugate pairs of radius
/// 0.9 at angles `kπ/5`, real block-diagonal. `B` has a column of ones and a
/// column with `1` on the origin state and `(1, −1)` on every block.
pub fn bivariate_bank() -> FilterBank {
    let mut poles = vec![c(0.0, 0.0)];
    for k in 1..=4 {
        let w = k as f64 * PI / 5.0;
        poles.push(Complex64::from_polar(0.9, w));
        poles.push(Complex64::from_polar(0.9, -w));
    }
    let a = pole_matrix(&poles, true).expect("fixed pole list is valid");
    let n = a.nrows();
    let b = CMat::from_fn(n, 2, |i, j| {
        if j == 0 || i == 0 || i % 2 == 1 {
            c(1.0, 0.0)
        } else {
            c(-1.0, 0.0)
        }
    });
    FilterBank::new(a, b).expect("fixed bank is reachable")
}

/// `max(10n, 100)`, lowered to `N − 10n` when the record is too short for it.
pub fn default_burn_in(states: usize, samples: usize) -> usize {
    let wanted = (10 * states).max(100);
    wanted.min(samples.saturating_sub(10 * states))
}

/// Runs `x_{t+1} = A x_t + B y_t` from `x = 0` and averages `x x*` over the
/// `N − M` states after the burn-in.
pub fn filter_covariance(g: &FilterBank, y: &TimeSeries, burn_in: usize) -> Result<Hermitian> {
    let n = g.states();
    if y.dim() != g.inputs() {
        return Err(EstimationError::Invalid(format!(
            "{}-dimensional data for a bank with {} inputs",
            y.dim(),
            g.inputs()
        )));
    }
    let available = y.len().saturating_sub(burn_in);
    if available < 10 * n {
        return Err(EstimationError::TooFewSamples { available, needed: 10 * n });
    }
    let (a, b) = (g.a(), g.b());
    let mut x = vec![c(0.0, 0.0); n];
    let mut next = vec![c(0.0, 0.0); n];
    let mut acc = CMat::zeros(n, n);
    for (t, s) in y.samples().enumerate() {
        for i in 0..n {
            let mut v = c(0.0, 0.0);
            for j in 0..n {
                v += a[(i, j)] * x[j];
            }
            for (j, u) in s.iter().enumerate() {
                v += b[(i, j)] * u;
            }
            next[i] = v;
        }
        std::mem::swap(&mut x, &mut next);
        if t >= burn_in {
            for i in 0..n {
                for j in i..n {
                    acc[(i, j)] += x[i] * x[j].conj();
                }
            }
        }
    }
    for i in 0..n {
        acc[(i, i)].im = 0.0;
        for j in 0..i {
            acc[(i, j)] = acc[(j, i)].conj();
        }
    }
    Ok(Hermitian::symmetrize(acc / c(available as f64, 0.0)))
}

/// Orthogonal projection of `Σ̂` onto `Range Γ`, which must stay positive
/// definite. Positivity is judged on `Γ(I)^{-1/2} Σ̂_Γ Γ(I)^{-1/2}`, which has
/// the same inertia and is well conditioned whenever the input spectrum is,
/// even for banks with clustered poles where `Γ(I)` itself is not.
pub fn prepare_sigma(g: &FilterBank, basis: &GammaBasis, sigma_hat: &Hermitian) -> Result<Hermitian> {
    let p = project_onto_range(basis, sigma_hat)?;
    let white = hermitian_inv_sqrt(&g.white_noise_covariance()?)?;
    let w = p.congruence(white.matrix());
    let min = matrix::min_eigenvalue(&w);
    let norm = matrix::max_eigenvalue(&w).abs().max(min.abs());
    if !(min > PROJECTION_PD_TOL * norm) {
        return Err(EstimationError::ProjectionNotPd { min, norm });
    }
    Ok(p)
}

/// Tolerance for `I ∈ Range Γ` after normalizing by `Σ`: rounding leaves
/// `I` off the range by about `ε·cond(Σ)`.
pub fn normalized_feasibility_tol(sigma: &Hermitian) -> f64 {
    let cond = matrix::max_eigenvalue(sigma) / matrix::min_eigenvalue(sigma);
    FEASIBILITY_TOL.max(64.0 * f64::EPSILON * cond)
}

/// `(1/(N−1)) Σ y_t y_t*`
pub fn sample_covariance(y: &TimeSeries) -> Result<Hermitian> {
    if y.len() < 2 {
        return Err(EstimationError::TooFewSamples { available: y.len(), needed: 2 });
    }
    let m = y.dim();
    let mut acc = CMat::zeros(m, m);
    for s in y.samples() {
        for i in 0..m {
            for j in 0..m {
                acc[(i, j)] += s[i] * s[j].conj();
            }
        }
    }
    Ok(Hermitian::symmetrize(acc / c((y.len() - 1) as f64, 0.0)))
}

/// `Ψ ≡` sample covariance of `y`.
pub fn constant_prior(y: &TimeSeries) -> Result<Prior> {
    let psi = sample_covariance(y)?;
    let lo = matrix::min_eigenvalue(&psi);
    if lo <= 0.0 {
        return Err(EstimationError::DegenerateSamples(lo));
    }
    Prior::constant(&psi).map_err(|e| match e {
        NewtonError::NotCoercive(_) => EstimationError::DegenerateSamples(lo),
        e => e.into(),
    })
}

/// Scalar AR model `y_t + a₁y_{t−1} + ... + a_p y_{t−p} = e_t`, `E|e_t|² = σ²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub coefficients: Vec<Complex64>,
    pub noise_variance: f64,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// `a(z) = 1 + Σ a_k z^{−k}`
    pub fn denominator(&self) -> Vec<Complex64> {
        let mut d = vec![c(1.0, 0.0)];
        d.extend_from_slice(&self.coefficients);
        d
    }

    /// `W(z) = σ / a(z)`
    pub fn factor(&self) -> Result<Realization> {
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(EstimationError::Invalid("AR noise variance must be positive".into()));
        }
        rational_realization(&[c(self.noise_variance.sqrt(), 0.0)], &self.denominator())
    }

    pub fn prior(&self) -> Result<Prior> {
        if self.order() == 0 {
            return Ok(Prior::constant(&Hermitian::from_diagonal(&[self.noise_variance]))?);
        }
        Ok(Prior::new(self.factor()?)?)
    }

    /// `σ² / |a(e^{jθ})|²`
    pub fn spectrum(&self, theta: f64) -> f64 {
        let a = poly_eval(&self.denominator(), Complex64::from_polar(1.0, -theta));
        self.noise_variance / a.norm_sqr()
    }
}

/// `Σ_k p_k w^k`
fn poly_eval(p: &[Complex64], w: Complex64) -> Complex64 {
    p.iter().rev().fold(c(0.0, 0.0), |acc, &k| acc * w + k)
}

/// Realization of `(Σ b_k z^{−k}) / (Σ a_k z^{−k})` in controller form.
pub fn rational_realization(num: &[Complex64], den: &[Complex64]) -> Result<Realization> {
    let a0 = *den.first().ok_or_else(|| EstimationError::Invalid("empty denominator".into()))?;
    if a0.norm() == 0.0 || num.is_empty() {
        return Err(EstimationError::Invalid("denominator must start with a nonzero term".into()));
    }
    let p = num.len().max(den.len()) - 1;
    let coef = |v: &[Complex64], k: usize| v.get(k).copied().unwrap_or(c(0.0, 0.0)) / a0;
    let d = coef(num, 0);
    if p == 0 {
        return Ok(Realization::constant(CMat::from_element(1, 1, d)));
    }
    let mut a = CMat::zeros(p, p);
    for k in 0..p {
        a[(0, k)] = -coef(den, k + 1);
        if k + 1 < p {
            a[(k + 1, k)] = c(1.0, 0.0);
        }
    }
    let mut b = CMat::zeros(p, 1);
    b[(0, 0)] = c(1.0, 0.0);
    let cc = CMat::from_fn(1, p, |_, k| coef(num, k + 1) - d * coef(den, k + 1));
    Ok(Realization::new(a, b, cc, CMat::from_element(1, 1, d))?)
}

/// Sample autocovariances `r_k = (1/(N−1)) Σ_t y_t ȳ_{t−k}`, `k = 0..=p`.
pub fn autocovariances(y: &TimeSeries, p: usize) -> Result<Vec<Complex64>> {
    if y.dim() != 1 {
        return Err(EstimationError::Invalid("autocovariances need a scalar series".into()));
    }
    let n = y.len();
    if n < 2 || p >= n {
        return Err(EstimationError::TooFewSamples { available: n, needed: p + 2 });
    }
    let v: Vec<Complex64> = y.samples().map(|s| s[0]).collect();
    let scale = 1.0 / (n - 1) as f64;
    Ok((0..=p)
        .map(|k| (k..n).map(|t| v[t] * v[t - k].conj()).sum::<Complex64>() * scale)
        .collect())
}

/// AR(p) fit from the Yule–Walker normal equations. Roots of `a` outside the
/// unit circle are reflected to `1/r̄` with `σ²` rescaled so that the
/// spectrum is unchanged.
pub fn yule_walker(y: &TimeSeries, order: usize) -> Result<ArModel> {
    if order > MAX_AR_ORDER {
        return Err(EstimationError::Invalid(format!("AR order {order} exceeds {MAX_AR_ORDER}")));
    }
    let r = autocovariances(y, order)?;
    if order == 0 {
        return Ok(ArModel { coefficients: vec![], noise_variance: r[0].re });
    }
    let lag = |k: isize| if k >= 0 { r[k as usize] } else { r[(-k) as usize].conj() };
    let toeplitz = Hermitian::symmetrize(CMat::from_fn(order, order, |i, j| {
        lag(i as isize - j as isize)
    }));
    if !(matrix::min_eigenvalue(&toeplitz) > 1e-12 * r[0].re) {
        return Err(EstimationError::SingularToeplitz);
    }
    let rhs = CMat::from_fn(order, 1, |i, _| -r[i + 1]);
    let a = matrix::solve_hpd(&toeplitz, &rhs).map_err(|_| EstimationError::SingularToeplitz)?;
    let mut coefficients: Vec<Complex64> = a.iter().copied().collect();
    let mut noise_variance =
        (r[0] + coefficients.iter().enumerate().map(|(j, aj)| aj * r[j + 1].conj()).sum::<Complex64>()).re;
    reflect_roots(&mut coefficients, &mut noise_variance, y.is_real())?;
    if !(noise_variance > 0.0) {
        return Err(EstimationError::SingularToeplitz);
    }
    Ok(ArModel { coefficients, noise_variance })
}

fn reflect_roots(a: &mut [Complex64], sigma2: &mut f64, real: bool) -> Result<()> {
    let p = a.len();
    let companion = CMat::from_fn(p, p, |i, j| {
        if i == 0 {
            -a[j]
        } else if i == j + 1 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let mut roots = matrix::eigenvalues(&companion)?;
    if roots.iter().all(|r| r.norm() < 1.0) {
        return Ok(());
    }
    for r in roots.iter_mut() {
        let m = r.norm();
        if m >= 1.0 {
            *sigma2 /= m * m;
            *r = c(1.0, 0.0) / r.conj();
        }
    }
    let mut poly = vec![c(1.0, 0.0)];
    for r in &roots {
        let mut next = poly.clone();
        next.push(c(0.0, 0.0));
        for k in 1..next.len() {
            next[k] -= r * poly[k - 1];
        }
        poly = next;
    }
    for (dst, src) in a.iter_mut().zip(&poly[1..]) {
        *dst = if real { c(src.re, 0.0) } else { *src };
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    /// Sample covariance of the data.
    Constant,
    /// Yule–Walker AR fit of the given order.
    YuleWalker { order: usize },
    /// A user supplied AR model.
    Ar { model: ArModel },
}

pub fn build_prior(kind: &PriorKind, y: &TimeSeries) -> Result<Prior> {
    match kind {
        PriorKind::Constant => constant_prior(y),
        PriorKind::YuleWalker { order: 0 } => constant_prior(y),
        PriorKind::YuleWalker { order } => yule_walker(y, *order)?.prior(),
        PriorKind::Ar { model } => {
            if y.dim() != 1 {
                return Err(EstimationError::Invalid("AR priors are scalar".into()));
            }
            model.prior()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    /// Discarded filter outputs; `None` selects [`default_burn_in`].
    pub burn_in: Option<usize>,
    pub prior: PriorKind,
    pub solver: SolverConfig,
    /// Points of the uniform output grid.
    pub grid: usize,
    /// Recorded with the results; the pipeline itself draws no random numbers.
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            burn_in: None,
            prior: PriorKind::Constant,
            solver: SolverConfig::default(),
            grid: 512,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Estimate {
    /// `Φ̂ = Ŵ Ŵ*`
    pub w_hat: SpectralFactor,
    /// Multiplier for the bank normalized to `Σ̂_Γ = I`.
    pub lambda: Hermitian,
    pub trace: SolverTrace,
    pub burn_in: usize,
    pub sigma_hat: Hermitian,
    pub sigma_projected: Hermitian,
    pub prior: Prior,
    pub grid: FrequencyGrid,
    /// `Φ̂` on the grid, negative rounding eigenvalues clipped to zero.
    pub spectrum: Vec<Hermitian>,
    pub prior_spectrum: Vec<Hermitian>,
    /// `‖Γ(Φ̂) − Σ̂_Γ‖_F / ‖Σ̂_Γ‖_F`
    pub constraint_residual: f64,
    /// `d_H(Ψ, Φ̂)` on the grid.
    pub hellinger: f64,
}

/// filter_covariance → prepare_sigma → normalize → prior → solve → `Ŵ`.
/// `Φ̂` does not depend on the normalization, which only changes `G`.
pub fn estimate_spectrum(y: &TimeSeries, g: &FilterBank, config: &EstimationConfig) -> Result<Estimate> {
    config.solver.validate().map_err(EstimationError::Invalid)?;
    if config.grid == 0 {
        return Err(EstimationError::Invalid("grid must have at least one point".into()));
    }
    let burn_in = config.burn_in.unwrap_or_else(|| default_burn_in(g.states(), y.len()));
    let sigma_hat = filter_covariance(g, y, burn_in).at(Stage::Covariance)?;
    let basis = build_gamma_basis(g).at(Stage::Projection)?;
    let sigma_projected = prepare_sigma(g, &basis, &sigma_hat).at(Stage::Projection)?;
    let normalized = normalize_to_identity(g, &sigma_projected).at(Stage::Normalization)?;
    let prior = build_prior(&config.prior, y).at(Stage::Prior)?;
    let tol = normalized_feasibility_tol(&sigma_projected);
    let problem = build_gamma_basis(&normalized)
        .map_err(NewtonError::from)
        .and_then(|b| DualProblem::with_tolerance(normalized, b, prior.clone(), tol))
        .at(Stage::Solve)?;
    let sol = problem.solve(&config.solver).at(Stage::Solve)?;
    let w_hat = problem.optimal_spectrum(&sol.lambda).at(Stage::Spectrum)?;
    let grid = FrequencyGrid::uniform(config.grid);
    let raw: Vec<Hermitian> = grid
        .thetas()
        .iter()
        .map(|&t| w_hat.spectrum(t))
        .collect::<std::result::Result<_, _>>()
        .at(Stage::Spectrum)?;
    let prior_spectrum: Vec<Hermitian> = grid
        .thetas()
        .iter()
        .map(|&t| prior.spectrum(t))
        .collect::<std::result::Result<_, _>>()
        .at(Stage::Spectrum)?;
    let hellinger = hellinger_distance(&prior_spectrum, &raw).at(Stage::Spectrum)?;
    let spectrum = clip_psd(raw).at(Stage::Spectrum)?;
    let gamma_hat = gamma_apply(g, &w_hat).at(Stage::Spectrum)?;
    let constraint_residual = (&gamma_hat - &sigma_projected).norm() / sigma_projected.norm();
    Ok(Estimate {
        w_hat,
        lambda: sol.lambda.matrix,
        trace: sol.trace,
        burn_in,
        sigma_hat,
        sigma_projected,
        prior,
        grid,
        spectrum,
        prior_spectrum,
        constraint_residual,
        hellinger,
    })
}

/// Zeroes eigenvalues in `[−tol·‖Φ‖, 0)`; anything more negative is an error.
pub fn clip_psd(values: Vec<Hermitian>) -> Result<Vec<Hermitian>> {
    values
        .into_iter()
        .enumerate()
        .map(|(node, h)| {
            let (ev, v) = h.eigen();
            let scale = ev.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
            if min >= 0.0 {
                return Ok(h);
            }
            if min < -PSD_CLIP_TOL * scale.max(1.0) {
                return Err(EstimationError::NotPsd { node, min });
            }
            let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                ev.len(),
                ev.iter().map(|&e| c(e.max(0.0), 0.0)),
            ));
            Ok(Hermitian::symmetrize(&v * d * v.adjoint()))
        })
        .collect()
}

/// Largest singular value of a Hermitian matrix.
pub fn spectral_norm(h: &Hermitian) -> f64 {
    h.eigen().0.iter().fold(0.0, |m, e| m.max(e.abs()))
}

/// Per-frequency error averaged over runs, `E(θ) = (1/R) Σ_i ‖Φ̂_i(θ) − Φ(θ)‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub thetas: Vec<f64>,
    pub mean: Vec<f64>,
    /// Runs whose error somewhere exceeds ten times the across-run median
    /// at that frequency.
    pub flagged: Vec<usize>,
}

pub fn average_error_curve(
    thetas: &[f64],
    runs: &[Vec<Hermitian>],
    truth: &[Hermitian],
) -> Result<ErrorCurve> {
    if runs.is_empty() {
        return Err(EstimationError::Invalid("no runs".into()));
    }
    if truth.len() != thetas.len() || runs.iter().any(|r| r.len() != thetas.len()) {
        return Err(EstimationError::Invalid("grid mismatch between spectra".into()));
    }
    let m = truth.first().map(Hermitian::dim).unwrap_or(0);
    if runs.iter().flatten().any(|h| h.dim() != m) {
        return Err(EstimationError::Invalid("spectra of different sizes".into()));
    }
    let errors: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.iter().zip(truth).map(|(e, t)| spectral_norm(&(e - t))).collect())
        .collect();
    let count = runs.len() as f64;
    let mean = (0..thetas.len())
        .map(|k| errors.iter().map(|e| e[k]).sum::<f64>() / count)
        .collect();
    let medians: Vec<f64> = (0..thetas.len())
        .map(|k| {
            let mut col: Vec<f64> = errors.iter().map(|e| e[k]).collect();
            col.sort_by(f64::total_cmp);
            let h = col.len() / 2;
            if col.len() % 2 == 1 {
                col[h]
            } else {
                0.5 * (col[h - 1] + col[h])
            }
        })
        .collect();
    let flagged = errors
        .iter()
        .enumerate()
        .filter(|(_, e)| e.iter().zip(&medians).any(|(x, m)| *x > 10.0 * m))
        .map(|(i, _)| i)
        .collect();
    Ok(ErrorCurve { thetas: thetas.to_vec(), mean, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::{build_gamma_basis, feasibility_check};
    use crate::matrix::{fro, identity};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, dim: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        TimeSeries::from_real(dim, &v).unwrap()
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = 0.0;
        let mut v = Vec::with_capacity(n);
        for t in 0..n + 1000 {
            let e: f64 = StandardNormal.sample(&mut rng);
            y = phi * y + e;
            if t >= 1000 {
                v.push(y);
            }
        }
        TimeSeries::from_real(1, &v).unwrap()
    }

    #[test]
    fn covariance_extension_bank_shape() {
        let g = build_g_covariance_extension(2).unwrap();
        assert_eq!(g.a(), &CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
        assert_eq!(g.b(), &CMat::from_row_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)]));
        for n in 1..=12 {
            assert!(build_g_covariance_extension(n).is_ok());
        }
        assert!(build_g_covariance_extension(0).is_err());
    }

    #[test]
    fn white_noise_gives_scaled_identity() {
        let n = 100_000;
        let g = build_g_covariance_extension(4).unwrap();
        let s = filter_covariance(&g, &white(n, 1, 3), 100).unwrap();
        // Var of a sample mean of x_i x_j for unit white noise is about 1/N.
        let band = 3.0 * (2.0 / n as f64).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s.matrix()[(i, j)].re - want).abs() < band, "{i}{j}");
            }
        }
    }

    #[test]
    fn pole_bank_examples() {
        let g = build_g_from_poles(&[c(0.0, 0.0)], false).unwrap();
        assert_eq!(g.a()[(0, 0)], c(0.0, 0.0));
        assert_eq!(g.b()[(0, 0)], c(1.0, 0.0));
        assert!((g.eval(0.3).unwrap()[(0, 0)] - Complex64::from_polar(1.0, -0.3)).norm() < 1e-15);

        let g = sinusoid_bank();
        assert_eq!(g.states(), 13);
        let mut ev = matrix::eigenvalues(g.a()).unwrap();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        let mut want = sinusoid_poles();
        want.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        for (e, w) in ev.iter().zip(&want) {
            assert!((e - w).norm() < 1e-12);
        }
        assert!(matrix::max_imag(g.a()) == 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        use rand::Rng;
        let poles: Vec<Complex64> =
            (0..7).map(|_| Complex64::from_polar(rng.gen_range(0.0..0.95), rng.gen_range(-PI..PI))).collect();
        let g = build_g_from_poles(&poles, false).unwrap();
        let reach = crate::statespace::reachable_basis(g.a(), g.b(), 1e-9);
        assert_eq!(reach.ncols(), 7);
    }

    #[test]
    fn pole_bank_errors() {
        assert!(matches!(
            build_g_from_poles(&[c(0.5, 0.0), c(0.5, 0.0)], false),
            Err(EstimationError::DuplicatePole(_))
        ));
        assert!(matches!(
            build_g_from_poles(&[c(0.6, 0.8)], false),
            Err(EstimationError::PoleOutsideDisk(_))
        ));
        assert!(matches!(
            build_g_from_poles(&[c(0.5, 0.2)], true),
            Err(EstimationError::UnpairedPole(_))
        ));
    }

    #[test]
    fn bivariate_bank_is_valid() {
        let g = bivariate_bank();
        assert_eq!((g.states(), g.inputs()), (9, 2));
        assert!(matrix::spectral_radius(g.a()).unwrap() < 0.9 + 1e-12);
    }

    #[test]
    fn zero_input_gives_zero_covariance() {
        let g = build_g_covariance_extension(3).unwrap();
        let y = TimeSeries::from_real(1, &vec![0.0; 200]).unwrap();
        assert_eq!(filter_covariance(&g, &y, 10).unwrap().norm(), 0.0);
    }

    #[test]
    fn too_few_samples() {
        let g = build_g_covariance_extension(3).unwrap();
        let y = white(50, 1, 1);
        assert!(matches!(
            filter_covariance(&g, &y, 30),
            Err(EstimationError::TooFewSamples { available: 20, needed: 30 })
        ));
        assert!(filter_covariance(&g, &y, 60).is_err());
    }

    #[test]
    fn scalar_filter_matches_lyapunov() {
        // x_{t+1} = 0.7 x_t + y_t, Π = 1/(1 − 0.49)
        let g = build_g_from_poles(&[c(0.7, 0.0)], false).unwrap();
        let n = 1_000_000;
        let s = filter_covariance(&g, &white(n, 1, 11), 1000).unwrap();
        let pi = 1.0 / (1.0 - 0.49);
        // Var of the mean of x² for an AR(1): 2Π²(1+ρ²)/(1−ρ²) / N with ρ = 0.7.
        let se = (2.0 * pi * pi * (1.0 + 0.49) / (1.0 - 0.49) / (n - 1000) as f64).sqrt();
        assert!((s.matrix()[(0, 0)].re - pi).abs() < 3.0 * se);
    }

    #[test]
    fn toeplitz_structure_improves_with_n() {
        let g = build_g_covariance_extension(4).unwrap();
        let off = |n: usize| {
            let s = filter_covariance(&g, &ar1(n, 0.6, 5), 100).unwrap();
            let m = s.matrix();
            let mut worst: f64 = 0.0;
            for i in 1..4 {
                for j in 1..4 {
                    worst = worst.max((m[(i, j)] - m[(i - 1, j - 1)]).norm());
                }
            }
            worst / fro(m)
        };
        let (small, large) = (off(2_000), off(200_000));
        assert!(large < small && large < 1e-3, "{small:e} {large:e}");
    }

    #[test]
    fn projection_examples() {
        let g = build_g_covariance_extension(3).unwrap();
        let basis = build_gamma_basis(&g).unwrap();
        let gi = g.white_noise_covariance().unwrap();
        let t = Hermitian::from_real(&nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.5, 0.1, 0.5, 2.0, 0.5, 0.1, 0.5, 2.0],
        ))
        .unwrap();
        let p = prepare_sigma(&g, &basis, &t).unwrap();
        assert!((&p - &t).norm() < 1e-12);

        // A symmetric non-Toeplitz perturbation is orthogonal to Range Γ.
        let mut e = CMat::zeros(3, 3);
        e[(0, 0)] = c(1e-6, 0.0);
        e[(2, 2)] = c(-1e-6, 0.0);
        let noisy = &gi + &Hermitian::new(e).unwrap();
        let p = prepare_sigma(&g, &basis, &noisy).unwrap();
        assert!((&p - &gi).norm() < 1e-12);

        // Barely PD, but its diagonal averages cannot carry the corner lag.
        let bad = Hermitian::from_real(&nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.0, 0.99, 0.0, 1e-3, 0.0, 0.99, 0.0, 1.0],
        ))
        .unwrap();
        assert!(matrix::min_eigenvalue(&bad) > 0.0);
        assert!(matches!(prepare_sigma(&g, &basis, &bad), Err(EstimationError::ProjectionNotPd { .. })));
        let f = feasibility_check(&basis, &bad, 1e-8).unwrap();
        assert!(!f.feasible);
    }

    #[test]
    fn constant_prior_examples() {
        let v: Vec<f64> = (0..100).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y = TimeSeries::from_real(1, &v).unwrap();
        let s = sample_covariance(&y).unwrap();
        assert!((s.matrix()[(0, 0)].re - 100.0 / 99.0).abs() < 1e-14);
        assert!(constant_prior(&y).is_ok());

        let n = 200_000;
        let s = sample_covariance(&white(n, 2, 4)).unwrap();
        let band = 3.0 * (2.0 / n as f64).sqrt();
        assert!((s.matrix() - identity(2)).iter().all(|z| z.norm() < band));
        let p = constant_prior(&white(n, 2, 4)).unwrap();
        assert!((p.spectrum(1.0).unwrap().matrix() - s.matrix()).norm() < 1e-12);

        let zero = TimeSeries::from_real(1, &[0.0; 10]).unwrap();
        assert!(matches!(constant_prior(&zero), Err(EstimationError::DegenerateSamples(_))));
    }

    #[test]
    fn yule_walker_white_noise() {
        let n = 100_000;
        let m = yule_walker(&white(n, 1, 21), 3).unwrap();
        let se = 1.0 / (n as f64).sqrt();
        assert!(m.coefficients.iter().all(|a| a.norm() < 3.0 * se * 1.5), "{:?}", m);
        assert!((m.noise_variance - 1.0).abs() < 5.0 * se * 2f64.sqrt());
    }

    #[test]
    fn yule_walker_ar1() {
        let n = 100_000;
        let m = yule_walker(&ar1(n, 0.8, 22), 1).unwrap();
        let se = ((1.0 - 0.64) / n as f64).sqrt();
        assert!((m.coefficients[0].re + 0.8).abs() < 3.0 * se, "{:?}", m);
        let w = m.factor().unwrap();
        let f = w.eval(0.4).unwrap()[(0, 0)].norm_sqr();
        assert!((f - m.spectrum(0.4)).abs() < 1e-12 * f);
    }

    #[test]
    fn yule_walker_order_zero_is_constant() {
        let y = ar1(500, 0.5, 2);
        let a = build_prior(&PriorKind::YuleWalker { order: 0 }, &y).unwrap();
        let b = constant_prior(&y).unwrap();
        assert_eq!(a.spectrum(0.3).unwrap(), b.spectrum(0.3).unwrap());
        assert_eq!(yule_walker(&y, 0).unwrap().noise_variance, sample_covariance(&y).unwrap().matrix()[(0, 0)].re);
    }

    #[test]
    fn yule_walker_errors() {
        let y = TimeSeries::from_real(1, &[0.0; 50]).unwrap();
        assert!(matches!(yule_walker(&y, 2), Err(EstimationError::SingularToeplitz)));
        assert!(yule_walker(&ar1(100, 0.5, 1), 11).is_err());
        assert!(yule_walker(&white(100, 2, 1), 1).is_err());
    }

    #[test]
    fn root_reflection_keeps_spectrum() {
        // a(z) = 1 − 2z⁻¹ has its root at 2.
        let mut a = vec![c(-2.0, 0.0)];
        let mut s2 = 1.0;
        let before = ArModel { coefficients: a.clone(), noise_variance: s2 };
        reflect_roots(&mut a, &mut s2, true).unwrap();
        let after = ArModel { coefficients: a, noise_variance: s2 };
        assert!((after.coefficients[0] - c(-0.5, 0.0)).norm() < 1e-14);
        for t in [0.0, 0.7, 2.0] {
            assert!((before.spectrum(t) - after.spectrum(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn rational_realization_matches_polynomials() {
        let num = [c(1.0, 0.0), c(1.1, 0.0), c(0.08, 0.0), c(-0.15, 0.0)];
        let den = [c(1.0, 0.0), c(-0.5, 0.0), c(0.42, 0.0)];
        let r = rational_realization(&num, &den).unwrap();
        for t in [-2.0, 0.1, 1.3] {
            let w = Complex64::from_polar(1.0, -t);
            let want = poly_eval(&num, w) / poly_eval(&den, w);
            assert!((r.eval(t).unwrap()[(0, 0)] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn clip_rejects_negative() {
        let h = Hermitian::from_diagonal(&[1.0, -1e-14]);
        let out = clip_psd(vec![h]).unwrap();
        assert!(matrix::min_eigenvalue(&out[0]) >= 0.0);
        assert!(clip_psd(vec![Hermitian::from_diagonal(&[1.0, -1e-3])]).is_err());
    }

    #[test]
    fn error_curve_examples() {
        let thetas = [0.0, 1.0];
        let truth = vec![Hermitian::identity(2), Hermitian::identity(2)];
        let c0 = average_error_curve(&thetas, std::slice::from_ref(&truth), &truth).unwrap();
        assert_eq!(c0.mean, vec![0.0, 0.0]);
        assert!(c0.flagged.is_empty());

        let r1 = vec![Hermitian::from_diagonal(&[2.0, 1.0]), Hermitian::identity(2)];
        let r2 = vec![Hermitian::from_diagonal(&[1.0, 0.5]), Hermitian::from_diagonal(&[4.0, 1.0])];
        let cv = average_error_curve(&thetas, &[r1, r2], &truth).unwrap();
        assert_eq!(cv.mean, vec![0.75, 1.5]);
        assert!(average_error_curve(&thetas[..1], std::slice::from_ref(&truth), &truth).is_err());
    }

    #[test]
    fn feasible_prior_is_a_fixed_point() {
        // Data whose projected covariance equals Γ(Ψ) for the constant prior.
        let g = build_g_covariance_extension(3).unwrap();
        let y = white(20_000, 1, 9);
        let psi = sample_covariance(&y).unwrap().matrix()[(0, 0)].re;
        let basis = build_gamma_basis(&g).unwrap();
        let target = g.white_noise_covariance().unwrap().scale(psi);
        assert!(feasibility_check(&basis, &target, 1e-10).unwrap().feasible);
        let problem = DualProblem::new(
            normalize_to_identity(&g, &target).unwrap(),
            constant_prior(&y).unwrap(),
        )
        .unwrap();
        let sol = problem.solve(&SolverConfig::default()).unwrap();
        assert!(sol.lambda.matrix.norm() < 1e-8);
    }
}
