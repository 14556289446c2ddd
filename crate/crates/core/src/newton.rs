//! Dual functional `J_Ψ(Λ) = tr ∫ (I + G*ΛG)⁻¹Ψ + tr Λ`, its derivatives and
//! a damped Newton solver over `L^H_Γ`.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamma::{
    build_gamma_basis, feasibility_check, FilterBank, GammaBasis, GammaError, FEASIBILITY_TOL,
};
use crate::matrix::{
    self, hermitian_sqrt, pinv_solve, CMat, Hermitian, LinalgError, RMat, RVec,
};
use crate::statespace::{
    causal_part, factorize_q, left_to_right, lyapunov_integral, min_phase_factor, right_to_left,
    CausalPart, FactorError, FrequencyGrid, QFactorization, Realization, SpectralFactor,
};

/// Relative eigenvalue floor below which the Hessian is declared degenerate.
pub const HESSIAN_DEGENERACY: f64 = 1e-12;

/// Relative Hankel singular value below which states are dropped before a
/// factorization step.
pub const HANKEL_TOL: f64 = 1e-10;

/// Multiple of machine epsilon (relative to `|J|`) under which differences
/// of `J` values are not trusted by the line search.
pub const JUMP_RESOLUTION: f64 = 64.0;

fn reduced(r: &Realization) -> Result<Realization> {
    Ok(r.minimal_default().output_normal(HANKEL_TOL)?)
}

fn left_of(h: &Realization) -> Result<Realization> {
    Ok(right_to_left(&SpectralFactor::right(reduced(h)?))?.realization)
}

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error("prior is not coercive: {0}")]
    NotCoercive(String),
    #[error("identity is not in Range Γ (residual {0:e})")]
    Infeasible(f64),
    #[error("Hessian is degenerate (eigenvalues in [{min:e}, {max:e}])")]
    DegenerateHessian { min: f64, max: f64, trace: Box<SolverTrace> },
    #[error("step length fell below {t_min:e} during backtracking")]
    StepTooSmall { t_min: f64, trace: Box<SolverTrace> },
    #[error("no convergence within {iters} iterations (gradient norm {grad_norm:e})")]
    MaxIterations { iters: usize, grad_norm: f64, trace: Box<SolverTrace> },
    #[error("not positive definite at grid node {0}")]
    NotPd(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl NewtonError {
    pub fn trace(&self) -> Option<&SolverTrace> {
        match self {
            NewtonError::DegenerateHessian { trace, .. }
            | NewtonError::StepTooSmall { trace, .. }
            | NewtonError::MaxIterations { trace, .. } => Some(trace),
            _ => None,
        }
    }

    fn with_trace(self, t: &SolverTrace) -> Self {
        match self {
            NewtonError::DegenerateHessian { min, max, .. } => {
                NewtonError::DegenerateHessian { min, max, trace: Box::new(t.clone()) }
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, NewtonError>;

/// Prior spectrum `Ψ = W_Ψ W_Ψ* = H_Ψ* H_Ψ`.
#[derive(Clone, Debug)]
pub struct Prior {
    w_psi: Realization,
    h_psi: Realization,
}

impl Prior {
    /// Number of grid points used for the coercivity check.
    pub const COERCIVITY_GRID: usize = 1024;

    pub fn new(w_psi: Realization) -> Result<Self> {
        if w_psi.inputs() != w_psi.outputs() {
            return Err(NewtonError::DimensionMismatch("prior factor must be square".into()));
        }
        let w_psi = w_psi.minimal_default();
        w_psi.check_stable()?;
        let grid = FrequencyGrid::uniform(Self::COERCIVITY_GRID);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &t in grid.thetas() {
            let sv = matrix::singular_values(&w_psi.eval(t)?);
            lo = lo.min(*sv.last().expect("square prior"));
            hi = hi.max(sv[0]);
        }
        if lo <= 1e-8 * hi {
            return Err(NewtonError::NotCoercive(format!(
                "smallest singular value {lo:e} of W_Psi on the grid (largest {hi:e})"
            )));
        }
        let h_psi = left_to_right(&SpectralFactor::left(w_psi.clone()))?.realization;
        Ok(Prior { w_psi, h_psi })
    }

    /// `Ψ(z) ≡ Ψ₀`.
    pub fn constant(psi: &Hermitian) -> Result<Self> {
        let lo = matrix::min_eigenvalue(psi);
        if lo <= 0.0 {
            return Err(NewtonError::NotCoercive(format!("min eigenvalue {lo:e}")));
        }
        Prior::new(Realization::constant(hermitian_sqrt(psi)?.into_matrix()))
    }

    pub fn identity(m: usize) -> Self {
        Prior::constant(&Hermitian::identity(m)).expect("identity prior")
    }

    pub fn w_psi(&self) -> &Realization {
        &self.w_psi
    }

    pub fn h_psi(&self) -> &Realization {
        &self.h_psi
    }

    pub fn size(&self) -> usize {
        self.w_psi.outputs()
    }

    pub fn spectrum(&self, theta: f64) -> Result<Hermitian> {
        Ok(SpectralFactor::left(self.w_psi.clone()).spectrum(theta)?)
    }
}

/// A multiplier `Λ ∈ L^H_Γ` with its `Q_Λ` factorization.
#[derive(Clone, Debug)]
pub struct LambdaPoint {
    pub coords: Vec<f64>,
    pub matrix: Hermitian,
    pub qfact: QFactorization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub t_min: f64,
    /// Grid size for post-solve diagnostics.
    pub grid_check: usize,
    /// Worker threads for Hessian columns; results do not depend on it.
    pub jobs: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.25,
            grad_tol: 1e-9,
            max_iters: 200,
            t_min: 2f64.powi(-40),
            grid_check: 1024,
            jobs: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(format!("alpha must lie in (0, 0.5), got {}", self.alpha));
        }
        if !(self.grad_tol > 0.0) {
            return Err(format!("gradient tolerance must be positive, got {}", self.grad_tol));
        }
        if !(self.t_min > 0.0 && self.t_min < 1.0) {
            return Err(format!("t_min must lie in (0, 1), got {}", self.t_min));
        }
        if self.jobs == 0 {
            return Err("jobs must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    pub grad_norm: f64,
    /// Step length that produced this iterate (0 for the starting point).
    pub t: f64,
    pub backtracks: usize,
    pub constraint_residual: f64,
    /// Change in `J` over the step (0 for the starting point). Below the
    /// resolution of `J` this is the trapezoid estimate.
    pub dj: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
}

impl SolverTrace {
    pub const CSV_HEADER: &'static str = "iter,J,grad_norm,t,backtracks,constraint_residual,dJ";

    /// Every step lowers `J`: `ΔJ < 0`, recorded values never increase, and
    /// they drop strictly whenever `|ΔJ|` exceeds the resolution of `J`.
    pub fn strictly_decreasing(&self) -> bool {
        self.records.windows(2).all(|w| {
            let resolution = JUMP_RESOLUTION * f64::EPSILON * w[0].j.abs().max(1.0);
            w[1].dj < 0.0
                && w[1].j <= w[0].j
                && (w[1].j < w[0].j || w[1].dj.abs() < resolution)
        })
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{},{:e},{:e}",
                r.iter, r.j, r.grad_norm, r.t, r.backtracks, r.constraint_residual, r.dj
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("ascii csv")
    }
}

impl fmt::Display for SolverTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}

/// Quantities at `Λ` shared by the gradient and the Hessian.
struct Moments {
    /// `G Δ⁻¹`
    l: Realization,
    /// Left factor of `Φ_Ψ = Δ⁻*ΨΔ⁻¹`.
    w1: Realization,
    /// `∫ G Q⁻¹ Ψ Q⁻¹ G*`
    y_int: Hermitian,
}

/// Gradient at a point, as a matrix and as coordinates.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub coords: RVec,
    /// `I − ∫ G Q⁻¹ Ψ Q⁻¹ G*`
    pub matrix: Hermitian,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    /// `‖∫ G Φ̂ G* − I‖_F`
    pub fn constraint_residual(&self) -> f64 {
        self.matrix.norm()
    }
}

/// Result of a successful solve.
#[derive(Clone, Debug)]
pub struct Solution {
    pub lambda: LambdaPoint,
    pub trace: SolverTrace,
    pub gradient: Gradient,
}

/// The minimization of `J_Ψ` over `L^H_Γ` for a bank normalized to `Σ = I`.
#[derive(Clone, Debug)]
pub struct DualProblem {
    bank: FilterBank,
    basis: GammaBasis,
    prior: Prior,
}

impl DualProblem {
    /// Builds the range basis and checks that `I ∈ Range Γ`.
    pub fn new(bank: FilterBank, prior: Prior) -> Result<Self> {
        let basis = build_gamma_basis(&bank)?;
        Self::with_basis(bank, basis, prior)
    }

    pub fn with_basis(bank: FilterBank, basis: GammaBasis, prior: Prior) -> Result<Self> {
        Self::with_tolerance(bank, basis, prior, FEASIBILITY_TOL)
    }

    /// As [`DualProblem::with_basis`] with an explicit tolerance for the
    /// `I ∈ Range Γ` check. Only the projection of `I` enters `J` and its
    /// gradient, so a bank normalized by an ill-conditioned `Σ` may leave
    /// `I` off the range by rounding, about `ε·cond(Σ)`.
    pub fn with_tolerance(
        bank: FilterBank,
        basis: GammaBasis,
        prior: Prior,
        tol: f64,
    ) -> Result<Self> {
        if prior.size() != bank.inputs() {
            return Err(NewtonError::DimensionMismatch(format!(
                "prior of size {} for a bank with {} inputs",
                prior.size(),
                bank.inputs()
            )));
        }
        let f = feasibility_check(&basis, &Hermitian::identity(bank.states()), tol)?;
        if !f.feasible {
            return Err(NewtonError::Infeasible(f.residual));
        }
        Ok(DualProblem { bank, basis, prior })
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn basis(&self) -> &GammaBasis {
        &self.basis
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    /// `Λ = Σ_k x_k e_k`, failing with `NotInDomain` outside `L^H_Γ`.
    pub fn point(&self, coords: &[f64]) -> Result<LambdaPoint> {
        if coords.len() != self.dimension() {
            return Err(NewtonError::DimensionMismatch(format!(
                "{} coordinates for a range of dimension {}",
                coords.len(),
                self.dimension()
            )));
        }
        let matrix = self.basis.combine(coords);
        let qfact = factorize_q(self.bank.a(), self.bank.b(), &matrix)?;
        Ok(LambdaPoint { coords: coords.to_vec(), matrix, qfact })
    }

    pub fn origin(&self) -> LambdaPoint {
        self.point(&vec![0.0; self.dimension()]).expect("Λ = 0 is always in the domain")
    }

    /// `H_Ψ Δ⁻¹`
    fn h_psi_delta_inv(&self, l: &LambdaPoint) -> Result<Realization> {
        Ok(self.prior.h_psi.series(&l.qfact.delta_inv)?)
    }

    pub fn eval_j(&self, l: &LambdaPoint) -> Result<f64> {
        let f = self.h_psi_delta_inv(l)?;
        Ok(lyapunov_integral(&f)?.trace() + l.matrix.trace())
    }

    fn moments(&self, l: &LambdaPoint) -> Result<Moments> {
        let gd = l.qfact.filtered_inverse();
        let f = self.h_psi_delta_inv(l)?;
        let w1 = left_of(&f)?;
        let y_int = lyapunov_integral(&gd.series(&w1)?)?;
        Ok(Moments { l: gd, w1, y_int })
    }

    fn gradient_from(&self, mo: &Moments) -> Gradient {
        let matrix = &Hermitian::identity(self.bank.states()) - &mo.y_int;
        let coords = RVec::from_vec(self.basis.coordinates(&matrix));
        Gradient { coords, matrix }
    }

    pub fn eval_gradient(&self, l: &LambdaPoint) -> Result<Gradient> {
        Ok(self.gradient_from(&self.moments(l)?))
    }

    pub fn eval_hessian_matrix(&self, l: &LambdaPoint, jobs: usize) -> Result<RMat> {
        let mo = self.moments(l)?;
        HessianAssembly::new(self, &mo)?.matrix(jobs)
    }

    /// Gradient and Hessian from one set of shared moments.
    pub fn derivatives(&self, l: &LambdaPoint, jobs: usize) -> Result<(Gradient, RMat)> {
        let mo = self.moments(l)?;
        let g = self.gradient_from(&mo);
        let h = HessianAssembly::new(self, &mo)?.matrix(jobs)?;
        Ok((g, h))
    }

    /// Halves `t` until `Λ + tΔ` is in the domain and satisfies the Armijo
    /// condition. Returns `(t, backtracks, point, J, ΔJ)`.
    ///
    /// When the predicted decrease is below the floating point resolution of
    /// `J`, the change `J(Λ + tΔ) − J(Λ)` is measured by the trapezoid rule
    /// on the analytic gradient, `½ t (∇(Λ) + ∇(Λ + tΔ))ᵀΔ`, instead of by
    /// subtracting two values of `J`, and the returned `J` is `J(Λ) + ΔJ`.
    pub fn backtrack(
        &self,
        l: &LambdaPoint,
        j_now: f64,
        gradient: &Gradient,
        step: &RVec,
        config: &SolverConfig,
    ) -> Result<(f64, usize, LambdaPoint, f64, f64)> {
        let slope = gradient.coords.dot(step);
        let resolution = JUMP_RESOLUTION * f64::EPSILON * j_now.abs().max(1.0);
        let fine = config.alpha * slope.abs() < resolution;
        let mut t = 1.0;
        let mut halvings = 0;
        loop {
            if t < config.t_min {
                return Err(NewtonError::StepTooSmall {
                    t_min: config.t_min,
                    trace: Box::default(),
                });
            }
            let coords: Vec<f64> =
                l.coords.iter().zip(step.iter()).map(|(x, d)| x + t * d).collect();
            match self.point(&coords) {
                Ok(next) => {
                    let (j_next, change) = if fine {
                        let g_next = self.eval_gradient(&next)?;
                        let change = 0.5 * t * (&gradient.coords + &g_next.coords).dot(step);
                        (j_now + change, change)
                    } else {
                        let j_next = self.eval_j(&next)?;
                        (j_next, j_next - j_now)
                    };
                    if change < config.alpha * t * slope {
                        return Ok((t, halvings, next, j_next, change));
                    }
                }
                Err(NewtonError::Factor(FactorError::NotInDomain(_))) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
            halvings += 1;
        }
    }

    /// Newton iteration from `Λ₀ = 0`.
    pub fn solve(&self, config: &SolverConfig) -> Result<Solution> {
        self.solve_from(self.origin(), config)
    }

    /// Newton iteration from an arbitrary domain point.
    pub fn solve_from(&self, start: LambdaPoint, config: &SolverConfig) -> Result<Solution> {
        config.validate().map_err(NewtonError::DimensionMismatch)?;
        let mut trace = SolverTrace::default();
        let mut l = start;
        let mut j = self.eval_j(&l)?;
        let (mut t, mut halvings, mut dj) = (0.0, 0, 0.0);
        for iter in 0..=config.max_iters {
            let mo = self.moments(&l)?;
            let g = self.gradient_from(&mo);
            trace.records.push(IterationRecord {
                iter,
                j,
                grad_norm: g.norm(),
                t,
                backtracks: halvings,
                constraint_residual: g.constraint_residual(),
                dj,
            });
            if g.norm() < config.grad_tol {
                return Ok(Solution { lambda: l, trace, gradient: g });
            }
            if iter == config.max_iters {
                return Err(NewtonError::MaxIterations {
                    iters: config.max_iters,
                    grad_norm: g.norm(),
                    trace: Box::new(trace),
                });
            }
            let h = HessianAssembly::new(self, &mo)
                .and_then(|a| a.matrix(config.jobs))
                .map_err(|e| e.with_trace(&trace))?;
            let step = newton_step(&h, &g.coords).map_err(|e| e.with_trace(&trace))?;
            let (tt, hh, next, j_next, change) = match self.backtrack(&l, j, &g, &step, config) {
                Ok(v) => v,
                Err(NewtonError::StepTooSmall { t_min, .. }) => {
                    return Err(NewtonError::StepTooSmall { t_min, trace: Box::new(trace) })
                }
                Err(e) => return Err(e),
            };
            t = tt;
            halvings = hh;
            l = next;
            j = j_next;
            dj = change;
        }
        unreachable!("loop returns on its last iteration")
    }

    /// `Ŵ = Δ⁻¹W₁`, a stable left factor of `Φ̂ = Q⁻¹ΨQ⁻¹`.
    pub fn optimal_spectrum(&self, l: &LambdaPoint) -> Result<SpectralFactor> {
        let mo = self.moments(l)?;
        let w = l.qfact.delta_inv.series(&mo.w1)?.minimal_default();
        Ok(SpectralFactor::left(w))
    }
}

/// Hessian columns `Y(e_l) = ∫ GΔ⁻¹ [Φ_e Φ_Ψ + Φ_Ψ Φ_e] Δ⁻*G*`, computed
/// through the polarization `(Φ_S + Φ_Ψ)² − Φ_Ψ² − Φ_S²` on positive
/// definite shifts `S = e + cI`.
struct HessianAssembly<'a> {
    problem: &'a DualProblem,
    l: &'a Realization,
    z1: CausalPart,
    /// `∫ GΔ⁻¹ Φ_Ψ² Δ⁻*G*`
    t_psi: Hermitian,
    shift: f64,
    y_identity: Hermitian,
}

impl<'a> HessianAssembly<'a> {
    fn new(problem: &'a DualProblem, mo: &'a Moments) -> Result<Self> {
        let h1 = left_of(&mo.w1)?;
        let t_psi = lyapunov_integral(&mo.l.series(&mo.w1)?.series(&h1)?)?;
        let z1 = causal_part(&mo.w1)?;
        let lowest = problem
            .basis
            .orthonormal()
            .iter()
            .map(matrix::min_eigenvalue)
            .fold(f64::INFINITY, f64::min);
        let shift = 1.0 - lowest.min(0.0);
        let mut asm = HessianAssembly {
            problem,
            l: &mo.l,
            z1,
            t_psi,
            shift,
            y_identity: Hermitian::zeros(0),
        };
        asm.y_identity = asm.y_positive(&Hermitian::identity(problem.bank.states()))?;
        Ok(asm)
    }

    /// `Y(S)` for `S > 0`.
    fn y_positive(&self, s: &Hermitian) -> Result<Hermitian> {
        let hs = self.l.left_mul(hermitian_sqrt(s)?.matrix());
        let ws = left_of(&hs)?;
        let ks = left_of(&ws)?;
        let t_ss = lyapunov_integral(&self.l.series(&ws)?.series(&ks)?)?;
        let z1s = causal_part(&ws)?.add(&self.z1)?;
        let z1s = CausalPart { realization: reduced(&z1s.realization)? };
        let w1s = min_phase_factor(&z1s)?.realization;
        let h1s = left_of(&w1s)?;
        let t_sum = lyapunov_integral(&self.l.series(&w1s)?.series(&h1s)?)?;
        Ok(&(&t_sum - &self.t_psi) - &t_ss)
    }

    fn column(&self, e: &Hermitian) -> Result<Hermitian> {
        let s = e.add_scaled(self.shift, &Hermitian::identity(e.dim()));
        Ok(self.y_positive(&s)?.add_scaled(-self.shift, &self.y_identity))
    }

    fn matrix(&self, jobs: usize) -> Result<RMat> {
        let basis = self.problem.basis.orthonormal();
        let d = basis.len();
        let columns: Vec<Result<Hermitian>> = if jobs <= 1 || d <= 1 {
            basis.iter().map(|e| self.column(e)).collect()
        } else {
            let chunk = d.div_ceil(jobs.min(d));
            std::thread::scope(|scope| {
                let handles: Vec<_> = basis
                    .chunks(chunk)
                    .map(|part| scope.spawn(move || part.iter().map(|e| self.column(e)).collect::<Vec<_>>()))
                    .collect();
                handles.into_iter().flat_map(|h| h.join().expect("hessian worker")).collect()
            })
        };
        let mut h = RMat::zeros(d, d);
        for (l, col) in columns.into_iter().enumerate() {
            let col = col?;
            for (k, e) in basis.iter().enumerate() {
                h[(k, l)] = e.inner(&col);
            }
        }
        Ok(h)
    }
}

/// Solves `HΔ = −∇` in the least squares sense.
pub fn newton_step(hessian: &RMat, gradient: &RVec) -> Result<RVec> {
    let d = gradient.len();
    if hessian.shape() != (d, d) {
        return Err(NewtonError::DimensionMismatch("Hessian vs gradient size".into()));
    }
    if d == 0 {
        return Ok(RVec::zeros(0));
    }
    let sym = (hessian + hessian.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo >= HESSIAN_DEGENERACY * hi) || hi <= 0.0 {
        return Err(NewtonError::DegenerateHessian { min: lo, max: hi, trace: Box::default() });
    }
    let (x, _) = pinv_solve(&sym, &(-gradient))?;
    Ok(x)
}

/// Hellinger distance between two spectra sampled on the same uniform grid:
/// `d² = mean tr[Ψ + Φ − 2(Φ^{1/2}ΨΦ^{1/2})^{1/2}]`.
pub fn hellinger_distance(psi: &[Hermitian], phi: &[Hermitian]) -> Result<f64> {
    if psi.len() != phi.len() || psi.is_empty() {
        return Err(NewtonError::DimensionMismatch("spectra on different grids".into()));
    }
    let mut acc = 0.0;
    for (k, (p, f)) in psi.iter().zip(phi).enumerate() {
        for s in [p, f] {
            let lo = matrix::min_eigenvalue(s);
            if lo <= 0.0 {
                return Err(NewtonError::NotPd(k));
            }
        }
        let fh = hermitian_sqrt(f).map_err(|_| NewtonError::NotPd(k))?;
        let inner = p.congruence(fh.matrix());
        let root = hermitian_sqrt(&inner).map_err(|_| NewtonError::NotPd(k))?;
        acc += p.trace() + f.trace() - 2.0 * root.trace();
    }
    Ok((acc / psi.len() as f64).max(0.0).sqrt())
}

/// Samples `W W*` on a grid.
pub fn sample_spectrum(w: &SpectralFactor, grid: &FrequencyGrid) -> Result<Vec<Hermitian>> {
    grid.thetas().iter().map(|&t| Ok(w.spectrum(t)?)).collect()
}

/// `Q_Λ⁻¹ Ψ Q_Λ⁻¹` evaluated directly from `Q_Λ = I + G*ΛG`.
pub fn direct_optimal_spectrum(
    bank: &FilterBank,
    prior: &Prior,
    lambda: &Hermitian,
    theta: f64,
) -> Result<CMat> {
    let g = bank.eval(theta)?;
    let q = matrix::identity(bank.inputs()) + g.adjoint() * lambda.matrix() * &g;
    let qi = q.try_inverse().ok_or(LinalgError::Singular)?;
    let psi = prior.spectrum(theta)?;
    Ok(&qi * psi.matrix() * &qi)
}
