#![allow(dead_code)]

use hellinger_core::gamma::{gamma_apply, normalize_to_identity, FilterBank};
use hellinger_core::matrix::{c, identity, spectral_radius, CMat, Hermitian};
use hellinger_core::newton::{DualProblem, LambdaPoint, Prior};
use hellinger_core::statespace::{Realization, SpectralFactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMat {
    CMat::from_fn(r, k, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn rand_r(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMat {
    CMat::from_fn(r, k, |_, _| c(rng.gen_range(-1.0..1.0), 0.0))
}

/// Scales a random matrix to the given spectral radius.
pub fn with_radius(a: CMat, radius: f64) -> CMat {
    let rho = spectral_radius(&a).unwrap();
    &a * c(radius / rho, 0.0)
}

/// Stable complex realization with `q` outputs and `p` inputs.
pub fn rand_realization(rng: &mut ChaCha8Rng, n: usize, q: usize, p: usize, radius: f64) -> Realization {
    let a = with_radius(rand_c(rng, n, n), radius);
    Realization::new(a, rand_c(rng, n, p), rand_c(rng, q, n), rand_c(rng, q, p)).unwrap()
}

/// Square real factor with `D = I` and small `C`, so its inverse is stable
/// as long as `‖C‖‖B‖` stays modest.
pub fn rand_factor(rng: &mut ChaCha8Rng, n: usize, m: usize, radius: f64) -> Realization {
    let a = with_radius(rand_r(rng, n, n), radius);
    let b = rand_r(rng, n, m);
    let cc = rand_r(rng, m, n) * c(0.5, 0.0);
    Realization::new(a, b, cc, identity(m)).unwrap()
}

pub fn shift_bank(n: usize) -> FilterBank {
    let mut a = CMat::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = c(1.0, 0.0);
    }
    let mut b = CMat::zeros(n, 1);
    b[(n - 1, 0)] = c(1.0, 0.0);
    FilterBank::new(a, b).unwrap()
}

pub fn rand_bank(rng: &mut ChaCha8Rng, n: usize, m: usize) -> FilterBank {
    assert!(m <= n, "a bank needs at least as many states as inputs");
    loop {
        let a = with_radius(rand_r(rng, n, n), 0.7);
        if let Ok(g) = FilterBank::new(a, rand_r(rng, n, m)) {
            return g;
        }
    }
}

/// Normalizes `bank` by `Γ(W W*)` for a random `W`, so the constraint is
/// met by a spectrum with a rational factor.
pub fn feasible_problem(rng: &mut ChaCha8Rng, bank: FilterBank, prior_states: usize) -> DualProblem {
    let m = bank.inputs();
    let truth = rand_factor(rng, 2, m, 0.8);
    let sigma = gamma_apply(&bank, &SpectralFactor::left(truth)).unwrap();
    let bank = normalize_to_identity(&bank, &sigma).unwrap();
    let prior = if prior_states == 0 {
        Prior::identity(m)
    } else {
        Prior::new(rand_factor(rng, prior_states, m, 0.5)).unwrap()
    };
    DualProblem::new(bank, prior).unwrap()
}

/// A point of `L^H_Γ` in a random direction, at norm `scale` or the
/// largest halving of it that stays in the domain.
pub fn random_point(p: &DualProblem, rng: &mut ChaCha8Rng, scale: f64) -> LambdaPoint {
    let d = p.dimension();
    let mut x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v *= scale / nrm);
    loop {
        if let Ok(pt) = p.point(&x) {
            return pt;
        }
        x.iter_mut().for_each(|v| *v *= 0.5);
    }
}

pub fn rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn herm_rel(a: &Hermitian, b: &Hermitian) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Two dominant local maxima of a scalar spectrum on a fine grid of
/// `(0, π)`, in increasing frequency.
pub fn two_peaks(values: impl Fn(f64) -> f64, points: usize) -> Vec<f64> {
    let th: Vec<f64> =
        (0..points).map(|k| std::f64::consts::PI * (k as f64 + 0.5) / points as f64).collect();
    let v: Vec<f64> = th.iter().map(|&t| values(t)).collect();
    let mut peaks: Vec<(f64, f64)> = (1..points - 1)
        .filter(|&k| v[k] > v[k - 1] && v[k] >= v[k + 1])
        .map(|k| (v[k], th[k]))
        .collect();
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut top: Vec<f64> = peaks.iter().take(2).map(|p| p.1).collect();
    top.sort_by(f64::total_cmp);
    top
}
