//! Seeded synthetic data sets with known spectra.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::estimation::rational_realization;
use crate::matrix::{c, CMat, Hermitian};
use crate::series::TimeSeries;
use crate::statespace::{FrequencyGrid, Realization, SpectralFactor};

/// Discarded start-up samples of every simulated recursion.
pub const WARMUP: usize = 2000;

/// Seed of the bivariate shaping filter, shared by all data seeds.
pub const BIVARIATE_FILTER_SEED: u64 = 40;

/// `y(t) = Σ φ_k y(t−k) + e(t) + Σ θ_k e(t−k)` with poles
/// `{0.9, −0.2 ± 0.7j, ±0.5j}`.
pub const ARMA_AR: [f64; 5] = [0.5, -0.42, 0.602, -0.0425, 0.11925];
pub const ARMA_MA: [f64; 3] = [1.1, 0.08, -0.15];

pub const SINUSOID_FREQS: [f64; 2] = [0.42, 0.53];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn real_poly(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| c(x, 0.0)).collect()
}

/// `c(z)/a(z)` of the ARMA example.
pub fn arma_factor() -> Realization {
    let mut den = vec![1.0];
    den.extend(ARMA_AR.iter().map(|a| -a));
    let mut num = vec![1.0];
    num.extend_from_slice(&ARMA_MA);
    rational_realization(&real_poly(&num), &real_poly(&den)).expect("fixed model")
}

pub fn generate_arma_example(n: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = [0.0f64; 5];
    let mut e = [0.0f64; 3];
    let mut out = Vec::with_capacity(n);
    for t in 0..WARMUP + n {
        let et = normal(&mut rng);
        let mut v = et;
        for k in 0..5 {
            v += ARMA_AR[k] * y[k];
        }
        for k in 0..3 {
            v += ARMA_MA[k] * e[k];
        }
        y.rotate_right(1);
        y[0] = v;
        e.rotate_right(1);
        e[0] = et;
        if t >= WARMUP {
            out.push(v);
        }
    }
    TimeSeries::from_real(1, &out).expect("finite samples")
}

/// Which parts of the two-sinusoid signal to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SinusoidVariant {
    Full,
    LinesOnly,
    NoiseOnly,
}

/// `(0.5 + 0.25z⁻¹)/(1 − 0.8z⁻¹)`, the coloring filter of the noise.
pub fn sinusoid_noise_factor() -> Realization {
    rational_realization(&real_poly(&[0.5, 0.25]), &real_poly(&[1.0, -0.8])).expect("fixed model")
}

/// `y(t) = 0.5 sin(ω₁t + φ₁) + 0.5 sin(ω₂t + φ₂) + z(t)`,
/// `z(t) = 0.8z(t−1) + 0.5ν(t) + 0.25ν(t−1)`, with standard normal phases.
pub fn generate_sinusoids_example(n: usize, seed: u64) -> TimeSeries {
    generate_sinusoids(n, seed, SinusoidVariant::Full)
}

pub fn generate_sinusoids(n: usize, seed: u64, variant: SinusoidVariant) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = [normal(&mut rng), normal(&mut rng)];
    let (mut z, mut nu_prev) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for t in 0..WARMUP + n {
        let nu = normal(&mut rng);
        z = 0.8 * z + 0.5 * nu + 0.25 * nu_prev;
        nu_prev = nu;
        if t < WARMUP {
            continue;
        }
        let s = (t - WARMUP + 1) as f64;
        let lines: f64 = SINUSOID_FREQS
            .iter()
            .zip(&phases)
            .map(|(w, p)| 0.5 * (w * s + p).sin())
            .sum();
        out.push(match variant {
            SinusoidVariant::Full => lines + z,
            SinusoidVariant::LinesOnly => lines,
            SinusoidVariant::NoiseOnly => z,
        });
    }
    TimeSeries::from_real(1, &out).expect("finite samples")
}

/// Order-40 square shaping filter `W = K(z) f(z)`: `K` is a random 2×2
/// filter of order 36, `f` a scalar factor applied to both channels with
/// poles `0.9e^{±0.52j}` and zeros `(1 − 10⁻⁵)e^{±0.2j}`.
///
/// Random poles of `K` are conjugate pairs drawn uniformly (by area) from the
/// upper half of the disk of radius 0.95; `B`, `C` have independent
/// `N(0, 1/36)` entries and `D = I`.
pub fn bivariate_shaping_filter(seed: u64) -> Realization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = 18;
    let n = 2 * pairs;
    let mut a = CMat::zeros(n, n);
    for k in 0..pairs {
        let r = 0.95 * rng.gen::<f64>().sqrt();
        let w = rng.gen_range(0.0..PI);
        let (re, im) = (r * w.cos(), r * w.sin());
        let i = 2 * k;
        a[(i, i)] = c(re, 0.0);
        a[(i, i + 1)] = c(im, 0.0);
        a[(i + 1, i)] = c(-im, 0.0);
        a[(i + 1, i + 1)] = c(re, 0.0);
    }
    let scale = 1.0 / (n as f64).sqrt();
    let b = CMat::from_fn(n, 2, |_, _| c(scale * normal(&mut rng), 0.0));
    let cm = CMat::from_fn(2, n, |_, _| c(scale * normal(&mut rng), 0.0));
    let k = Realization::new(a, b, cm, crate::matrix::identity(2)).expect("shapes agree");

    let rho = 1.0 - 1e-5;
    let f = rational_realization(
        &real_poly(&[1.0, -2.0 * rho * 0.2f64.cos(), rho * rho]),
        &real_poly(&[1.0, -1.8 * 0.52f64.cos(), 0.81]),
    )
    .expect("fixed factor");
    k.series(&diagonal_copies(&f, 2)).expect("square factors")
}

/// `f(z) I_m` for a scalar `f`.
fn diagonal_copies(f: &Realization, m: usize) -> Realization {
    let p = f.states();
    let mut a = CMat::zeros(m * p, m * p);
    let mut b = CMat::zeros(m * p, m);
    let mut cm = CMat::zeros(m, m * p);
    let mut d = CMat::zeros(m, m);
    for i in 0..m {
        a.view_mut((i * p, i * p), (p, p)).copy_from(&f.a);
        b.view_mut((i * p, i), (p, 1)).copy_from(&f.b);
        cm.view_mut((i, i * p), (1, p)).copy_from(&f.c);
        d[(i, i)] = f.d[(0, 0)];
    }
    Realization { a, b, c: cm, d }
}

/// Drives a real realization with unit Gaussian white noise.
pub fn simulate(w: &Realization, n: usize, rng: &mut ChaCha8Rng) -> TimeSeries {
    let (p, m, q) = (w.states(), w.inputs(), w.outputs());
    let a = w.a.map(|z| z.re);
    let b = w.b.map(|z| z.re);
    let cm = w.c.map(|z| z.re);
    let d = w.d.map(|z| z.re);
    let mut x = nalgebra::DVector::<f64>::zeros(p);
    let mut out = Vec::with_capacity(n * q);
    for t in 0..WARMUP + n {
        let e = nalgebra::DVector::from_fn(m, |_, _| normal(rng));
        let y = &cm * &x + &d * &e;
        x = &a * &x + &b * &e;
        if t >= WARMUP {
            out.extend(y.iter());
        }
    }
    TimeSeries::from_real(q, &out).expect("finite samples")
}

/// Bivariate data from [`bivariate_shaping_filter`] and the filter itself.
pub fn generate_bivariate_example(n: usize, seed: u64) -> (TimeSeries, Realization) {
    let w = bivariate_shaping_filter(BIVARIATE_FILTER_SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (simulate(&w, n, &mut rng), w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Arma,
    Sinusoids,
    Bivariate,
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arma" => Ok(Scenario::Arma),
            "sinusoids" => Ok(Scenario::Sinusoids),
            "bivariate" => Ok(Scenario::Bivariate),
            other => Err(format!("unknown scenario '{other}' (arma, sinusoids, bivariate)")),
        }
    }
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Arma => "arma",
            Scenario::Sinusoids => "sinusoids",
            Scenario::Bivariate => "bivariate",
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> TimeSeries {
        match self {
            Scenario::Arma => generate_arma_example(n, seed),
            Scenario::Sinusoids => generate_sinusoids_example(n, seed),
            Scenario::Bivariate => generate_bivariate_example(n, seed).0,
        }
    }

    /// Left factor of the true spectrum. For the sinusoids only the
    /// continuous (colored noise) part has a density.
    pub fn true_factor(&self) -> Realization {
        match self {
            Scenario::Arma => arma_factor(),
            Scenario::Sinusoids => sinusoid_noise_factor(),
            Scenario::Bivariate => bivariate_shaping_filter(BIVARIATE_FILTER_SEED),
        }
    }

    pub fn true_spectrum(&self, grid: &FrequencyGrid) -> Vec<Hermitian> {
        let w = SpectralFactor::left(self.true_factor());
        grid.thetas().iter().map(|&t| w.spectrum(t).expect("stable factor")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{self, eigenvalues};
    use crate::statespace::lyapunov_integral;

    #[test]
    fn arma_poles() {
        let got = eigenvalues(&arma_factor().a).unwrap();
        let want = [
            c(0.9, 0.0),
            c(-0.2, 0.7),
            c(-0.2, -0.7),
            c(0.0, 0.5),
            c(0.0, -0.5),
        ];
        for w in &want {
            let d = got.iter().map(|g| (g - w).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-12, "{w}: {got:?}");
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        assert_eq!(generate_arma_example(50, 3), generate_arma_example(50, 3));
        assert_ne!(generate_arma_example(50, 3), generate_arma_example(50, 4));
        assert_eq!(generate_sinusoids_example(30, 1), generate_sinusoids_example(30, 1));
        assert_eq!(generate_bivariate_example(20, 2).0, generate_bivariate_example(20, 2).0);
        assert_eq!(generate_arma_example(500, 1).len(), 500);
    }

    fn variance(y: &TimeSeries) -> f64 {
        y.samples().map(|s| s[0].norm_sqr()).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn arma_variance_matches_lyapunov() {
        let n = 400_000;
        let want = lyapunov_integral(&arma_factor()).unwrap().matrix()[(0, 0)].re;
        let y = generate_arma_example(n, 7);
        // Standard error of the sample variance: sqrt(2 Σ_k r_k² / N).
        let w = arma_factor();
        let grid = FrequencyGrid::uniform(4096);
        let s2 = grid.mean(|t| {
            let v = w.eval(t).unwrap()[(0, 0)].norm_sqr();
            CMat::from_element(1, 1, c(v * v, 0.0))
        })[(0, 0)]
            .re;
        let se = (2.0 * s2 / n as f64).sqrt();
        assert!((variance(&y) - want).abs() < 3.0 * se, "{} vs {want}", variance(&y));
    }

    fn periodogram(v: &[f64], theta: f64) -> f64 {
        let z: Complex64 = v
            .iter()
            .enumerate()
            .map(|(t, x)| Complex64::from_polar(*x, -theta * t as f64))
            .sum();
        z.norm_sqr() / v.len() as f64
    }

    #[test]
    fn lines_only_peaks() {
        let y = generate_sinusoids(2000, 5, SinusoidVariant::LinesOnly);
        let v: Vec<f64> = y.samples().map(|s| s[0].re).collect();
        let grid: Vec<f64> = (0..2000).map(|k| 0.3 + 0.35 * k as f64 / 2000.0).collect();
        let p: Vec<f64> = grid.iter().map(|&t| periodogram(&v, t)).collect();
        let mut peaks: Vec<(f64, f64)> = (1..p.len() - 1)
            .filter(|&k| p[k] > p[k - 1] && p[k] > p[k + 1])
            .map(|k| (p[k], grid[k]))
            .collect();
        peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut top: Vec<f64> = peaks[..2].iter().map(|x| x.1).collect();
        top.sort_by(f64::total_cmp);
        assert!((top[0] - 0.42).abs() < 0.005 && (top[1] - 0.53).abs() < 0.005, "{top:?}");
    }

    #[test]
    fn noise_only_matches_closed_form() {
        // Averaged periodograms of independent segments.
        let seg = 256;
        let runs = 400;
        let w = sinusoid_noise_factor();
        for theta in [0.2, 1.0, 2.5] {
            let mut acc = 0.0;
            for r in 0..runs {
                let y = generate_sinusoids(seg, 1000 + r, SinusoidVariant::NoiseOnly);
                let v: Vec<f64> = y.samples().map(|s| s[0].re).collect();
                acc += periodogram(&v, theta);
            }
            let est = acc / runs as f64;
            let e = Complex64::from_polar(1.0, -theta);
            let truth = ((c(0.5, 0.0) + e * 0.25) / (c(1.0, 0.0) - e * 0.8)).norm_sqr();
            assert!((w.eval(theta).unwrap()[(0, 0)].norm_sqr() - truth).abs() < 1e-12);
            // Each periodogram is roughly exponential with mean = truth; allow
            // for the leakage bias of a finite window.
            let band = 3.0 * truth / (runs as f64).sqrt() + 0.05 * truth;
            assert!((est - truth).abs() < band, "θ={theta}: {est} vs {truth}");
        }
    }

    #[test]
    fn bivariate_filter_structure() {
        let w = bivariate_shaping_filter(BIVARIATE_FILTER_SEED);
        assert_eq!(w.states(), 40);
        assert_eq!((w.inputs(), w.outputs()), (2, 2));
        assert!(matrix::max_imag(&w.a) == 0.0);
        let ev = eigenvalues(&w.a).unwrap();
        assert!(ev.iter().all(|z| z.norm() < 0.95 + 1e-12));
        for s in [1.0, -1.0] {
            let p = Complex64::from_polar(0.9, s * 0.52);
            assert!(ev.iter().any(|z| (z - p).norm() < 1e-12));
        }
        let zero = Complex64::from_polar(1.0 - 1e-5, 0.2);
        let v = w.eval_z(zero).unwrap();
        assert!(matrix::singular_values(&v).iter().all(|s| *s < 1e-4));
    }

    #[test]
    fn bivariate_covariance_matches_lyapunov() {
        let n = 200_000;
        let (y, w) = generate_bivariate_example(n, 3);
        let want = lyapunov_integral(&w).unwrap();
        let mut acc = CMat::zeros(2, 2);
        for s in y.samples() {
            for i in 0..2 {
                for j in 0..2 {
                    acc[(i, j)] += s[i] * s[j].conj();
                }
            }
        }
        let got = acc / c(n as f64, 0.0);
        // Per-entry standard error via sqrt(Σ_k r_ii(k) r_jj(k) / N) ≤ var / sqrt(N / τ);
        // the slowest pole (0.95) gives τ ≲ 40.
        for i in 0..2 {
            for j in 0..2 {
                let scale = (want.matrix()[(i, i)].re * want.matrix()[(j, j)].re).sqrt();
                let se = scale * (40.0 / n as f64).sqrt();
                assert!((got[(i, j)] - want.matrix()[(i, j)]).norm() < 3.0 * se, "{i}{j}");
            }
        }
    }
}
