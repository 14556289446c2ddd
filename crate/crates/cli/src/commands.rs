use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use hellinger_core::estimation::{
    bivariate_bank, build_g_covariance_extension, estimate_spectrum, normalized_feasibility_tol,
    sinusoid_bank, ArModel, Estimate, EstimationConfig, EstimationError, PriorKind, average_error_curve,
};
use hellinger_core::gamma::{build_gamma_basis, feasibility_check, normalize_to_identity, FilterBank, FEASIBILITY_TOL};
use hellinger_core::json::{MatrixJson, FORMAT_VERSION};
use hellinger_core::matrix::{hermitian_inv_sqrt, Hermitian};
use hellinger_core::newton::{sample_spectrum, DualProblem, NewtonError, Prior, SolverConfig, SolverTrace};
use hellinger_core::scenario::Scenario;
use hellinger_core::series::{read_spectrum_csv, write_spectrum_csv, TimeSeries};
use hellinger_core::statespace::{FrequencyGrid, Realization, SpectralFactor};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::manifest::{create_dir, read_input, write_bytes, write_json, RunManifest};

pub const APPROX_OUTPUTS: [&str; 4] = ["lambda.json", "w_hat.json", "spectrum.csv", "trace.csv"];
pub const ESTIMATE_OUTPUTS: [&str; 7] =
    ["sigma.json", "lambda.json", "w_hat.json", "spectrum.csv", "prior_spectrum.csv", "trace.csv", "diagnostics.json"];

/// Input of `approx`: bank, moment matrix and prior factor.
#[derive(Serialize, Deserialize)]
pub struct Problem {
    pub format_version: u32,
    pub bank: FilterBank,
    pub sigma: MatrixJson,
    /// Left factor `W_Ψ` of the prior.
    pub prior: Realization,
}

/// Applies `f` to every item on `jobs` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let done: Vec<Vec<(usize, R)>> = std::thread::scope(|s| {
        let workers: Vec<_> = (0..jobs.clamp(1, items.len().max(1)))
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        if k >= items.len() {
                            return out;
                        }
                        out.push((k, f(&items[k])));
                    }
                })
            })
            .collect();
        workers.into_iter().map(|w| w.join().expect("worker panicked")).collect()
    });
    for (k, r) in done.into_iter().flatten() {
        slots[k] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every item mapped")).collect()
}

fn spectrum_csv(thetas: &[f64], values: &[Hermitian]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_spectrum_csv(&mut buf, thetas, values).map_err(|e| CliError::io(e.to_string()))?;
    Ok(buf)
}

fn factor_json(w: &SpectralFactor) -> serde_json::Value {
    json!({ "format_version": FORMAT_VERSION, "factor": w })
}

/// `Λ` for a bank normalized by `Σ`, and the same multiplier for the bank
/// as given: `Σ^{-1/2} Λ Σ^{-1/2}`.
fn lambda_json(normalized: &Hermitian, sigma: &Hermitian) -> CliResult<serde_json::Value> {
    let s = hermitian_inv_sqrt(sigma).map_err(|e| CliError::domain(e.to_string()))?;
    let original = normalized.congruence(s.matrix());
    Ok(json!({
        "format_version": FORMAT_VERSION,
        "lambda": MatrixJson::from(original),
        "lambda_normalized": MatrixJson::from(normalized.clone()),
    }))
}

fn write_trace(dir: &Path, trace: &SolverTrace) -> CliResult<()> {
    write_bytes(&dir.join("trace.csv"), trace.to_csv().as_bytes())
}

fn solver_config(tol: f64, alpha: f64, max_iters: usize) -> CliResult<SolverConfig> {
    let cfg = SolverConfig { grad_tol: tol, alpha, max_iters, ..SolverConfig::default() };
    cfg.validate().map_err(CliError::usage)?;
    Ok(cfg)
}

pub struct ApproxOptions {
    pub problem: PathBuf,
    pub tol: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub grid: usize,
    pub out: PathBuf,
}

pub fn approx(o: &ApproxOptions, args: &[String]) -> CliResult<()> {
    let solver = solver_config(o.tol, o.alpha, o.max_iters)?;
    if o.grid == 0 {
        return Err(CliError::usage("--grid must be positive"));
    }
    let bytes = read_input(&o.problem)?;
    let problem: Problem = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::usage(format!("{}: {e}", o.problem.display())))?;
    if problem.format_version != FORMAT_VERSION {
        return Err(CliError::usage(format!("unsupported format_version {}", problem.format_version)));
    }
    let sigma = Hermitian::try_from(problem.sigma).map_err(|e| CliError::usage(format!("sigma: {e}")))?;
    if sigma.dim() != problem.bank.states() {
        return Err(CliError::usage(format!(
            "sigma is {0}x{0} but the bank has {1} states",
            sigma.dim(),
            problem.bank.states()
        )));
    }

    let mut m = RunManifest::new("approx", args, json!({ "solver": solver, "grid": o.grid }));
    m.input(&o.problem, &bytes);
    m.outputs = APPROX_OUTPUTS.iter().map(|s| s.to_string()).collect();
    let dir = create_dir(&o.out)?;
    m.write(&dir)?;

    let prior = Prior::new(problem.prior)?;
    let basis = build_gamma_basis(&problem.bank).map_err(NewtonError::from)?;
    let f = feasibility_check(&basis, &sigma, FEASIBILITY_TOL).map_err(NewtonError::from)?;
    if !f.feasible {
        return Err(CliError::infeasible(format!(
            "sigma is not in Range Γ: residual {:e} exceeds {:e}",
            f.residual,
            FEASIBILITY_TOL * (1.0 + sigma.norm())
        )));
    }
    let bank = normalize_to_identity(&problem.bank, &sigma).map_err(|e| CliError::domain(e.to_string()))?;
    let nbasis = build_gamma_basis(&bank).map_err(NewtonError::from)?;
    let dual = DualProblem::with_tolerance(bank, nbasis, prior, normalized_feasibility_tol(&sigma))?;
    let sol = match dual.solve(&solver) {
        Ok(s) => s,
        Err(e) => {
            if let Some(t) = e.trace() {
                write_trace(&dir, t)?;
            }
            return Err(e.into());
        }
    };
    let w = dual.optimal_spectrum(&sol.lambda)?;
    let grid = FrequencyGrid::uniform(o.grid);
    let values = sample_spectrum(&w, &grid)?;

    write_json(&dir.join("lambda.json"), &lambda_json(&sol.lambda.matrix, &sigma)?)?;
    write_json(&dir.join("w_hat.json"), &factor_json(&w))?;
    write_bytes(&dir.join("spectrum.csv"), &spectrum_csv(grid.thetas(), &values)?)?;
    write_trace(&dir, &sol.trace)?;
    eprintln!(
        "converged in {} iterations, gradient norm {:e}",
        sol.trace.iterations(),
        sol.gradient.norm()
    );
    Ok(())
}

/// A bank named on the command line, or read from a JSON file.
pub enum BankSpec {
    CovarianceExtension(usize),
    Sinusoid,
    Bivariate,
    File(PathBuf),
}

impl FromStr for BankSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "sinusoid" => BankSpec::Sinusoid,
            "bivariate" => BankSpec::Bivariate,
            _ => match s.strip_prefix("covext:") {
                Some(n) => BankSpec::CovarianceExtension(
                    n.parse().map_err(|_| format!("bad lag count in '{s}'"))?,
                ),
                None => BankSpec::File(PathBuf::from(s)),
            },
        })
    }
}

pub enum PriorSpec {
    Constant,
    YuleWalker(usize),
    File(PathBuf),
}

impl FromStr for PriorSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "constant" => PriorSpec::Constant,
            _ => match s.strip_prefix("yw:") {
                Some(k) => PriorSpec::YuleWalker(k.parse().map_err(|_| format!("bad AR order in '{s}'"))?),
                None => PriorSpec::File(PathBuf::from(s)),
            },
        })
    }
}

pub struct EstimateOptions {
    pub data: Vec<PathBuf>,
    pub bank: String,
    pub prior: String,
    pub burn_in: Option<usize>,
    pub grid: usize,
    pub seed: u64,
    pub tol: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub jobs: usize,
    pub out: PathBuf,
}

/// One directory per input, named by the shortest trailing part of the
/// input path (extension dropped) that tells the inputs apart.
fn output_dirs(inputs: &[PathBuf], out: &Path) -> CliResult<Vec<PathBuf>> {
    if inputs.len() == 1 {
        return Ok(vec![out.to_path_buf()]);
    }
    let parts: Vec<Vec<String>> = inputs
        .iter()
        .map(|p| {
            let mut c: Vec<String> = p
                .parent()
                .into_iter()
                .flat_map(|d| d.components())
                .filter_map(|c| match c {
                    std::path::Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
                    _ => None,
                })
                .collect();
            c.push(p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
            c
        })
        .collect();
    let longest = parts.iter().map(Vec::len).max().unwrap_or(1);
    for k in 1..=longest {
        let names: Vec<PathBuf> = parts
            .iter()
            .map(|c| c[c.len().saturating_sub(k)..].iter().collect())
            .collect();
        let unique: std::collections::BTreeSet<&PathBuf> = names.iter().collect();
        if unique.len() == names.len() {
            return Ok(names.into_iter().map(|n| out.join(n)).collect());
        }
    }
    Err(CliError::usage("input paths are not distinct"))
}

pub fn estimate(o: &EstimateOptions, args: &[String]) -> CliResult<()> {
    let solver = solver_config(o.tol, o.alpha, o.max_iters)?;
    if o.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let mut m = RunManifest::new("estimate", args, serde_json::Value::Null);
    let bank = match o.bank.parse::<BankSpec>().map_err(CliError::usage)? {
        BankSpec::CovarianceExtension(n) => build_g_covariance_extension(n)?,
        BankSpec::Sinusoid => sinusoid_bank(),
        BankSpec::Bivariate => bivariate_bank(),
        BankSpec::File(p) => {
            let bytes = read_input(&p)?;
            m.input(&p, &bytes);
            serde_json::from_slice(&bytes).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
    };
    let prior = match o.prior.parse::<PriorSpec>().map_err(CliError::usage)? {
        PriorSpec::Constant => PriorKind::Constant,
        PriorSpec::YuleWalker(order) => PriorKind::YuleWalker { order },
        PriorSpec::File(p) => {
            let bytes = read_input(&p)?;
            m.input(&p, &bytes);
            let model: ArModel = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            PriorKind::Ar { model }
        }
    };
    let mut series = Vec::new();
    for p in &o.data {
        let bytes = read_input(p)?;
        let y = TimeSeries::read_csv(&bytes[..]).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
        if y.dim() != bank.inputs() {
            return Err(CliError::usage(format!(
                "{} has {} channels but the bank has {} inputs",
                p.display(),
                y.dim(),
                bank.inputs()
            )));
        }
        m.input(p, &bytes);
        series.push(y);
    }
    let config = EstimationConfig { burn_in: o.burn_in, prior, solver, grid: o.grid, seed: o.seed };
    let dirs = output_dirs(&o.data, &o.out)?;
    m.config = json!({ "bank": o.bank, "filter_bank": bank, "estimation": config });
    m.seed = Some(o.seed);
    m.outputs = dirs
        .iter()
        .flat_map(|d| {
            let rel = d.strip_prefix(&o.out).unwrap_or(d).to_path_buf();
            ESTIMATE_OUTPUTS.iter().map(move |f| rel.join(f).display().to_string())
        })
        .collect();
    create_dir(&o.out)?;
    m.write(&o.out)?;

    let jobs: Vec<(usize, &TimeSeries)> = series.iter().enumerate().collect();
    let results = par_map(&jobs, o.jobs, |(_, y)| estimate_spectrum(y, &bank, &config));
    let mut first_error = None;
    for ((path, dir), result) in o.data.iter().zip(&dirs).zip(results) {
        let outcome = create_dir(dir).and_then(|_| match result {
            Ok(e) => write_estimate(dir, &e),
            Err(e) => {
                if let EstimationError::Newton(n) = e.root() {
                    if let Some(t) = n.trace() {
                        write_trace(dir, t)?;
                    }
                }
                Err(e.into())
            }
        });
        if let Err(e) = outcome {
            let e = CliError { code: e.code, message: format!("{}: {}", path.display(), e.message) };
            match first_error {
                None => first_error = Some(e),
                Some(_) => eprintln!("error: {e}"),
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

fn write_estimate(dir: &Path, e: &Estimate) -> CliResult<()> {
    write_json(
        &dir.join("sigma.json"),
        &json!({
            "format_version": FORMAT_VERSION,
            "sigma_hat": MatrixJson::from(e.sigma_hat.clone()),
            "sigma_projected": MatrixJson::from(e.sigma_projected.clone()),
        }),
    )?;
    write_json(&dir.join("lambda.json"), &lambda_json(&e.lambda, &e.sigma_projected)?)?;
    write_json(&dir.join("w_hat.json"), &factor_json(&e.w_hat))?;
    write_bytes(&dir.join("spectrum.csv"), &spectrum_csv(e.grid.thetas(), &e.spectrum)?)?;
    write_bytes(&dir.join("prior_spectrum.csv"), &spectrum_csv(e.grid.thetas(), &e.prior_spectrum)?)?;
    write_trace(dir, &e.trace)?;
    let last = e.trace.last().expect("trace has the starting point");
    write_json(
        &dir.join("diagnostics.json"),
        &json!({
            "format_version": FORMAT_VERSION,
            "hellinger_distance": e.hellinger,
            "constraint_residual": e.constraint_residual,
            "iterations": e.trace.iterations(),
            "grad_norm": last.grad_norm,
            "burn_in": e.burn_in,
        }),
    )?;
    eprintln!(
        "{}: {} iterations, d_H(prior, estimate) = {:.6}",
        dir.display(),
        e.trace.iterations(),
        e.hellinger
    );
    Ok(())
}

pub struct SimulateOptions {
    pub scenario: String,
    pub n: Option<usize>,
    pub seed: u64,
    pub runs: usize,
    pub grid: usize,
    pub jobs: usize,
    pub out: PathBuf,
}

/// Default record length of each scenario.
pub fn default_samples(s: Scenario) -> usize {
    match s {
        Scenario::Arma => 500,
        Scenario::Sinusoids => 300,
        Scenario::Bivariate => 100,
    }
}

pub fn simulate(o: &SimulateOptions, args: &[String]) -> CliResult<()> {
    let scenario = Scenario::from_str(&o.scenario).map_err(CliError::usage)?;
    let n = o.n.unwrap_or_else(|| default_samples(scenario));
    if n == 0 || o.runs == 0 || o.grid == 0 || o.jobs == 0 {
        return Err(CliError::usage("--n, --runs, --grid and --jobs must be positive"));
    }
    let seeds: Vec<u64> = (0..o.runs as u64).map(|k| o.seed + k).collect();
    let data_files: Vec<String> = if o.runs == 1 {
        vec!["data.csv".into()]
    } else {
        seeds.iter().map(|s| format!("seed_{s}/data.csv")).collect()
    };
    let mut m = RunManifest::new(
        "simulate",
        args,
        json!({ "scenario": scenario.name(), "samples": n, "seed": o.seed, "runs": o.runs, "grid": o.grid }),
    );
    m.seed = Some(o.seed);
    m.outputs = data_files.clone();
    m.outputs.extend(["true_spectrum.csv".to_string(), "true_factor.json".to_string()]);
    create_dir(&o.out)?;
    m.write(&o.out)?;

    let grid = FrequencyGrid::uniform(o.grid);
    write_bytes(&o.out.join("true_spectrum.csv"), &spectrum_csv(grid.thetas(), &scenario.true_spectrum(&grid))?)?;
    write_json(
        &o.out.join("true_factor.json"),
        &factor_json(&SpectralFactor::left(scenario.true_factor())),
    )?;
    let written = par_map(&seeds, o.jobs, |&seed| -> CliResult<Vec<u8>> {
        let mut buf = Vec::new();
        scenario.generate(n, seed).write_csv(&mut buf).map_err(|e| CliError::io(e.to_string()))?;
        Ok(buf)
    });
    for (file, bytes) in data_files.iter().zip(written) {
        let path = o.out.join(file);
        if let Some(parent) = path.parent() {
            create_dir(parent)?;
        }
        write_bytes(&path, &bytes?)?;
    }
    Ok(())
}

pub struct ErrorCurveOptions {
    pub estimates: PathBuf,
    pub truth: PathBuf,
    pub out: PathBuf,
}

pub fn error_curve(o: &ErrorCurveOptions, args: &[String]) -> CliResult<()> {
    let parse = |p: &Path, bytes: &[u8]| {
        read_spectrum_csv(bytes).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))
    };
    let truth_bytes = read_input(&o.truth)?;
    let (thetas, truth) = parse(&o.truth, &truth_bytes)?;
    if !o.estimates.is_dir() {
        return Err(CliError::usage(format!("{} is not a directory", o.estimates.display())));
    }
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(&o.estimates)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() == "spectrum.csv")
        .map(|e| e.into_path())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::usage(format!("no spectrum.csv under {}", o.estimates.display())));
    }
    let mut m = RunManifest::new("error-curve", args, json!({ "runs": files.len() }));
    m.input(&o.truth, &truth_bytes);
    let mut runs = Vec::new();
    for f in &files {
        let bytes = read_input(f)?;
        let (t, values) = parse(f, &bytes)?;
        if t != thetas {
            return Err(CliError::usage(format!("{}: grid differs from {}", f.display(), o.truth.display())));
        }
        m.input(f, &bytes);
        runs.push(values);
    }
    let curve = average_error_curve(&thetas, &runs, &truth)?;
    m.outputs = vec!["e_curve.csv".into(), "e_curve_runs.json".into()];
    create_dir(&o.out)?;
    m.write(&o.out)?;

    let mut csv = String::from("theta,error\n");
    for (t, e) in curve.thetas.iter().zip(&curve.mean) {
        csv.push_str(&format!("{t},{e}\n"));
    }
    write_bytes(&o.out.join("e_curve.csv"), csv.as_bytes())?;
    let names: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
    let flagged: Vec<&String> = curve.flagged.iter().map(|&k| &names[k]).collect();
    for f in &flagged {
        eprintln!("run {f} exceeds ten times the median error somewhere");
    }
    write_json(
        &o.out.join("e_curve_runs.json"),
        &json!({ "format_version": FORMAT_VERSION, "runs": names, "flagged": flagged }),
    )?;
    Ok(())
}

/// Re-runs a recorded command after checking that its inputs are unchanged.
pub fn replay_args(manifest: &Path, out: Option<&Path>) -> CliResult<Vec<String>> {
    let m = RunManifest::read(manifest)?;
    m.verify_inputs()?;
    let mut args = m.args.clone();
    if let Some(dir) = out {
        args.push("--out".into());
        args.push(dir.display().to_string());
    }
    Ok(args)
}
