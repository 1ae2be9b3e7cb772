//! Command-line front end: reproducible seeded experiment drivers with CSV
//! and JSON outputs.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical target
//! unmet. All randomness flows from the single `--seed` flag. Every output
//! embeds the resolved configuration, either as a JSON field or as a `#`
//! comment line heading the CSV.

use crate::branching::{approximate, degenerate, lift, masked_error_energy, verify, BranchingError};
use crate::ctsampling::{bandlimit, error_report, evaluate, lift_to_ct};
use crate::io;
use crate::predictor::{error_curve, extract_kernel, PredictorError, PredictorParams};
use crate::recovery::{
    decimate, noise_sweep, recover_range, tune_gamma_holdout, RecoverConfig,
};
use crate::spectral::DegeneracyPlan;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::json;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or input; exit code 2.
    Config(String),
    /// A numerical target could not be met; exit code 3.
    Unmet(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Unmet(m) => write!(f, "numerical target unmet: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unmet(_) => 3,
        }
    }
}

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{e}"))
}

#[derive(Parser, Debug)]
#[command(
    name = "branchspec",
    about = "Construct sequences recoverable from every m-th sample and recover them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Approximate a sequence by one with branching spectrum degeneracy.
    Approximate(ApproximateArgs),
    /// Extract the sparse prediction kernel and its diagnostics.
    Kernel(KernelArgs),
    /// Recover a window of values from decimated observations.
    Recover(RecoverArgs),
    /// Noise and window-length robustness sweep.
    Sweep(SweepArgs),
    /// Shift-approximation error curve and kernel at the reference settings.
    Figure1(Figure1Args),
    /// Continuous-time sparse sampling demo.
    Ctdemo(CtdemoArgs),
}

fn load_config<T: for<'de> Deserialize<'de> + Default>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(cfg_err)?;
            serde_json::from_str(&text).map_err(cfg_err)
        }
    }
}

fn ensure_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(cfg_err)
}

// ---------------------------------------------------------------- approximate

#[derive(Args, Debug)]
pub struct ApproximateArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input sequence JSON ({"origin": .., "re": [..], "im": [..]}).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Absolute l2 target for the approximation.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Relative target: eps = eps_rel * ||x||.
    #[arg(long)]
    pub eps_rel: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Deserialize, Default)]
struct ApproximateFile {
    input: Option<PathBuf>,
    m: Option<u32>,
    eps: Option<f64>,
    eps_rel: Option<f64>,
    grid: Option<usize>,
}

fn run_approximate(a: &ApproximateArgs) -> Result<(), CliError> {
    let file: ApproximateFile = load_config(&a.config)?;
    let input = a
        .input
        .clone()
        .or(file.input)
        .ok_or_else(|| CliError::Config("missing --input".into()))?;
    let m = a.m.or(file.m).unwrap_or(2);
    if m < 1 {
        return Err(CliError::Config("m must be at least 1".into()));
    }
    let x = io::read_sequence_json(&input).map_err(cfg_err)?;
    let eps = match (a.eps.or(file.eps), a.eps_rel.or(file.eps_rel)) {
        (Some(e), _) => e,
        (None, Some(rel)) => rel * x.l2_norm(),
        (None, None) => 0.01 * x.l2_norm(),
    };
    let plan_probe = DegeneracyPlan::default_plan(m, 1e-9).map_err(cfg_err)?;
    let grid = a.grid.or(file.grid).unwrap_or_else(|| plan_probe.default_grid());
    ensure_out(&a.out)?;
    let config = json!({
        "command": "approximate", "input": input, "m": m, "eps": eps, "grid": grid,
    });

    if eps <= 0.0 && !x.is_zero() {
        return Err(CliError::Config("eps must be positive".into()));
    }

    match approximate(&x, m, eps, grid) {
        Ok((rep, delta)) => {
            io::write_sequence_json(&a.out.join("xtilde.json"), &rep.sequence, &config)
                .map_err(cfg_err)?;
            let err = rep.sequence.sub(&x).l2_norm();
            // per-branch surgery error (the same value for every branch)
            // alongside the total, plus masked-bin residuals for audit
            let (branch_error, residuals) = if x.is_zero() {
                (0.0, Vec::new())
            } else {
                let plan = DegeneracyPlan::default_plan(m, delta).map_err(cfg_err)?;
                let bp = lift(&x, m);
                let branch_error =
                    masked_error_energy(&bp, &plan, grid).map_err(cfg_err)?.sqrt();
                let out = degenerate(&bp, &plan, grid).map_err(cfg_err)?;
                let rep_v = verify(&out, Some(&plan), grid).map_err(cfg_err)?;
                let rows = rep_v
                    .membership
                    .unwrap_or_default()
                    .iter()
                    .map(|r| json!({"d": r.d, "residual": r.residual, "max_abs": r.max_overall}))
                    .collect();
                (branch_error, rows)
            };
            let report = json!({
                "achieved_delta": delta,
                "l2_error": err,
                "per_branch_error": branch_error,
                "eps": eps,
                "per_branch_residuals": residuals,
                "config": config,
            });
            fs::write(
                a.out.join("approximate_report.json"),
                serde_json::to_string_pretty(&report).map_err(cfg_err)?,
            )
            .map_err(cfg_err)?;
            Ok(())
        }
        Err(BranchingError::GridFloor { target, floor }) => {
            let report = json!({
                "error": "grid floor",
                "target": target,
                "achievable_floor": floor,
                "config": config,
            });
            let _ = fs::write(
                a.out.join("approximate_report.json"),
                serde_json::to_string_pretty(&report).unwrap_or_default(),
            );
            Err(CliError::Unmet(format!(
                "eps {eps} below the grid floor; achievable error is {floor}"
            )))
        }
        Err(e) => Err(cfg_err(e)),
    }
}

// --------------------------------------------------------------------- kernel

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Prediction horizon n.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub nu: Option<u32>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Deserialize, Default)]
struct KernelFile {
    gamma: Option<f64>,
    r: Option<f64>,
    n: Option<u32>,
    nu: Option<u32>,
    m: Option<u32>,
    grid: Option<usize>,
    truncation: Option<usize>,
}

fn run_kernel(a: &KernelArgs) -> Result<(), CliError> {
    let file: KernelFile = load_config(&a.config)?;
    let gamma = a.gamma.or(file.gamma).unwrap_or(4.0);
    let r = a.r.or(file.r).unwrap_or(0.4);
    let n = a.n.or(file.n).unwrap_or(1);
    let nu = a.nu.or(file.nu).unwrap_or(1);
    let m = a.m.or(file.m).unwrap_or(4);
    let grid = a.grid.or(file.grid).unwrap_or(8192);
    let truncation = a.truncation.or(file.truncation);
    let params = PredictorParams::new(gamma, r, n, nu, m).map_err(cfg_err)?;
    ensure_out(&a.out)?;
    let config = json!({
        "command": "kernel", "gamma": gamma, "r": r, "n": n, "nu": nu, "m": m,
        "grid": grid, "truncation": truncation,
    });
    let kernel = match extract_kernel(&params, grid, truncation) {
        Ok(k) => k,
        Err(e @ (PredictorError::Leakage { .. } | PredictorError::Overflow { .. })) => {
            return Err(CliError::Unmet(format!("{e}")));
        }
        Err(e) => return Err(cfg_err(e)),
    };
    io::write_kernel_csv(&a.out.join("kernel.csv"), &kernel.taps, &config).map_err(cfg_err)?;
    let meta = json!({
        "gamma": gamma, "r": r, "n": n, "nu": nu, "m": m,
        "alpha": params.alpha(),
        "kappa": kernel.kappa,
        "N": kernel.grid,
        "K": kernel.truncation,
        "leakage": kernel.leakage,
        "imag_residual": kernel.imag_residual,
        "tail_energy_fraction": kernel.tail_energy_fraction,
        "config": config,
    });
    fs::write(
        a.out.join("kernel_meta.json"),
        serde_json::to_string_pretty(&meta).map_err(cfg_err)?,
    )
    .map_err(cfg_err)?;
    Ok(())
}

// -------------------------------------------------------------------- recover

#[derive(Args, Debug)]
pub struct RecoverArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Observations CSV (k,re,im with k the decimated index).
    #[arg(long)]
    pub obs: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Recover every |n| <= targets.
    #[arg(long)]
    pub targets: Option<i64>,
    /// Fixed gamma; omit to tune on the observations.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Assumed noise radius for the error-bound column.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Truth sequence JSON for error columns.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Deserialize, Default)]
struct RecoverFile {
    obs: Option<PathBuf>,
    m: Option<u32>,
    targets: Option<i64>,
    gamma: Option<f64>,
    sigma: Option<f64>,
    truth: Option<PathBuf>,
    grid: Option<usize>,
}

const TUNE_SCHEDULE: [f64; 8] = [1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 12.0];

fn run_recover(a: &RecoverArgs) -> Result<(), CliError> {
    let file: RecoverFile = load_config(&a.config)?;
    let obs_path = a
        .obs
        .clone()
        .or(file.obs)
        .ok_or_else(|| CliError::Config("missing --obs".into()))?;
    let m = a.m.or(file.m).unwrap_or(2);
    let targets = a.targets.or(file.targets).unwrap_or(4);
    let sigma = a.sigma.or(file.sigma).unwrap_or(0.0);
    let grid = a.grid.or(file.grid).unwrap_or(8192);
    let obs = io::read_observations_csv(&obs_path, m).map_err(cfg_err)?;
    let mut cfg = RecoverConfig::new(m, a.gamma.or(file.gamma).unwrap_or(4.0));
    cfg.grid = grid;
    cfg.assumed_sigma = sigma;
    let tuned = if a.gamma.or(file.gamma).is_none() && m > 1 {
        let (g, v) = tune_gamma_holdout(&obs, &cfg, &TUNE_SCHEDULE, 8).map_err(cfg_err)?;
        cfg.gamma = g;
        Some((g, v))
    } else {
        None
    };
    let truth = match a.truth.clone().or(file.truth) {
        Some(p) => Some(io::read_sequence_json(&p).map_err(cfg_err)?),
        None => None,
    };
    ensure_out(&a.out)?;
    let config = json!({
        "command": "recover", "obs": obs_path, "m": m, "targets": targets,
        "gamma": cfg.gamma, "tuned": tuned.map(|t| json!({"gamma": t.0, "holdout_error": t.1})),
        "sigma": sigma, "grid": grid,
    });
    let report = recover_range(&obs, targets, &cfg).map_err(cfg_err)?;
    io::write_recovery_csv(&a.out.join("recovery.csv"), &report, truth.as_ref(), &config)
        .map_err(cfg_err)?;
    Ok(())
}

// ---------------------------------------------------------------------- sweep

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Truth sequence JSON (the degenerate representative).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Comma-separated noise radii.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// Comma-separated observation half-window lengths.
    #[arg(long, value_delimiter = ',')]
    pub n_obs: Option<Vec<i64>>,
    #[arg(long)]
    pub targets: Option<i64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Deserialize, Default)]
struct SweepFile {
    truth: Option<PathBuf>,
    m: Option<u32>,
    sigmas: Option<Vec<f64>>,
    n_obs: Option<Vec<i64>>,
    targets: Option<i64>,
    seed: Option<u64>,
}

fn run_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let file: SweepFile = load_config(&a.config)?;
    let truth_path = a
        .truth
        .clone()
        .or(file.truth)
        .ok_or_else(|| CliError::Config("missing --truth".into()))?;
    let m = a.m.or(file.m).unwrap_or(2);
    let sigmas = a.sigmas.clone().or(file.sigmas).unwrap_or(vec![0.0, 1e-4, 1e-3]);
    let n_obs = a.n_obs.clone().or(file.n_obs).unwrap_or(vec![128, 256, 512]);
    let targets = a.targets.or(file.targets).unwrap_or(4);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let truth = io::read_sequence_json(&truth_path).map_err(cfg_err)?;
    let base = RecoverConfig::new(m, 4.0);
    ensure_out(&a.out)?;
    let config = json!({
        "command": "sweep", "truth": truth_path, "m": m, "sigmas": sigmas,
        "n_obs": n_obs, "targets": targets, "seed": seed,
    });
    let table = noise_sweep(&truth, m, &sigmas, &n_obs, &base, targets, seed, &TUNE_SCHEDULE)
        .map_err(cfg_err)?;

    let mut out = String::new();
    out.push_str(&io::config_comment(&config));
    out.push('\n');
    out.push_str("sigma,n_obs,gamma,max_error,noiseless_same_gamma,eta_bound,kappa_max\n");
    for c in &table.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.sigma, c.n_obs, c.gamma, c.max_error, c.noiseless_same_gamma, c.eta_bound, c.kappa_max
        ));
    }
    fs::write(a.out.join("sweep.csv"), out).map_err(cfg_err)?;

    let mut out = String::new();
    out.push_str(&io::config_comment(&config));
    out.push('\n');
    out.push_str("gamma,target_error,holdout_error\n");
    for r in &table.gamma_rows {
        out.push_str(&format!("{},{},{}\n", r.gamma, r.target_error, r.holdout_error));
    }
    fs::write(a.out.join("gamma_sweep.csv"), out).map_err(cfg_err)?;
    Ok(())
}

// -------------------------------------------------------------------- figure1

#[derive(Args, Debug)]
pub struct Figure1Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Deserialize, Default)]
struct Figure1File {
    grid: Option<usize>,
}

fn run_figure1(a: &Figure1Args) -> Result<(), CliError> {
    let file: Figure1File = load_config(&a.config)?;
    let grid = a.grid.or(file.grid).unwrap_or(8192);
    let params = PredictorParams::new(4.0, 0.4, 1, 1, 4).map_err(cfg_err)?;
    ensure_out(&a.out)?;
    let config = json!({
        "command": "figure1", "gamma": 4.0, "r": 0.4, "n": 1, "nu": 1, "m": 4, "grid": grid,
    });
    let curve = error_curve(&params, grid);
    io::write_error_curve_csv(&a.out.join("error_curve.csv"), &curve, &config)
        .map_err(cfg_err)?;
    let kernel = extract_kernel(&params, grid, None).map_err(cfg_err)?;
    io::write_kernel_csv(&a.out.join("kernel.csv"), &kernel.taps, &config).map_err(cfg_err)?;
    Ok(())
}

// --------------------------------------------------------------------- ctdemo

#[derive(Args, Debug)]
pub struct CtdemoArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Relative approximation budget for the sample sequence.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Deserialize, Default)]
struct CtdemoFile {
    m: Option<u32>,
    eps: Option<f64>,
    grid: Option<usize>,
}

fn run_ctdemo(a: &CtdemoArgs) -> Result<(), CliError> {
    let file: CtdemoFile = load_config(&a.config)?;
    let m = a.m.or(file.m).unwrap_or(2);
    let eps_rel = a.eps.or(file.eps).unwrap_or(0.01);
    let grid = a.grid.or(file.grid).unwrap_or(4096);
    ensure_out(&a.out)?;
    let config = json!({
        "command": "ctdemo", "m": m, "eps": eps_rel, "grid": grid,
    });

    // Band-limited test function: Gaussian spectrum, time-shifted so the
    // sample sequence sits to the right of the origin.
    let omega_max = PI;
    let tau = PI / omega_max;
    let shift_t = 48.0;
    let points = 4001;
    let omegas: Vec<f64> = (0..points)
        .map(|i| -8.0 + 16.0 * i as f64 / (points - 1) as f64)
        .collect();
    let f_spec: Vec<Complex64> = omegas
        .iter()
        .map(|&w| Complex64::from_polar((-(w / 0.18) * (w / 0.18)).exp(), -w * shift_t))
        .collect();
    let f_bl = bandlimit(&omegas, &f_spec, omega_max, 0, 120).map_err(cfg_err)?;
    let x = f_bl.coeffs.clone();

    let eps = eps_rel * x.l2_norm();
    let (rep, delta) = match approximate(&x, m, eps, grid) {
        Ok(v) => v,
        Err(BranchingError::GridFloor { floor, .. }) => {
            return Err(CliError::Unmet(format!(
                "approximation floor {floor} above target {eps}"
            )))
        }
        Err(e) => return Err(cfg_err(e)),
    };
    let xt = rep.sequence.clone();
    let ct = error_report(&x, &xt, tau, m, omega_max, grid).map_err(cfg_err)?;
    let eps_branch = eps / (2.0 * m as f64 - 1.0);
    let bound = ct.paper_c * eps_branch;

    // sparse recovery of the degenerate samples
    let obs = decimate(&xt, m, -512, 512);
    let mut cfg = RecoverConfig::new(m, 4.0);
    let tuned = if m > 1 {
        let (g, v) = tune_gamma_holdout(&obs, &cfg, &TUNE_SCHEDULE, 8).map_err(cfg_err)?;
        cfg.gamma = g;
        Some((g, v))
    } else {
        None
    };
    let report = recover_range(&obs, 4, &cfg).map_err(cfg_err)?;
    io::write_recovery_csv(&a.out.join("recovered.csv"), &report, Some(&xt), &config)
        .map_err(cfg_err)?;
    let recovery_error = report.max_error_vs(&xt);

    // interpolation spot check at the grid times
    let f_t = lift_to_ct(xt.clone(), tau).map_err(cfg_err)?;
    let mut interp_residual = 0.0f64;
    for (k, v) in xt.iter_indexed().step_by(16) {
        interp_residual = interp_residual.max((evaluate(&f_t, tau * k as f64, xt.len()) - v).norm());
    }

    let out = json!({
        "tau": tau,
        "m": m,
        "Omega": omega_max,
        "eps": eps,
        "achieved_delta": delta,
        "l2_seq": ct.l2_seq,
        "l2_ct": ct.l2_ct_parseval,
        "l2_ct_quadrature": ct.l2_ct_quadrature,
        "linf_ct": ct.linf_ct,
        "paper_C": ct.paper_c,
        "closeness_bound": bound,
        "window_T": ct.window_t,
        "quad_points": ct.quad_points,
        "recovery_max_error": recovery_error,
        "interp_residual": interp_residual,
        "tuned": tuned.map(|t| json!({"gamma": t.0, "holdout_error": t.1})),
        "config": config,
    });
    fs::write(
        a.out.join("ct_report.json"),
        serde_json::to_string_pretty(&out).map_err(cfg_err)?,
    )
    .map_err(cfg_err)?;

    if ct.linf_ct > bound {
        return Err(CliError::Unmet(format!(
            "continuous-time gap {} exceeds the bound {}",
            ct.linf_ct, bound
        )));
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Approximate(a) => run_approximate(a),
        Command::Kernel(a) => run_kernel(a),
        Command::Recover(a) => run_recover(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Figure1(a) => run_figure1(a),
        Command::Ctdemo(a) => run_ctdemo(a),
    }
}
