//! Recovery of a representative branch from its decimated, possibly noisy,
//! truncated observations.
//!
//! Observed lattice points are returned verbatim. Off-lattice targets
//! `n = p m - d` are estimates of the branch value `x^_d(p m)`: the branch
//! agrees with the observations on one half-line, vanishes on its own
//! frequency mask, and is therefore extrapolable by the sparse kernel. The
//! kernel horizon is the smallest power whose taps stay inside the observed
//! half-line, `ceil(|p| / nu)`; the direct `p m` horizon raises the power
//! of `V` with it and turns into catastrophic cancellation for `|p| >= 2`.

use crate::predictor::{
    extract_kernel, predict, PredictorError, PredictorKernel, PredictorParams,
};
use crate::spectral::{DegeneracyPlan, Sequence};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("observation window must contain index 0")]
    EmptyWindow,
    #[error("gamma schedule is empty")]
    EmptySchedule,
}

/// Decimated samples `z(k) = x(m k)` for `k in [-n_obs, n_obs]`.
#[derive(Debug, Clone)]
pub struct Observations {
    m: u32,
    n_obs: i64,
    samples: Vec<Complex64>,
}

impl Observations {
    pub fn new(m: u32, n_obs: i64, samples: Vec<Complex64>) -> Result<Self, RecoveryError> {
        if n_obs < 0 || samples.len() != (2 * n_obs + 1) as usize {
            return Err(RecoveryError::EmptyWindow);
        }
        Ok(Observations { m, n_obs, samples })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n_obs(&self) -> i64 {
        self.n_obs
    }

    pub fn get(&self, k: i64) -> Option<Complex64> {
        if k < -self.n_obs || k > self.n_obs {
            None
        } else {
            Some(self.samples[(k + self.n_obs) as usize])
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n0 = self.n_obs;
        self.samples.iter().enumerate().map(move |(i, &v)| (i as i64 - n0, v))
    }

    /// Reverse the observation axis: `z'(k) = z(-k)`.
    pub fn reversed(&self) -> Observations {
        let mut samples = self.samples.clone();
        samples.reverse();
        Observations { m: self.m, n_obs: self.n_obs, samples }
    }

    /// Keep only `|k| <= n_obs`, dropping the rest.
    pub fn restricted(&self, n_obs: i64) -> Observations {
        let n = n_obs.min(self.n_obs);
        let lo = (self.n_obs - n) as usize;
        let hi = (self.n_obs + n) as usize;
        Observations { m: self.m, n_obs: n, samples: self.samples[lo..=hi].to_vec() }
    }

    /// Embed the observations into plain index space: value `z(k)` sits at
    /// index `m k`, other indices hold zero. Kernel taps only ever touch
    /// lattice positions, so the zeros are never read.
    pub fn as_lattice_sequence(&self) -> Sequence {
        let m = self.m as i64;
        let len = (2 * self.n_obs * m + 1) as usize;
        let origin = -self.n_obs * m;
        let mut values = vec![Complex64::new(0.0, 0.0); len];
        for (k, v) in self.iter() {
            values[(k * m - origin) as usize] = v;
        }
        Sequence::new(origin, values)
    }
}

/// Sample every `m`-th element of `x` over `k in [lo, hi]`.
pub fn decimate(x: &Sequence, m: u32, lo: i64, hi: i64) -> Observations {
    let n_obs = lo.abs().max(hi.abs());
    let samples = (-n_obs..=n_obs)
        .map(|k| {
            if k >= lo && k <= hi {
                x.get(k * m as i64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Observations { m, n_obs, samples }
}

/// The unique `(d, p)` with `n = p m - d` and `d` admissible for the sign
/// of `n`: `d in {0..m-1}` for `n >= 0`, `d in {-m+1..0}` for `n < 0`.
pub fn branch_index(n: i64, m: u32) -> (i32, i64) {
    let mm = m as i64;
    if n >= 0 {
        let d = (-n).rem_euclid(mm);
        (d as i32, (n + d) / mm)
    } else {
        let d = -n.rem_euclid(mm);
        (d as i32, (n + d) / mm)
    }
}

/// Recovery settings: branch multipliers, kernel shape, and the noise level
/// assumed when reporting error bounds.
#[derive(Debug, Clone)]
pub struct RecoverConfig {
    pub m: u32,
    pub gamma: f64,
    pub r: f64,
    pub grid: usize,
    pub truncation: Option<usize>,
    /// Noise radius used for the `sigma (kappa + 1)` bound column.
    pub assumed_sigma: f64,
    zeta: Vec<u64>,
}

impl RecoverConfig {
    pub fn new(m: u32, gamma: f64) -> Self {
        let zeta = (-(m as i32 - 1)..=(m as i32 - 1))
            .map(|d| DegeneracyPlan::example_zeta(m, d))
            .collect();
        RecoverConfig {
            m,
            gamma,
            r: 0.4,
            grid: 8192,
            truncation: None,
            assumed_sigma: 0.0,
            zeta,
        }
    }

    pub fn zeta(&self, d: i32) -> u64 {
        self.zeta[(d + self.m as i32 - 1) as usize]
    }

    /// Swap the multiplier assignment `zeta(d) <-> zeta(-d)`: the natural
    /// plan of the time-reversed sequence, whose branch `d` is the mirror
    /// image of branch `-d`.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        out.zeta.reverse();
        out
    }
}

/// One recovered target.
#[derive(Debug, Clone, Copy)]
pub struct TargetRecord {
    pub n: i64,
    pub d: i32,
    pub p: i64,
    /// Kernel horizon (power of `V`); 0 for verbatim lattice reads.
    pub horizon: u32,
    pub estimate: Complex64,
    pub gamma: f64,
    pub kappa: f64,
    pub eta_bound: f64,
    /// Taps that fell outside the observation window.
    pub coverage_missing: usize,
    pub on_lattice: bool,
}

#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub m: u32,
    pub records: Vec<TargetRecord>,
}

impl RecoveryReport {
    pub fn max_error_vs(&self, truth: &Sequence) -> f64 {
        self.records
            .iter()
            .map(|r| (r.estimate - truth.get(r.n)).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_kappa(&self) -> f64 {
        self.records.iter().map(|r| r.kappa).fold(0.0, f64::max)
    }
}

/// `sigma * (kappa + 1)`: the noise contribution bound for one estimate.
pub fn eta_bound(kappa: f64, sigma: f64) -> f64 {
    sigma * (kappa + 1.0)
}

type KernelCache = BTreeMap<(u64, u32, u32), PredictorKernel>;

fn kernel_for(
    cache: &mut KernelCache,
    cfg: &RecoverConfig,
    horizon: u32,
    nu: u32,
) -> Result<PredictorKernel, RecoveryError> {
    let key = (cfg.gamma.to_bits(), horizon, nu);
    if let Some(k) = cache.get(&key) {
        return Ok(k.clone());
    }
    let params = PredictorParams::new(cfg.gamma, cfg.r, horizon, nu, cfg.m)?;
    let kernel = extract_kernel(&params, cfg.grid, cfg.truncation)?;
    cache.insert(key, kernel.clone());
    Ok(kernel)
}

fn recover_with_cache(
    obs: &Observations,
    n: i64,
    cfg: &RecoverConfig,
    cache: &mut KernelCache,
) -> Result<TargetRecord, RecoveryError> {
    let m = cfg.m;
    let (d, p) = branch_index(n, m);
    debug_assert_eq!(p * m as i64 - d as i64, n);

    // on-lattice targets inside the window are read off verbatim
    if d == 0 && p.abs() <= obs.n_obs() {
        return Ok(TargetRecord {
            n,
            d,
            p,
            horizon: 0,
            estimate: obs.get(p).unwrap(),
            gamma: cfg.gamma,
            kappa: 0.0,
            eta_bound: cfg.assumed_sigma,
            coverage_missing: 0,
            on_lattice: true,
        });
    }

    // negative-side targets mirror onto the forward path through reversal
    let (work, p_abs) = if n >= 0 {
        (obs.clone(), p)
    } else {
        (obs.reversed(), -p)
    };
    let nu = cfg.zeta(d) as u32;
    let horizon = if d == 0 {
        // lattice extrapolation beyond the window
        ((p_abs - obs.n_obs()).max(1) as u64).div_ceil(nu as u64) as u32
    } else {
        (p_abs as u64).div_ceil(nu as u64).max(1) as u32
    };
    let kernel = kernel_for(cache, cfg, horizon, nu)?;
    let history = work.as_lattice_sequence();
    let anchor = p_abs * m as i64 - horizon as i64;
    let pr = predict(&kernel, &history, anchor);
    Ok(TargetRecord {
        n,
        d,
        p,
        horizon,
        estimate: pr.estimate,
        gamma: cfg.gamma,
        kappa: kernel.kappa,
        eta_bound: eta_bound(kernel.kappa, cfg.assumed_sigma),
        coverage_missing: pr.missing,
        on_lattice: false,
    })
}

/// Recover the single target `x~(n)`.
pub fn recover_point(
    obs: &Observations,
    n: i64,
    cfg: &RecoverConfig,
) -> Result<TargetRecord, RecoveryError> {
    let mut cache = KernelCache::new();
    recover_with_cache(obs, n, cfg, &mut cache)
}

/// Recover every target `|n| <= targets`.
pub fn recover_range(
    obs: &Observations,
    targets: i64,
    cfg: &RecoverConfig,
) -> Result<RecoveryReport, RecoveryError> {
    let mut cache = KernelCache::new();
    let mut records = Vec::with_capacity((2 * targets + 1) as usize);
    for n in -targets..=targets {
        records.push(recover_with_cache(obs, n, cfg, &mut cache)?);
    }
    Ok(RecoveryReport { m: cfg.m, records })
}

/// One-step-ahead extension of the decimated lattice beyond the observed
/// window, appending each estimate before the next step. A cross-check for
/// the direct multi-horizon path.
pub fn iterated_recovery(
    obs: &Observations,
    steps: usize,
    cfg: &RecoverConfig,
) -> Result<RecoveryReport, RecoveryError> {
    let mut cache = KernelCache::new();
    let m = cfg.m as i64;
    let nu = cfg.zeta(0) as u32;
    let kernel = kernel_for(&mut cache, cfg, 1, nu)?;
    let mut history = extend_window(&obs.as_lattice_sequence(), steps as i64 * m);
    let mut records = Vec::with_capacity(steps);
    for t in 1..=steps as i64 {
        let p = obs.n_obs() + t;
        let anchor = p * m - 1;
        let pr = predict(&kernel, &history, anchor);
        set_value(&mut history, p * m, pr.estimate);
        records.push(TargetRecord {
            n: p * m,
            d: 0,
            p,
            horizon: 1,
            estimate: pr.estimate,
            gamma: cfg.gamma,
            kappa: kernel.kappa,
            eta_bound: eta_bound(kernel.kappa, cfg.assumed_sigma),
            coverage_missing: pr.missing,
            on_lattice: false,
        });
    }
    Ok(RecoveryReport { m: cfg.m, records })
}

fn extend_window(x: &Sequence, extra: i64) -> Sequence {
    let mut values = x.values().to_vec();
    values.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), extra as usize));
    Sequence::new(x.origin(), values)
}

fn set_value(x: &mut Sequence, k: i64, v: Complex64) {
    let origin = x.origin();
    let idx = (k - origin) as usize;
    let mut values = x.values().to_vec();
    values[idx] = v;
    *x = Sequence::new(origin, values);
}

/// Pick gamma by validation on the observations themselves: hold out the
/// largest observed lattice values and predict each from strictly earlier
/// samples with the root-branch one-step kernel. Returns the gamma with the
/// smallest worst-case holdout error. This adapts to the noise level the
/// way a fixed frequency-domain bound cannot.
pub fn tune_gamma_holdout(
    obs: &Observations,
    base: &RecoverConfig,
    schedule: &[f64],
    holdout: usize,
) -> Result<(f64, f64), RecoveryError> {
    if schedule.is_empty() {
        return Err(RecoveryError::EmptySchedule);
    }
    let m = base.m as i64;
    let nu = base.zeta(0) as u32;
    // candidate holdout points: largest |z| with enough lookback
    let mut pts: Vec<(i64, f64)> = obs
        .iter()
        .filter(|&(k, _)| k > -obs.n_obs() / 2)
        .map(|(k, v)| (k, v.norm()))
        .collect();
    pts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let pts: Vec<i64> = pts.iter().take(holdout.max(1)).map(|&(k, _)| k).collect();
    let history = obs.as_lattice_sequence();

    let mut best: Option<(f64, f64)> = None;
    for &gamma in schedule {
        let mut cfg = base.clone();
        cfg.gamma = gamma;
        let mut cache = KernelCache::new();
        let kernel = match kernel_for(&mut cache, &cfg, 1, nu) {
            Ok(k) => k,
            Err(RecoveryError::Predictor(PredictorError::Overflow { .. })) => continue,
            Err(e) => return Err(e),
        };
        let mut worst = 0.0f64;
        for &k0 in &pts {
            let anchor = k0 * m - 1;
            let est = predict(&kernel, &history, anchor).estimate;
            let truth = obs.get(k0).unwrap();
            worst = worst.max((est - truth).norm());
        }
        if best.is_none_or(|(_, b)| worst < b) {
            best = Some((gamma, worst));
        }
    }
    best.ok_or(RecoveryError::EmptySchedule)
}

/// Seeded complex noise scaled to an exact l2 radius.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    /// Complex Gaussian samples rescaled so the l2 norm equals `sigma`.
    pub fn generate(&self, len: usize) -> Vec<Complex64> {
        if self.sigma == 0.0 || len == 0 {
            return vec![Complex64::new(0.0, 0.0); len];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut gauss = || {
            // Box-Muller
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI_F * u2).cos()
        };
        let mut v: Vec<Complex64> = (0..len).map(|_| Complex64::new(gauss(), gauss())).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = self.sigma / norm;
        for z in v.iter_mut() {
            *z *= scale;
        }
        v
    }
}

const PI_F: f64 = std::f64::consts::PI;

/// One cell of the robustness sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepCell {
    pub sigma: f64,
    pub n_obs: i64,
    pub gamma: f64,
    pub max_error: f64,
    /// Error of the same recovery run on clean observations at this cell's
    /// gamma; the decomposition baseline.
    pub noiseless_same_gamma: f64,
    pub eta_bound: f64,
    pub kappa_max: f64,
}

/// One row of the gamma sweep at the top noise level.
#[derive(Debug, Clone, Copy)]
pub struct GammaRow {
    pub gamma: f64,
    pub target_error: f64,
    /// Holdout validation error: one-step prediction of the strongest
    /// observed lattice values. Exposes the error floor rising again once
    /// gamma amplifies the noise.
    pub holdout_error: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub targets: i64,
    pub cells: Vec<SweepCell>,
    pub gamma_rows: Vec<GammaRow>,
}

fn add_noise(obs: &Observations, noise: &[Complex64]) -> Observations {
    let samples = obs
        .iter()
        .enumerate()
        .map(|(i, (_, v))| v + noise[i])
        .collect();
    Observations { m: obs.m(), n_obs: obs.n_obs(), samples }
}

/// Error table over `(sigma, n_obs)` plus a gamma sweep at the largest
/// sigma. Gamma is tuned per sigma on the widest window and reused across
/// that row; noise for a sigma is drawn once on the widest window and
/// restricted, so shorter windows see a subset of the same contamination.
#[allow(clippy::too_many_arguments)]
pub fn noise_sweep(
    truth: &Sequence,
    m: u32,
    sigmas: &[f64],
    n_obs_list: &[i64],
    base: &RecoverConfig,
    targets: i64,
    seed: u64,
    schedule: &[f64],
) -> Result<SweepTable, RecoveryError> {
    let widest = n_obs_list.iter().copied().max().ok_or(RecoveryError::EmptyWindow)?;
    let clean = decimate(truth, m, -widest, widest);
    let mut cells = Vec::new();
    let mut top_noisy: Option<Observations> = None;

    for (si, &sigma) in sigmas.iter().enumerate() {
        let noise = NoiseModel { sigma, seed: seed.wrapping_add(si as u64) }
            .generate(clean.iter().count());
        let noisy_widest = add_noise(&clean, &noise);
        let (gamma, _) = tune_gamma_holdout(&noisy_widest, base, schedule, 8)?;
        let mut cfg = base.clone();
        cfg.gamma = gamma;
        cfg.assumed_sigma = sigma;
        for &n_obs in n_obs_list {
            let noisy = noisy_widest.restricted(n_obs);
            let report = recover_range(&noisy, targets, &cfg)?;
            let max_error = report.max_error_vs(truth);
            let clean_restricted = clean.restricted(n_obs);
            let clean_report = recover_range(&clean_restricted, targets, &cfg)?;
            let kappa_max = report.max_kappa();
            cells.push(SweepCell {
                sigma,
                n_obs,
                gamma,
                max_error,
                noiseless_same_gamma: clean_report.max_error_vs(truth),
                eta_bound: eta_bound(kappa_max, sigma),
                kappa_max,
            });
        }
        top_noisy = Some(noisy_widest);
    }

    let mut gamma_rows = Vec::new();
    if let Some(noisy) = top_noisy {
        for &gamma in schedule {
            let mut cfg = base.clone();
            cfg.gamma = gamma;
            cfg.assumed_sigma = *sigmas.last().unwrap_or(&0.0);
            let report = match recover_range(&noisy, targets, &cfg) {
                Ok(r) => r,
                Err(RecoveryError::Predictor(PredictorError::Overflow { .. })) => continue,
                Err(e) => return Err(e),
            };
            let (_, holdout) = tune_gamma_holdout(&noisy, &cfg, &[gamma], 8)?;
            gamma_rows.push(GammaRow {
                gamma,
                target_error: report.max_error_vs(truth),
                holdout_error: holdout,
            });
        }
    }

    Ok(SweepTable { targets, cells, gamma_rows })
}
