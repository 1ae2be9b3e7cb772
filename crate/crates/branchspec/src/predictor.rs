//! The linear extrapolation kernel: a transfer function built from
//! `V(z) = 1 - exp(-gamma / (z + alpha))` whose inverse transform is a
//! sparse one-sided kernel estimating `x(k + n)` from decimated past
//! samples.
//!
//! Numerical regimes matter here. The transfer function has notches near
//! the degeneracy points where its magnitude grows like
//! `exp(n * gamma^(1+r))`, so kernel taps become large quickly as `gamma`
//! grows. Grid application of the transfer function (`apply_transfer`)
//! stays stable for any `gamma` because masked spectra carry exact zeros
//! at the notches; the time-domain convolution (`predict`) uses compensated
//! products and sums to push the usable `gamma` range as far as f64 allows.

use crate::spectral::{build_mask, Sequence, SpectralError, SpectrumGrid};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use thiserror::Error;

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("gamma must exceed 1 (pole must stay inside the unit circle), got {0}")]
    BadGamma(f64),
    #[error("r must be positive, got {0}")]
    BadR(f64),
    #[error("horizon, nu and m must all be at least 1")]
    BadOrders,
    #[error("grid {grid} too coarse: need at least 4 * truncation ({truncation})")]
    GridTooCoarse { grid: usize, truncation: usize },
    #[error("truncation {truncation} must reach the first lattice tap {first_tap}")]
    TruncationTooShort { truncation: usize, first_tap: usize },
    #[error("grid {grid} must be a multiple of the lattice step {step}")]
    GridNotAligned { grid: usize, step: u64 },
    #[error("transfer function overflows f64 on this grid at gamma={gamma}; kernel extraction needs a smaller gamma")]
    Overflow { gamma: f64 },
    #[error("off-lattice leakage {leakage} exceeds {limit} of the peak tap; grid too coarse")]
    Leakage { leakage: f64, limit: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Parameters of the transfer function `H(z) = z^n V(z^(nu*m))^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorParams {
    pub gamma: f64,
    pub r: f64,
    /// Prediction horizon `n`; also the power of `V`.
    pub horizon: u32,
    pub nu: u32,
    pub m: u32,
}

impl PredictorParams {
    pub fn new(gamma: f64, r: f64, horizon: u32, nu: u32, m: u32) -> Result<Self, PredictorError> {
        if gamma.is_nan() || gamma <= 1.0 {
            return Err(PredictorError::BadGamma(gamma));
        }
        if r.is_nan() || r <= 0.0 {
            return Err(PredictorError::BadR(r));
        }
        if horizon < 1 || nu < 1 || m < 1 {
            return Err(PredictorError::BadOrders);
        }
        Ok(PredictorParams { gamma, r, horizon, nu, m })
    }

    /// `alpha = 1 - gamma^{-r}`, in `(0, 1)` for `gamma > 1`.
    pub fn alpha(&self) -> f64 {
        1.0 - self.gamma.powf(-self.r)
    }

    /// Tap lattice step `nu * m`.
    pub fn lattice_step(&self) -> u64 {
        self.nu as u64 * self.m as u64
    }
}

/// `V(z) = 1 - exp(-gamma / (z + 1 - gamma^{-r}))` at an arbitrary point.
pub fn eval_v_at(z: Complex64, gamma: f64, r: f64) -> Complex64 {
    let alpha = 1.0 - gamma.powf(-r);
    Complex64::new(1.0, 0.0) - (-Complex64::new(gamma, 0.0) / (z + alpha)).exp()
}

/// `V` on the unit circle; rejects `gamma <= 1`, where the pole would sit
/// on or outside the circle.
pub fn eval_v(omega: f64, gamma: f64, r: f64) -> Result<Complex64, PredictorError> {
    if gamma.is_nan() || gamma <= 1.0 {
        return Err(PredictorError::BadGamma(gamma));
    }
    if r.is_nan() || r <= 0.0 {
        return Err(PredictorError::BadR(r));
    }
    Ok(eval_v_at(Complex64::from_polar(1.0, omega), gamma, r))
}

/// `H(e^{i omega}) = e^{i omega n} V(e^{i omega nu m})^n`.
pub fn eval_h(omega: f64, p: &PredictorParams) -> Complex64 {
    let v = eval_v_at(
        Complex64::from_polar(1.0, omega * p.lattice_step() as f64),
        p.gamma,
        p.r,
    );
    Complex64::from_polar(1.0, omega * p.horizon as f64) * v.powu(p.horizon)
}

/// Sparse real kernel extracted from the transfer function on a grid.
#[derive(Debug, Clone)]
pub struct PredictorKernel {
    pub params: PredictorParams,
    /// Retained taps `(k, h(k))`, ascending `k`, all on the lattice
    /// `{ j * nu * m - n : j >= n }`.
    pub taps: Vec<(i64, f64)>,
    /// `max |H|` over the grid.
    pub kappa: f64,
    pub grid: usize,
    pub truncation: usize,
    /// Peak off-lattice magnitude relative to the peak tap.
    pub leakage: f64,
    /// Peak imaginary residue relative to the peak tap.
    pub imag_residual: f64,
    /// Lattice tap energy beyond the truncation, as a fraction of the total.
    pub tail_energy_fraction: f64,
}

const LEAKAGE_LIMIT: f64 = 1e-8;
const TAIL_ENERGY_TARGET: f64 = 1e-10;

/// Inverse grid transform of the transfer function, retained on the tap
/// lattice. `truncation = None` picks the smallest cutoff whose lattice
/// tail holds at most `1e-10` of the tap energy, capped at `grid / 4`.
pub fn extract_kernel(
    params: &PredictorParams,
    grid: usize,
    truncation: Option<usize>,
) -> Result<PredictorKernel, PredictorError> {
    let step = params.lattice_step();
    if grid == 0 || !(grid as u64).is_multiple_of(step) || !grid.is_multiple_of(2) {
        return Err(PredictorError::GridNotAligned { grid, step });
    }
    let n = params.horizon as usize;
    let first_tap = n * step as usize - n;

    let mut buf: Vec<Complex64> = (0..grid)
        .map(|j| eval_h(TAU * j as f64 / grid as f64, params))
        .collect();
    let kappa = buf.iter().map(|h| h.norm()).fold(0.0, f64::max);
    if !kappa.is_finite() {
        return Err(PredictorError::Overflow { gamma: params.gamma });
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(grid).process(&mut buf);
    let scale = 1.0 / grid as f64;
    for b in buf.iter_mut() {
        *b *= scale;
    }

    let on_lattice = |k: usize| k >= first_tap && (k + n).is_multiple_of(step as usize);
    let lattice_all: Vec<usize> = (0..grid).filter(|&k| on_lattice(k)).collect();
    let total_energy: f64 = lattice_all.iter().map(|&k| buf[k].norm_sqr()).sum();

    let truncation = match truncation {
        Some(k) => {
            if grid < 4 * k {
                return Err(PredictorError::GridTooCoarse { grid, truncation: k });
            }
            if k < first_tap.max(1) {
                return Err(PredictorError::TruncationTooShort { truncation: k, first_tap });
            }
            k
        }
        None => {
            let cap = grid / 4;
            let mut tail = 0.0;
            let mut cut = cap;
            for &k in lattice_all.iter().rev() {
                if k > cap {
                    continue;
                }
                tail += buf[k].norm_sqr();
                if tail > TAIL_ENERGY_TARGET * total_energy {
                    break;
                }
                cut = k;
            }
            cut.max(first_tap.max(1))
        }
    };

    let taps: Vec<(i64, f64)> = lattice_all
        .iter()
        .filter(|&&k| k <= truncation)
        .map(|&k| (k as i64, buf[k].re))
        .collect();
    let max_tap = taps.iter().map(|(_, h)| h.abs()).fold(0.0, f64::max);
    let imag_residual = if max_tap > 0.0 {
        lattice_all
            .iter()
            .filter(|&&k| k <= truncation)
            .map(|&k| buf[k].im.abs())
            .fold(0.0, f64::max)
            / max_tap
    } else {
        0.0
    };
    let leakage = if max_tap > 0.0 {
        (0..grid)
            .filter(|&k| !on_lattice(k))
            .map(|k| buf[k].norm())
            .fold(0.0, f64::max)
            / max_tap
    } else {
        0.0
    };
    if leakage > LEAKAGE_LIMIT {
        return Err(PredictorError::Leakage { leakage, limit: LEAKAGE_LIMIT });
    }
    let tail_energy: f64 = lattice_all
        .iter()
        .filter(|&&k| k > truncation)
        .map(|&k| buf[k].norm_sqr())
        .sum();
    let tail_energy_fraction = if total_energy > 0.0 { tail_energy / total_energy } else { 0.0 };

    Ok(PredictorKernel {
        params: *params,
        taps,
        kappa,
        grid,
        truncation,
        leakage,
        imag_residual,
        tail_energy_fraction,
    })
}

/// Error-free product: `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Neumaier compensated accumulator.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Outcome of a single prediction.
#[derive(Debug, Clone, Copy)]
pub struct Prediction {
    /// Estimate of `x(k + n)`.
    pub estimate: Complex64,
    /// Taps whose history index fell outside the provided window (those
    /// samples enter as zeros).
    pub missing: usize,
    pub touched: usize,
}

/// Convolve the kernel with history: `y(k) = sum_j h(j) x(k - j)`, an
/// estimate of `x(k + n)`. Missing history is treated as zero and counted,
/// not failed: truncation is part of the error budget, not a panic.
pub fn predict(kernel: &PredictorKernel, history: &Sequence, k: i64) -> Prediction {
    let mut re = Compensated::default();
    let mut im = Compensated::default();
    let mut missing = 0usize;
    for &(tap_k, h) in &kernel.taps {
        let idx = k - tap_k;
        if idx < history.origin() || idx >= history.end() {
            missing += 1;
            continue;
        }
        let x = history.get(idx);
        let (p, e) = two_prod(h, x.re);
        re.add(p);
        re.add(e);
        let (p, e) = two_prod(h, x.im);
        im.add(p);
        im.add(e);
    }
    Prediction {
        estimate: Complex64::new(re.value(), im.value()),
        missing,
        touched: kernel.taps.len() - missing,
    }
}

/// `max |H|` over the grid bins.
pub fn kappa(params: &PredictorParams, grid: usize) -> f64 {
    (0..grid)
        .map(|j| eval_h(TAU * j as f64 / grid as f64, params).norm())
        .fold(0.0, f64::max)
}

/// Per-bin residual `|H(e^{i omega}) - e^{i omega n}|` in ascending
/// frequency order over `(-pi, pi]`.
pub fn error_curve(params: &PredictorParams, grid: usize) -> Vec<(f64, f64)> {
    let half = grid / 2;
    let js = (half + 1..grid).chain(0..=half);
    js.map(|j| {
        let mut w = TAU * j as f64 / grid as f64;
        if w > PI {
            w -= TAU;
        }
        let shift = Complex64::from_polar(1.0, w * params.horizon as f64);
        (w, (eval_h(w, params) - shift).norm())
    })
    .collect()
}

/// Apply the transfer function to a spectrum: `Y = H * X` bin-wise.
/// Exact-zero bins stay exactly zero even where `H` overflows, which is
/// what makes grid application usable at large `gamma` on masked spectra.
pub fn apply_transfer(params: &PredictorParams, xg: &SpectrumGrid) -> SpectrumGrid {
    let n = xg.size();
    let bins = (0..n)
        .map(|j| {
            let x = xg.bin(j);
            if x.re == 0.0 && x.im == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                eval_h(TAU * j as f64 / n as f64, params) * x
            }
        })
        .collect();
    SpectrumGrid::new(bins).expect("same grid size")
}

/// `(H - e^{i omega n}) * X` bin-wise with the same zero guard; the grid
/// error spectrum of the shift approximation.
pub fn transfer_error(params: &PredictorParams, xg: &SpectrumGrid) -> SpectrumGrid {
    let n = xg.size();
    let bins = (0..n)
        .map(|j| {
            let x = xg.bin(j);
            if x.re == 0.0 && x.im == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                let w = TAU * j as f64 / n as f64;
                let shift = Complex64::from_polar(1.0, w * params.horizon as f64);
                (eval_h(w, params) - shift) * x
            }
        })
        .collect();
    SpectrumGrid::new(bins).expect("same grid size")
}

/// Result of a gamma sweep.
#[derive(Debug, Clone, Copy)]
pub struct TuneOutcome {
    pub gamma: f64,
    /// Worst-case shift residual over the unmasked bins at that gamma.
    pub achieved: f64,
    pub met: bool,
}

/// Walk the schedule and return the smallest gamma whose shift residual,
/// maximized over the bins outside the order-`nu*m` mask of half-width
/// `delta`, is at most `target`. That residual bounds the sup prediction
/// error uniformly over unit-norm sequences vanishing on the mask. If no
/// scheduled gamma suffices, the best one is returned with `met = false`.
pub fn tune_gamma(
    delta: f64,
    nu: u32,
    m: u32,
    horizon: u32,
    target: f64,
    schedule: &[f64],
    grid: usize,
) -> Result<TuneOutcome, PredictorError> {
    let order = nu as u64 * m as u64;
    let mask = build_mask(order, delta, grid)?;
    let mut best: Option<TuneOutcome> = None;
    for &gamma in schedule {
        let params = PredictorParams::new(gamma, 0.4, horizon, nu, m)?;
        let mut worst = 0.0f64;
        for j in 0..grid {
            if mask.contains(j) {
                continue;
            }
            let w = TAU * j as f64 / grid as f64;
            let shift = Complex64::from_polar(1.0, w * horizon as f64);
            let res = (eval_h(w, &params) - shift).norm();
            worst = worst.max(res);
        }
        if !worst.is_finite() {
            continue;
        }
        if worst <= target {
            return Ok(TuneOutcome { gamma, achieved: worst, met: true });
        }
        if best.is_none_or(|b| worst < b.achieved) {
            best = Some(TuneOutcome { gamma, achieved: worst, met: false });
        }
    }
    Ok(best.unwrap_or(TuneOutcome { gamma: f64::NAN, achieved: f64::INFINITY, met: false }))
}
