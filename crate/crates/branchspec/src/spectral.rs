//! Finitely supported complex sequences, their unit-circle spectra on a
//! uniform grid, and the degeneracy-point / frequency-mask machinery.
//!
//! Grid convention: an even grid of size `N` places bin `j` at
//! `omega_j = 2*pi*j/N` reduced into `(-pi, pi]`. When `N` is divisible by
//! `2n`, every degeneracy point of order `n` lands exactly on a bin, which
//! keeps mask membership checks exact instead of interpolated.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("sequence window of length {window} does not fit a grid of size {grid}")]
    WindowTooLong { window: usize, grid: usize },
    #[error("grid size {0} must be even and positive")]
    BadGridSize(usize),
    #[error("grid size {grid} must be divisible by 2*{order} so degeneracy points land on bins")]
    GridNotAligned { grid: usize, order: u64 },
    #[error("mask half-width {delta} must lie in (0, pi/{order})")]
    BadHalfWidth { delta: f64, order: u64 },
    #[error("grid size mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("branch multiplier plan is not disjoint at delta={delta}: minimum center gap {min_gap} <= 2*delta")]
    PlanOverlap { delta: f64, min_gap: f64 },
    #[error("branch count m must be at least 1")]
    BadBranchCount,
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(w: f64) -> f64 {
    let mut v = w.rem_euclid(TAU);
    if v > PI {
        v -= TAU;
    }
    v
}

/// Circular distance between two angles, in `[0, pi]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// A finitely supported complex sequence over the integers. The element at
/// index `k` is `values[k - origin]` inside the stored window and exactly
/// zero outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    origin: i64,
    values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct SequenceJson {
    origin: i64,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Sequence {
    pub fn new(origin: i64, values: Vec<Complex64>) -> Self {
        Sequence { origin, values }
    }

    pub fn zero() -> Self {
        Sequence { origin: 0, values: Vec::new() }
    }

    /// Impulse of the given height at index `k`.
    pub fn impulse(k: i64, height: Complex64) -> Self {
        Sequence { origin: k, values: vec![height] }
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    /// First index past the stored window.
    pub fn end(&self) -> i64 {
        self.origin + self.values.len() as i64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, k: i64) -> Complex64 {
        if k < self.origin || k >= self.end() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[(k - self.origin) as usize]
        }
    }

    pub fn iter_indexed(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let o = self.origin;
        self.values.iter().enumerate().map(move |(i, &v)| (o + i as i64, v))
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn scale(&self, c: Complex64) -> Sequence {
        Sequence {
            origin: self.origin,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self - other`, stored over the union of the two windows.
    pub fn sub(&self, other: &Sequence) -> Sequence {
        if self.is_empty() && other.is_empty() {
            return Sequence::zero();
        }
        let lo = self.origin.min(other.origin);
        let hi = self.end().max(other.end());
        let values = (lo..hi).map(|k| self.get(k) - other.get(k)).collect();
        Sequence { origin: lo, values }
    }

    pub fn add(&self, other: &Sequence) -> Sequence {
        if self.is_empty() && other.is_empty() {
            return Sequence::zero();
        }
        let lo = self.origin.min(other.origin);
        let hi = self.end().max(other.end());
        let values = (lo..hi).map(|k| self.get(k) + other.get(k)).collect();
        Sequence { origin: lo, values }
    }

    /// Time reversal `k -> -k`.
    pub fn reversed(&self) -> Sequence {
        if self.is_empty() {
            return Sequence::zero();
        }
        let mut values = self.values.clone();
        values.reverse();
        Sequence { origin: -(self.end() - 1), values }
    }

    /// Same values shifted by `d`: the element formerly at `k` is at `k + d`.
    pub fn shifted(&self, d: i64) -> Sequence {
        Sequence { origin: self.origin + d, values: self.values.clone() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = SequenceJson {
            origin: self.origin,
            re: self.values.iter().map(|v| v.re).collect(),
            im: self.values.iter().map(|v| v.im).collect(),
        };
        serde_json::to_value(j).expect("sequence serialization")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let j: SequenceJson = serde_json::from_value(v.clone())?;
        let values = j
            .re
            .iter()
            .zip(j.im.iter())
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        Ok(Sequence { origin: j.origin, values })
    }
}

/// Spectrum samples on `N` uniform unit-circle points.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    bins: Vec<Complex64>,
}

impl SpectrumGrid {
    pub fn new(bins: Vec<Complex64>) -> Result<Self, SpectralError> {
        if bins.is_empty() || !bins.len().is_multiple_of(2) {
            return Err(SpectralError::BadGridSize(bins.len()));
        }
        Ok(SpectrumGrid { bins })
    }

    pub fn size(&self) -> usize {
        self.bins.len()
    }

    /// Frequency of bin `j`, reduced into `(-pi, pi]`.
    pub fn omega(&self, j: usize) -> f64 {
        let n = self.bins.len() as f64;
        let w = TAU * j as f64 / n;
        if w > PI {
            w - TAU
        } else {
            w
        }
    }

    pub fn bin(&self, j: usize) -> Complex64 {
        self.bins[j]
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    /// `(1/N) * sum |bin|^2`; equals the squared l2 norm of the sequence.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|b| b.norm_sqr()).sum::<f64>() / self.bins.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.bins.iter().map(|b| b.norm()).fold(0.0, f64::max)
    }

    /// Bin indices in ascending frequency order over `(-pi, pi]`.
    pub fn ascending_bins(&self) -> impl Iterator<Item = usize> {
        let n = self.bins.len();
        (n / 2 + 1..n).chain(0..=n / 2)
    }
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// Sample the Z-transform of `x` on an `n`-point unit-circle grid:
/// bin `j` holds `sum_k x(k) e^{-i omega_j k}` with the true integer index.
pub fn analyze(x: &Sequence, n: usize) -> Result<SpectrumGrid, SpectralError> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(SpectralError::BadGridSize(n));
    }
    if x.len() > n {
        return Err(SpectralError::WindowTooLong { window: x.len(), grid: n });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in x.iter_indexed() {
        let j = k.rem_euclid(n as i64) as usize;
        buf[j] += v;
    }
    fft_in_place(&mut buf, false);
    SpectrumGrid::new(buf)
}

/// Inverse grid transform evaluated on the caller's window. The result is
/// `N`-periodic; the window resolves the ambiguity.
pub fn synthesize(xg: &SpectrumGrid, start: i64, len: usize) -> Result<Sequence, SpectralError> {
    let n = xg.size();
    if len > n {
        return Err(SpectralError::WindowTooLong { window: len, grid: n });
    }
    let mut buf = xg.bins().to_vec();
    fft_in_place(&mut buf, true);
    let scale = 1.0 / n as f64;
    let values = (0..len)
        .map(|i| buf[(start + i as i64).rem_euclid(n as i64) as usize] * scale)
        .collect();
    Ok(Sequence::new(start, values))
}

/// The `n` degeneracy points `(2*pi*k - pi)/n`, k = 0..n-1, reduced into
/// `[-pi, pi)` and sorted ascending. These are the odd multiples of `pi/n`.
pub fn degeneracy_points(n: u64) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..n)
        .map(|k| {
            let raw = (TAU * k as f64 - PI) / n as f64;
            let mut v = raw.rem_euclid(TAU);
            if v >= PI {
                v -= TAU;
            }
            v
        })
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts
}

/// Mode for [`apply_mask`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    ZeroInside,
    ZeroOutside,
}

/// Grid bins within circular distance `half_width` of a degeneracy point of
/// the given order.
#[derive(Debug, Clone)]
pub struct FrequencyMask {
    order: u64,
    half_width: f64,
    grid: usize,
    flags: Vec<bool>,
    count: usize,
}

impl FrequencyMask {
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn contains(&self, j: usize) -> bool {
        self.flags[j]
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter().enumerate().filter(|(_, &f)| f).map(|(j, _)| j)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Total circular measure of the masked bins.
    pub fn measure(&self) -> f64 {
        self.count as f64 * TAU / self.grid as f64
    }

    pub fn overlaps(&self, other: &FrequencyMask) -> bool {
        self.flags.iter().zip(other.flags.iter()).any(|(&a, &b)| a && b)
    }
}

/// Build the mask for order `n` and half-width `delta` on an `N`-point grid.
/// Requires `0 < delta < pi/n` (intervals must not merge) and `2n | N`.
pub fn build_mask(n: u64, delta: f64, grid: usize) -> Result<FrequencyMask, SpectralError> {
    if grid == 0 || !grid.is_multiple_of(2) {
        return Err(SpectralError::BadGridSize(grid));
    }
    if !(grid as u64).is_multiple_of(2 * n) {
        return Err(SpectralError::GridNotAligned { grid, order: n });
    }
    if !(delta > 0.0 && delta < PI / n as f64) {
        return Err(SpectralError::BadHalfWidth { delta, order: n });
    }
    let pts = degeneracy_points(n);
    let mut flags = vec![false; grid];
    let mut count = 0;
    for (j, flag) in flags.iter_mut().enumerate() {
        let w = TAU * j as f64 / grid as f64;
        let d = pts
            .iter()
            .map(|&s| circular_distance(w, s))
            .fold(f64::INFINITY, f64::min);
        // tolerate one ulp of angle rounding at the boundary
        if d <= delta * (1.0 + 1e-12) + 1e-15 {
            *flag = true;
            count += 1;
        }
    }
    Ok(FrequencyMask { order: n, half_width: delta, grid, flags, count })
}

/// Zero the bins inside (or outside) the mask; other bins are unchanged.
pub fn apply_mask(
    xg: &SpectrumGrid,
    mask: &FrequencyMask,
    mode: MaskMode,
) -> Result<SpectrumGrid, SpectralError> {
    if xg.size() != mask.grid {
        return Err(SpectralError::GridMismatch(xg.size(), mask.grid));
    }
    let zero = Complex64::new(0.0, 0.0);
    let bins = xg
        .bins()
        .iter()
        .enumerate()
        .map(|(j, &b)| match mode {
            MaskMode::ZeroInside => {
                if mask.contains(j) {
                    zero
                } else {
                    b
                }
            }
            MaskMode::ZeroOutside => {
                if mask.contains(j) {
                    b
                } else {
                    zero
                }
            }
        })
        .collect();
    SpectrumGrid::new(bins)
}

/// Result of a spectral-vanishing membership check.
#[derive(Debug, Clone, Copy)]
pub struct MembershipCheck {
    /// True when the masked-bin residual is within `tol * (1 + max |X|)`.
    pub in_class: bool,
    /// Max `|X|` over masked bins.
    pub residual: f64,
    /// Max `|X|` over all bins.
    pub max_overall: f64,
}

/// Check whether the spectrum of `x` vanishes on the order-`n` mask of
/// half-width `delta`, up to a relative tolerance.
pub fn membership(
    x: &Sequence,
    delta: f64,
    order: u64,
    grid: usize,
    tol: f64,
) -> Result<MembershipCheck, SpectralError> {
    let xg = analyze(x, grid)?;
    let mask = build_mask(order, delta, grid)?;
    let residual = mask
        .indices()
        .map(|j| xg.bin(j).norm())
        .fold(0.0, f64::max);
    let max_overall = xg.max_abs();
    Ok(MembershipCheck {
        in_class: residual <= tol * (1.0 + max_overall),
        residual,
        max_overall,
    })
}

/// Per-branch mask multipliers: `mu(m, d) = m * zeta(d)` for
/// `d in [-m+1, m-1]`, chosen so the per-branch masks stay disjoint.
#[derive(Debug, Clone)]
pub struct DegeneracyPlan {
    m: u32,
    delta: f64,
    zeta: Vec<u64>, // indexed by d + m - 1
}

impl DegeneracyPlan {
    /// The doubling choice: `zeta(d) = 2^d` for `d >= 0` and
    /// `zeta(d) = 2^(2m+d-1)` for `d < 0`.
    pub fn example_zeta(m: u32, d: i32) -> u64 {
        if d >= 0 {
            1u64 << d
        } else {
            1u64 << (2 * m as i32 + d - 1)
        }
    }

    pub fn default_plan(m: u32, delta: f64) -> Result<Self, SpectralError> {
        Self::with_zeta(m, delta, |d| Self::example_zeta(m, d))
    }

    pub fn with_zeta(
        m: u32,
        delta: f64,
        zeta: impl Fn(i32) -> u64,
    ) -> Result<Self, SpectralError> {
        if m < 1 {
            return Err(SpectralError::BadBranchCount);
        }
        let zeta: Vec<u64> = Self::branch_range_of(m).map(zeta).collect();
        if m > 1 {
            let min_gap = Self::min_center_gap(m, |d| zeta[(d + m as i32 - 1) as usize]);
            if 2.0 * delta >= min_gap {
                return Err(SpectralError::PlanOverlap { delta, min_gap });
            }
        }
        Ok(DegeneracyPlan { m, delta, zeta })
    }

    fn branch_range_of(m: u32) -> impl Iterator<Item = i32> {
        -(m as i32 - 1)..=(m as i32 - 1)
    }

    pub fn branch_range(&self) -> impl Iterator<Item = i32> {
        Self::branch_range_of(self.m)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn zeta(&self, d: i32) -> u64 {
        self.zeta[(d + self.m as i32 - 1) as usize]
    }

    pub fn mu(&self, d: i32) -> u64 {
        self.m as u64 * self.zeta(d)
    }

    pub fn max_mu(&self) -> u64 {
        Self::branch_range_of(self.m).map(|d| self.mu(d)).max().unwrap()
    }

    /// Minimum circular gap between degeneracy points of distinct branch
    /// orders.
    pub fn min_center_gap(m: u32, zeta: impl Fn(i32) -> u64) -> f64 {
        let orders: Vec<u64> = Self::branch_range_of(m).map(|d| m as u64 * zeta(d)).collect();
        let pts: Vec<Vec<f64>> = orders.iter().map(|&n| degeneracy_points(n)).collect();
        let mut gap = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                for &a in &pts[i] {
                    for &b in &pts[j] {
                        gap = gap.min(circular_distance(a, b));
                    }
                }
            }
        }
        gap
    }

    /// Largest half-width whose per-branch masks are disjoint as bin sets on
    /// an `N`-point grid, for the doubling multiplier choice. For `m = 1`
    /// there is a single mask and the answer is `pi`.
    pub fn max_disjoint_delta(m: u32, grid: usize) -> f64 {
        if m <= 1 {
            return PI;
        }
        let gap = Self::min_center_gap(m, |d| Self::example_zeta(m, d));
        gap / 2.0 - PI / grid as f64
    }

    /// Grids must be divisible by `2 * max mu` so every center is a bin.
    pub fn required_grid_divisor(&self) -> u64 {
        2 * self.max_mu()
    }

    pub fn validate_grid(&self, grid: usize) -> Result<(), SpectralError> {
        if grid == 0 || !grid.is_multiple_of(2) {
            return Err(SpectralError::BadGridSize(grid));
        }
        if !(grid as u64).is_multiple_of(self.required_grid_divisor()) {
            return Err(SpectralError::GridNotAligned {
                grid,
                order: self.max_mu(),
            });
        }
        Ok(())
    }

    /// Default grid for a plan: 4096 for small plans, otherwise the smallest
    /// multiple of the required divisor at least 4096.
    pub fn default_grid(&self) -> usize {
        let div = self.required_grid_divisor() as usize;
        if 4096 % div == 0 {
            4096
        } else {
            4096usize.div_ceil(div) * div
        }
    }

    /// Masks for every branch; errors if any pair of masks shares a bin.
    pub fn masks(&self, grid: usize) -> Result<Vec<(i32, FrequencyMask)>, SpectralError> {
        self.validate_grid(grid)?;
        let masks: Vec<(i32, FrequencyMask)> = self
            .branch_range()
            .map(|d| build_mask(self.mu(d), self.delta, grid).map(|mk| (d, mk)))
            .collect::<Result<_, _>>()?;
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                if masks[i].1.overlaps(&masks[j].1) {
                    let min_gap = Self::min_center_gap(self.m, |d| self.zeta(d));
                    return Err(SpectralError::PlanOverlap { delta: self.delta, min_gap });
                }
            }
        }
        Ok(masks)
    }
}
