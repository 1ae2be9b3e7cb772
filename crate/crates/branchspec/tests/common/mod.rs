//! Shared test signals for the integration suites.
#![allow(dead_code)]

use branchspec::spectral::{build_mask, synthesize, Sequence, SpectrumGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Seeded uniform complex sequence.
pub fn random_sequence(seed: u64, origin: i64, len: usize) -> Sequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Sequence::new(
        origin,
        (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    )
}

/// Smooth complex bump supported on `[8, 120]`: narrow spectrum, entirely to
/// the right of the origin so the lift is a pure delay family.
pub fn smooth_bump() -> Sequence {
    let (center, width, half) = (64.0, 20.0, 56i64);
    let values = (-half..=half)
        .map(|i| {
            let t = i as f64 / width;
            let t2 = (i as f64 + 2.0) / (0.9 * width);
            Complex64::new((-t * t).exp(), 0.4 * (-t2 * t2).exp())
        })
        .collect();
    Sequence::new(center as i64 - half, values)
}

/// Unit-norm sequence whose spectrum vanishes exactly on the order-2 mask of
/// half-width 0.2 and outside `|omega| <= 0.8`. Returned with its exact
/// masked spectrum.
pub fn masked_band_signal(grid: usize, seed: u64) -> (Sequence, SpectrumGrid) {
    let tau = 2.0 * PI;
    let mask = build_mask(2, 0.2, grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins: Vec<Complex64> = (0..grid)
        .map(|j| {
            let mut w = tau * j as f64 / grid as f64;
            if w > PI {
                w -= tau;
            }
            if w.abs() > 0.8 {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::from_polar((-(w / 0.25) * (w / 0.25)).exp(), rng.gen_range(0.0..0.3))
        })
        .collect();
    for (j, b) in bins.iter_mut().enumerate() {
        if mask.contains(j) {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    let raw = SpectrumGrid::new(bins.clone()).unwrap();
    let norm = synthesize(&raw, -(grid as i64) / 2, grid).unwrap().l2_norm();
    for b in bins.iter_mut() {
        *b /= norm;
    }
    let xg = SpectrumGrid::new(bins).unwrap();
    let x = synthesize(&xg, -(grid as i64) / 2, grid).unwrap();
    (x, xg)
}

/// Gaussian spectrum `exp(-(w/width)^2)` time-shifted by `shift`, sampled on
/// a uniform grid over `[-span, span]`.
pub fn gaussian_spectrum(
    width: f64,
    shift: f64,
    span: f64,
    points: usize,
) -> (Vec<f64>, Vec<Complex64>) {
    let omegas: Vec<f64> = (0..points)
        .map(|i| -span + 2.0 * span * i as f64 / (points - 1) as f64)
        .collect();
    let values = omegas
        .iter()
        .map(|&w| Complex64::from_polar((-(w / width) * (w / width)).exp(), -w * shift))
        .collect();
    (omegas, values)
}
