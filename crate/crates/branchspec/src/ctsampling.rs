//! Continuous-time bridge: band-limited interpolation of sequences through
//! the cardinal series, frequency truncation of general spectra, and the
//! end-to-end sparse-sampling demo.

use crate::branching::{approximate, BranchingError};
use crate::recovery::{decimate, recover_range, RecoverConfig, RecoveryError};
use crate::spectral::{analyze, Sequence, SpectralError};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CtError {
    #[error("sampling step tau must be positive, got {0}")]
    BadTau(f64),
    #[error("frequency grid [{lo}, {hi}] does not cover [-{omega}, {omega}]")]
    GridNotCovering { lo: f64, hi: f64, omega: f64 },
    #[error("frequency grid needs at least two points")]
    GridTooSmall,
    #[error("no admissible (Omega, m) pair with m <= {cap} meets the tail target {target}")]
    NoAdmissiblePair { cap: u32, target: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Branching(#[from] BranchingError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

/// `sin(u)/u` with a series fallback below `|u| < 1e-4` to dodge
/// cancellation.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

/// A band-limited function represented by its critical-rate samples
/// `f(tau k) = coeffs(k)`; evaluation goes through the truncated cardinal
/// series.
#[derive(Debug, Clone)]
pub struct SampledBandlimited {
    pub tau: f64,
    pub coeffs: Sequence,
}

pub fn lift_to_ct(coeffs: Sequence, tau: f64) -> Result<SampledBandlimited, CtError> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(CtError::BadTau(tau));
    }
    Ok(SampledBandlimited { tau, coeffs })
}

/// Truncated cardinal series: sum over the `2K+1` samples nearest `t` of
/// `x(k) sinc(pi (t - tau k) / tau)`.
pub fn evaluate(f: &SampledBandlimited, t: f64, k_trunc: usize) -> Complex64 {
    let center = (t / f.tau).round() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in center - k_trunc as i64..=center + k_trunc as i64 {
        let c = f.coeffs.get(k);
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        acc += c * sinc(PI * (t - f.tau * k as f64) / f.tau);
    }
    acc
}

/// Spectrum samples `F(i omega) = tau X(e^{i tau omega})` on a uniform grid
/// over `[-pi/tau, pi/tau]`.
#[derive(Debug, Clone)]
pub struct SpectrumCt {
    pub omegas: Vec<f64>,
    pub values: Vec<Complex64>,
}

pub fn spectrum_ct(f: &SampledBandlimited, grid: usize) -> Result<SpectrumCt, CtError> {
    let xg = analyze(&f.coeffs, grid)?;
    let mut rows: Vec<(f64, Complex64)> = xg
        .ascending_bins()
        .map(|j| (xg.omega(j) / f.tau, xg.bin(j) * f.tau))
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(SpectrumCt {
        omegas: rows.iter().map(|r| r.0).collect(),
        values: rows.iter().map(|r| r.1).collect(),
    })
}

/// Frequency-truncate a general spectrum to `[-Omega, Omega]` and sample
/// the result at the critical step `tau = pi / Omega`:
/// `f_Omega(tau k) = (1/2pi) integral F(i w) e^{i w tau k} dw` by composite
/// trapezoid over the supplied uniform grid.
pub fn bandlimit(
    omegas: &[f64],
    values: &[Complex64],
    omega_max: f64,
    k_lo: i64,
    k_hi: i64,
) -> Result<SampledBandlimited, CtError> {
    if omegas.len() < 2 || omegas.len() != values.len() {
        return Err(CtError::GridTooSmall);
    }
    let lo = omegas[0];
    let hi = *omegas.last().unwrap();
    if lo > -omega_max || hi < omega_max {
        return Err(CtError::GridNotCovering { lo, hi, omega: omega_max });
    }
    let tau = PI / omega_max;
    let coeffs: Vec<Complex64> = (k_lo..=k_hi)
        .map(|k| {
            let t = tau * k as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..omegas.len() - 1 {
                let (w0, w1) = (omegas[i], omegas[i + 1]);
                if w1 < -omega_max || w0 > omega_max {
                    continue;
                }
                // clip the panel to the band
                let a = w0.max(-omega_max);
                let b = w1.min(omega_max);
                if b <= a {
                    continue;
                }
                let fa = values[i]
                    + (values[i + 1] - values[i]) * ((a - w0) / (w1 - w0));
                let fb = values[i]
                    + (values[i + 1] - values[i]) * ((b - w0) / (w1 - w0));
                let ga = fa * Complex64::from_polar(1.0, a * t);
                let gb = fb * Complex64::from_polar(1.0, b * t);
                acc += (ga + gb) * (0.5 * (b - a));
            }
            acc / (2.0 * PI)
        })
        .collect();
    lift_to_ct(Sequence::new(k_lo, coeffs), tau)
}

/// Continuous-time gap report between a sequence and its degenerate
/// approximation, with the L2 identity computed along two routes.
#[derive(Debug, Clone, Copy)]
pub struct CtErrorReport {
    pub l2_seq: f64,
    /// `sqrt(tau) * ||x~ - x||`.
    pub l2_ct_parseval: f64,
    /// Quadrature of `|F~ - F|^2` over the band on a refined grid.
    pub l2_ct_quadrature: f64,
    pub linf_ct: f64,
    /// `2 pi max(1, sqrt(2 Omega)) sqrt(tau) (2m - 1)`; multiplies the
    /// per-branch epsilon in the closeness bound.
    pub paper_c: f64,
    pub window_t: f64,
    pub quad_points: usize,
}

/// Dense-evaluation and quadrature report for `x` vs `x~` at step `tau`.
pub fn error_report(
    x: &Sequence,
    xt: &Sequence,
    tau: f64,
    m: u32,
    omega: f64,
    grid: usize,
) -> Result<CtErrorReport, CtError> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(CtError::BadTau(tau));
    }
    let diff = xt.sub(x);
    let l2_seq = diff.l2_norm();
    let l2_ct_parseval = tau.sqrt() * l2_seq;

    // independent route: midpoint quadrature of |tau * D(e^{i tau w})|^2 on
    // a grid fine enough to integrate the trig polynomial exactly
    let fine = (4 * grid).max(8 * diff.len().next_power_of_two());
    let dg = analyze(&diff, fine)?;
    let sum_sq: f64 = dg.bins().iter().map(|b| b.norm_sqr()).sum();
    // (1/2pi) * sum tau^2 |D_j|^2 * (2pi / (tau N)) = tau/N * sum |D_j|^2
    let l2_ct_quadrature = (tau / fine as f64 * sum_sq).sqrt();

    // dense sup gap via the cardinal series
    let f = SampledBandlimited { tau, coeffs: diff.clone() };
    let lo = diff.origin() as f64 * tau;
    let hi = diff.end() as f64 * tau;
    let window_t = (hi - lo).max(tau) + 8.0 * tau;
    let samples_per_step = 8usize;
    let quad_points = ((window_t / tau) as usize) * samples_per_step;
    let mut linf_ct = 0.0f64;
    let trunc = diff.len() + 16;
    for i in 0..=quad_points {
        let t = (lo - 4.0 * tau) + window_t * i as f64 / quad_points as f64;
        linf_ct = linf_ct.max(evaluate(&f, t, trunc).norm());
    }

    let paper_c =
        2.0 * PI * 1.0f64.max((2.0 * omega).sqrt()) * tau.sqrt() * (2.0 * m as f64 - 1.0);
    Ok(CtErrorReport {
        l2_seq,
        l2_ct_parseval,
        l2_ct_quadrature,
        linf_ct,
        paper_c,
        window_t,
        quad_points,
    })
}

/// Full sparse-sampling demo report.
#[derive(Debug, Clone)]
pub struct CtDemoReport {
    pub m: u32,
    pub omega: f64,
    pub tau: f64,
    pub delta_spacing: f64,
    pub achieved_delta: f64,
    pub tail_bound: f64,
    /// Sup gap between the band-limited truncation and the degenerate
    /// interpolant, on a dense time grid.
    pub approx_gap: f64,
    /// Max recovery error of the degenerate samples from the sparse subset.
    pub recovery_error: f64,
    /// Sup gap between the original function samples and the recovered
    /// interpolant.
    pub end_to_end_gap: f64,
    pub eval_points: usize,
}

/// Pick the smallest `m <= m_cap` with `Omega = m pi / Delta` covered by the
/// spectrum grid and tail mass at most `eps/2`; truncate, approximate the
/// sample sequence by a degenerate one (budget `eps/2`), and check that the
/// sparse subsample `{f~(k Delta)}` recovers it.
#[allow(clippy::too_many_arguments)]
pub fn sparse_ct_demo(
    omegas: &[f64],
    f_spectrum: &[Complex64],
    delta_spacing: f64,
    eps: f64,
    m_cap: u32,
    grid: usize,
    k_half: i64,
    recover_targets: i64,
    eval_per_sample: usize,
) -> Result<CtDemoReport, CtError> {
    if omegas.len() < 2 || omegas.len() != f_spectrum.len() {
        return Err(CtError::GridTooSmall);
    }
    // tail mass (1/2pi) * integral_{|w| > Omega} |F| for each candidate m
    let tail = |omega_max: f64| -> f64 {
        let mut acc = 0.0;
        for i in 0..omegas.len() - 1 {
            let (w0, w1) = (omegas[i], omegas[i + 1]);
            let mid = 0.5 * (w0 + w1);
            if mid.abs() > omega_max {
                acc += 0.5 * (f_spectrum[i].norm() + f_spectrum[i + 1].norm()) * (w1 - w0);
            }
        }
        acc / (2.0 * PI)
    };
    let mut chosen = None;
    for m in 1..=m_cap {
        let omega_max = m as f64 * PI / delta_spacing;
        if *omegas.last().unwrap() >= omega_max
            && omegas[0] <= -omega_max
            && tail(omega_max) <= eps / 2.0
        {
            chosen = Some((m, omega_max));
            break;
        }
    }
    let (m, omega_max) =
        chosen.ok_or(CtError::NoAdmissiblePair { cap: m_cap, target: eps / 2.0 })?;
    let tau = PI / omega_max;

    // sample the truncation on a window shifted right so the lift stays a
    // pure delay family
    let f_omega = bandlimit(omegas, f_spectrum, omega_max, 0, 2 * k_half)?;
    let x = f_omega.coeffs.clone();
    let (rep, achieved_delta) = approximate(&x, m, eps / 2.0, grid)?;
    let xt = rep.sequence.clone();

    let eval_points = eval_per_sample * (2 * k_half) as usize;
    let approx_gap = {
        let f_diff = SampledBandlimited { tau, coeffs: xt.sub(&x) };
        let mut sup = 0.0f64;
        for i in 0..=eval_points {
            let t = tau * (2 * k_half) as f64 * i as f64 / eval_points as f64;
            sup = sup.max(evaluate(&f_diff, t, xt.len() + 16).norm());
        }
        sup
    };

    // sparse recovery from {x~(m k)} alone
    let obs_half = (k_half / m as i64).max(recover_targets + 8);
    let obs = decimate(&xt, m, -obs_half, obs_half);
    let base = RecoverConfig::new(m, 4.0);
    let schedule = [1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0];
    let (gamma, _) = crate::recovery::tune_gamma_holdout(&obs, &base, &schedule, 8)?;
    let mut cfg = base;
    cfg.gamma = gamma;
    let report = recover_range(&obs, recover_targets, &cfg)?;
    let recovery_error = report.max_error_vs(&xt);

    // end-to-end: original samples vs recovered interpolant values
    let mut end_to_end_gap: f64 = approx_gap + recovery_error;
    for rec in &report.records {
        let gap = (rec.estimate - x.get(rec.n)).norm();
        end_to_end_gap = end_to_end_gap.max(gap);
    }

    Ok(CtDemoReport {
        m,
        omega: omega_max,
        tau,
        delta_spacing,
        achieved_delta,
        tail_bound: tail(omega_max),
        approx_gap,
        recovery_error,
        end_to_end_gap,
        eval_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Sequence;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sinc_small_argument_series() {
        assert_eq!(sinc(0.0), 1.0);
        let u = 5e-5f64;
        let exact = u.sin() / u;
        assert!((sinc(u) - exact).abs() < 1e-15);
        assert!((sinc(PI / 2.0) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn evaluate_interpolates_grid_points() {
        let x = Sequence::new(-5, (0..11).map(|i| c(i as f64 * 0.1 - 0.3, 0.05 * i as f64)).collect());
        let f = lift_to_ct(x.clone(), 0.7).unwrap();
        for k in -5..6i64 {
            let v = evaluate(&f, 0.7 * k as f64, 64);
            assert!((v - x.get(k)).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn evaluate_impulse_cardinal_values() {
        let f = lift_to_ct(Sequence::impulse(0, c(1.0, 0.0)), 1.0).unwrap();
        assert!((evaluate(&f, 0.0, 8) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((evaluate(&f, 0.5, 8).re - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn evaluate_truncation_converges() {
        let x = Sequence::new(-8, (0..17).map(|i| c((i as f64 * 0.37).sin(), 0.0)).collect());
        let f = lift_to_ct(x, 1.0).unwrap();
        let t = 0.31;
        let a = evaluate(&f, t, 20);
        let b = evaluate(&f, t, 40);
        assert!((a - b).norm() < 1e-6);
    }

    #[test]
    fn spectrum_relation_holds_on_grid() {
        let x = Sequence::new(-4, (0..9).map(|i| c(0.2 * i as f64, -0.1)).collect());
        let tau = 0.5;
        let f = lift_to_ct(x.clone(), tau).unwrap();
        let sp = spectrum_ct(&f, 64).unwrap();
        let xg = analyze(&x, 64).unwrap();
        // F(i w) = tau X(e^{i tau w}) at every grid point
        for (i, &w) in sp.omegas.iter().enumerate() {
            let inner = w * tau;
            let j = xg
                .ascending_bins()
                .find(|&j| (xg.omega(j) - inner).abs() < 1e-12)
                .unwrap();
            let expect = xg.bin(j) * tau;
            assert!((sp.values[i] - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
        }
    }

    fn gaussian_spectrum(width: f64, omega_span: f64, points: usize) -> (Vec<f64>, Vec<Complex64>) {
        let omegas: Vec<f64> = (0..points)
            .map(|i| -omega_span + 2.0 * omega_span * i as f64 / (points - 1) as f64)
            .collect();
        let values = omegas
            .iter()
            .map(|&w| c((-(w / width) * (w / width)).exp(), 0.0))
            .collect();
        (omegas, values)
    }

    #[test]
    fn bandlimit_fixed_point_for_bandlimited_input() {
        // spectrum already inside the band: truncation changes nothing
        let (om, fv) = gaussian_spectrum(0.4, 8.0, 4001);
        let a = bandlimit(&om, &fv, 4.0, -40, 40).unwrap();
        let b = bandlimit(&om, &fv, 8.0, -20, 20).unwrap();
        // compare on the common physical times t = k_a * (pi/4) = 2 k_b * (pi/8)
        for kb in -20..=20i64 {
            let t_b = b.tau * kb as f64;
            let va = evaluate(&a, t_b, 60);
            let vb = b.coeffs.get(kb);
            assert!((va - vb).norm() < 1e-6, "kb={kb}: {va} vs {vb}");
        }
    }

    #[test]
    fn bandlimit_zero_spectrum_is_zero() {
        let om: Vec<f64> = (0..101).map(|i| -5.0 + 0.1 * i as f64).collect();
        let fv = vec![c(0.0, 0.0); 101];
        let out = bandlimit(&om, &fv, 4.0, -10, 10).unwrap();
        assert!(out.coeffs.l2_norm() < 1e-15);
    }

    #[test]
    fn bandlimit_requires_covering_grid() {
        let (om, fv) = gaussian_spectrum(0.4, 2.0, 101);
        assert!(matches!(
            bandlimit(&om, &fv, 4.0, -5, 5),
            Err(CtError::GridNotCovering { .. })
        ));
    }

    #[test]
    fn bandlimit_gap_shrinks_as_band_doubles() {
        // sup |f - f_Omega| <= (1/2pi) * tail integral of |F|; both shrink
        let (om, fv) = gaussian_spectrum(1.2, 16.0, 8001);
        let tail = |omega_max: f64| {
            let mut acc = 0.0;
            for i in 0..om.len() - 1 {
                let mid = 0.5 * (om[i] + om[i + 1]);
                if mid.abs() > omega_max {
                    acc += 0.5 * (fv[i].norm() + fv[i + 1].norm()) * (om[i + 1] - om[i]);
                }
            }
            acc / (2.0 * PI)
        };
        // f(t) closed form for F = exp(-(w/width)^2): width/(2 sqrt(pi)) e^{-t^2 width^2 / 4}
        let width = 1.2f64;
        let f_true = |t: f64| width / (2.0 * PI.sqrt()) * (-(t * width / 2.0) * (t * width / 2.0)).exp();
        let mut prev_gap = f64::INFINITY;
        for omega_max in [2.0, 4.0, 8.0] {
            let bl = bandlimit(&om, &fv, omega_max, -60, 60).unwrap();
            let mut sup = 0.0f64;
            for i in 0..=600 {
                let t = -6.0 + 12.0 * i as f64 / 600.0;
                sup = sup.max((evaluate(&bl, t, 80).re - f_true(t)).abs());
            }
            assert!(sup <= tail(omega_max) + 1e-6, "Omega={omega_max}: {sup} vs {}", tail(omega_max));
            assert!(sup <= prev_gap + 1e-12);
            prev_gap = sup;
        }
    }

    #[test]
    fn error_report_zero_gap_and_parseval_agreement() {
        let x = Sequence::new(0, (0..40).map(|i| c((-((i as f64 - 20.0) / 6.0).powi(2)).exp(), 0.0)).collect());
        let same = error_report(&x, &x, 1.0, 2, PI, 4096).unwrap();
        assert_eq!(same.l2_seq, 0.0);
        assert_eq!(same.l2_ct_parseval, 0.0);
        assert!(same.linf_ct < 1e-15);

        let mut shifted = x.values().to_vec();
        shifted[7] += c(1e-3, -2e-3);
        shifted[19] += c(-4e-3, 0.0);
        let y = Sequence::new(0, shifted);
        let rep = error_report(&x, &y, 0.8, 2, PI / 0.8, 4096).unwrap();
        assert!(
            (rep.l2_ct_parseval - rep.l2_ct_quadrature).abs() <= 1e-9 * rep.l2_ct_parseval,
            "{} vs {}",
            rep.l2_ct_parseval,
            rep.l2_ct_quadrature
        );
        assert!(rep.linf_ct > 0.0);
    }

    /// Narrow main lobe plus faint side lobes near |w| = 2.16, supported on
    /// [-pi, pi] exactly. The side lobes carry enough outer-band mass that a
    /// half-band truncation is rejected at small eps, forcing the two-fold
    /// decimation branch of the demo.
    fn two_lobe_spectrum(points: usize) -> (Vec<f64>, Vec<Complex64>) {
        let omegas: Vec<f64> = (0..points)
            .map(|i| -PI + 2.0 * PI * i as f64 / (points - 1) as f64)
            .collect();
        let values = omegas
            .iter()
            .map(|&w| {
                let main = (-(w / 0.18) * (w / 0.18)).exp();
                let lobe = 0.004
                    * ((-(w.abs() - 2.16) / 0.1) * ((w.abs() - 2.16) / 0.1)).exp();
                Complex64::from_polar(main + lobe, -w * 48.0)
            })
            .collect();
        (omegas, values)
    }

    #[test]
    fn sparse_demo_m1_reduces_to_critical_sampling() {
        // narrow band-limited input, spacing at its critical step: the first
        // candidate band already holds everything and all targets are reads
        let points = 4001;
        let omegas: Vec<f64> = (0..points)
            .map(|i| -PI + 2.0 * PI * i as f64 / (points - 1) as f64)
            .collect();
        let values: Vec<Complex64> = omegas
            .iter()
            .map(|&w| Complex64::from_polar((-(w / 0.18) * (w / 0.18)).exp(), -w * 48.0))
            .collect();
        let rep = sparse_ct_demo(&omegas, &values, 1.0, 1e-3, 4, 4096, 96, 4, 8).unwrap();
        assert_eq!(rep.m, 1);
        assert_eq!(rep.recovery_error, 0.0);
        assert!(rep.end_to_end_gap <= 1e-3 + rep.recovery_error, "{}", rep.end_to_end_gap);
    }

    #[test]
    fn sparse_demo_m2_end_to_end() {
        let (omegas, values) = two_lobe_spectrum(4001);
        let eps = 2e-4;
        let rep = sparse_ct_demo(&omegas, &values, 2.0, eps, 4, 4096, 96, 4, 8).unwrap();
        assert_eq!(rep.m, 2, "the half-band tail {} should reject m=1", rep.tail_bound);
        assert!(
            rep.end_to_end_gap <= eps + rep.recovery_error,
            "end-to-end {} vs eps {} + recovery {}",
            rep.end_to_end_gap,
            eps,
            rep.recovery_error
        );
    }

    #[test]
    fn sparse_demo_stable_under_denser_evaluation() {
        let (omegas, values) = two_lobe_spectrum(4001);
        let a = sparse_ct_demo(&omegas, &values, 2.0, 2e-4, 4, 4096, 96, 4, 8).unwrap();
        let b = sparse_ct_demo(&omegas, &values, 2.0, 2e-4, 4, 4096, 96, 4, 16).unwrap();
        assert!((a.approx_gap - b.approx_gap).abs() <= 0.1 * a.approx_gap.max(1e-300));
        assert!((a.end_to_end_gap - b.end_to_end_gap).abs() <= 0.1 * a.end_to_end_gap);
    }

    #[test]
    fn band_energy_outside_band_is_negligible() {
        // evaluate-sample a band-limited interpolant at twice the rate; the
        // upper half-band of the refined spectrum must be empty
        let x = Sequence::new(0, (0..32).map(|i| c((-((i as f64 - 16.0) / 5.0).powi(2)).exp(), 0.0)).collect());
        let f = lift_to_ct(x, 1.0).unwrap();
        // truncation must cover the whole window; cutting sinc tails
        // mid-window manufactures out-of-band leakage
        let half_step: Vec<Complex64> = (-256..256)
            .map(|i| evaluate(&f, i as f64 * 0.5, 300))
            .collect();
        let fine = analyze(&Sequence::new(-256, half_step), 1024).unwrap();
        let mut in_band = 0.0;
        let mut out_band = 0.0;
        for j in 0..1024 {
            // original band |w| <= pi maps to |w'| <= pi/2 at the halved step
            if fine.omega(j).abs() <= PI / 2.0 + 1e-12 {
                in_band += fine.bin(j).norm_sqr();
            } else {
                out_band += fine.bin(j).norm_sqr();
            }
        }
        assert!(out_band <= 1e-6 * (in_band + out_band), "out {out_band} in {in_band}");
    }
}
