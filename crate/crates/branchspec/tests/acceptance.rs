//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with its measured numbers. Run with
//! `cargo test --test acceptance -- --nocapture` to see the report.

mod common;

use branchspec::branching::{approximate, degenerate, lift, masked_error_energy, verify};
use branchspec::ctsampling::{bandlimit, error_report, evaluate, lift_to_ct};
use branchspec::predictor::{
    error_curve, eval_v, extract_kernel, transfer_error, PredictorParams,
};
use branchspec::recovery::{
    decimate, noise_sweep, recover_range, tune_gamma_holdout, RecoverConfig,
};
use branchspec::spectral::{degeneracy_points, membership, synthesize, DegeneracyPlan};
use common::{gaussian_spectrum, masked_band_signal, random_sequence, smooth_bump};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::time::Instant;

const TUNE_SCHEDULE: [f64; 8] = [1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 12.0];

#[test]
fn criterion_1_degeneracy_construction() {
    let start = Instant::now();
    let x = random_sequence(1, 0, 64);
    let (m, delta, grid) = (2u32, 0.1f64, 4096usize);
    let plan = DegeneracyPlan::default_plan(m, delta).unwrap();
    let bp = lift(&x, m);
    let out = degenerate(&bp, &plan, grid).unwrap();

    let mut worst_residual = 0.0f64;
    for d in out.branch_range() {
        let chk = membership(out.branch(d), delta, plan.mu(d), grid, 1e-10).unwrap();
        let rel = chk.residual / (1.0 + chk.max_overall);
        worst_residual = worst_residual.max(rel);
        assert!(chk.in_class, "branch {d}: relative residual {rel}");
    }
    let mut worst_halfline = 0.0f64;
    for row in verify(&out, None, grid).unwrap().half_line {
        worst_halfline = worst_halfline.max(row.max_deviation);
    }
    assert!(worst_halfline <= 1e-12, "half-line deviation {worst_halfline}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    println!(
        "criterion 1: PASS (membership residual {worst_residual:.2e}, half-line {worst_halfline:.2e}, {elapsed:?})"
    );
}

#[test]
fn criterion_2_exact_error_identity() {
    // The four half-widths only admit pairwise-disjoint masks for m = 1 (for
    // m = 2 the tightest center gap is pi/8, so any delta >= pi/16 overlaps);
    // the identity is checked across the full list at m = 1 and at the
    // disjoint-feasible half-widths for m = 2.
    let grid = 4096usize;
    let x = random_sequence(2, 0, 64);

    let mut prev = f64::INFINITY;
    for &delta in &[0.4, 0.2, 0.1, 0.05] {
        let plan = DegeneracyPlan::default_plan(1, delta).unwrap();
        let bp = lift(&x, 1);
        let out = degenerate(&bp, &plan, grid).unwrap();
        let expect = masked_error_energy(&bp, &plan, grid).unwrap();
        let err = out.branch(0).sub(bp.branch(0)).l2_norm().powi(2);
        assert!(
            (err - expect).abs() <= 1e-9 * expect,
            "m=1 delta={delta}: {err} vs {expect}"
        );
        assert!(err <= prev * (1.0 + 1e-12), "monotone at delta={delta}");
        prev = err;
    }

    let mut prev = f64::INFINITY;
    for &delta in &[0.1, 0.05] {
        let plan = DegeneracyPlan::default_plan(2, delta).unwrap();
        let bp = lift(&x, 2);
        let out = degenerate(&bp, &plan, grid).unwrap();
        let expect = masked_error_energy(&bp, &plan, grid).unwrap();
        for d in out.branch_range() {
            let err = out.branch(d).sub(bp.branch(d)).l2_norm().powi(2);
            assert!(
                (err - expect).abs() <= 1e-9 * expect,
                "m=2 d={d} delta={delta}: {err} vs {expect}"
            );
        }
        assert!(expect <= prev * (1.0 + 1e-12));
        prev = expect;
    }
    println!("criterion 2: PASS (identity to 1e-9 across half-widths; non-increasing)");
}

#[test]
fn criterion_3_approximation_at_desk_scale() {
    let start = Instant::now();
    let x = smooth_bump();
    let (m, grid) = (2u32, 4096usize);
    let eps = 0.01 * x.l2_norm();
    let (rep, delta) = approximate(&x, m, eps, grid).unwrap();
    let err = rep.sequence.sub(&x).l2_norm();
    assert!(err <= eps, "error {err} vs eps {eps}");

    let plan = DegeneracyPlan::default_plan(m, delta).unwrap();
    let out = degenerate(&lift(&x, m), &plan, grid).unwrap();
    let report = verify(&out, Some(&plan), grid).unwrap();
    assert!(report.passes(1e-10), "membership of reconstructed branches");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "runtime {elapsed:?}");
    println!(
        "criterion 3: PASS (l2 error {err:.3e} <= eps {eps:.3e}, delta {delta:.4}, {elapsed:?})"
    );
}

#[test]
fn criterion_4_kernel_properties() {
    // DC tap of V itself
    let grid = 8192usize;
    let mut v0 = Complex64::new(0.0, 0.0);
    for j in 0..grid {
        v0 += eval_v(2.0 * PI * j as f64 / grid as f64, 4.0, 0.4).unwrap();
    }
    v0 /= grid as f64;
    assert!(v0.norm() <= 1e-10, "v(0) = {}", v0.norm());

    for (n, nu, m) in [(1u32, 1u32, 2u32), (2, 1, 2), (1, 2, 2)] {
        let p = PredictorParams::new(4.0, 0.4, n, nu, m).unwrap();
        let k = extract_kernel(&p, grid, None).unwrap();
        assert!(k.imag_residual <= 1e-10, "({n},{nu},{m}): imag {}", k.imag_residual);
        assert!(k.leakage <= 1e-8, "({n},{nu},{m}): leakage {}", k.leakage);
        let step = (nu * m) as i64;
        for &(tap, _) in &k.taps {
            assert_eq!((tap + n as i64).rem_euclid(step), 0, "({n},{nu},{m}) tap {tap}");
            assert!(tap >= n as i64 * step - n as i64);
        }
    }
    println!("criterion 4: PASS (v(0) {:.1e}; real taps; lattice leakage <= 1e-8)", v0.norm());
}

#[test]
fn criterion_5_predictor_convergence() {
    let start = Instant::now();
    let grid = 4096usize;
    let (x, xg) = masked_band_signal(grid, 7);
    assert!((x.l2_norm() - 1.0).abs() < 1e-12);
    let origin = -(grid as i64) / 2;

    let sup_err = |gamma: f64| -> f64 {
        let p = PredictorParams::new(gamma, 0.4, 2, 1, 2).unwrap();
        let err_seq = synthesize(&transfer_error(&p, &xg), origin, grid).unwrap();
        err_seq.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    };

    let mut errs = Vec::new();
    for &g in &[2.0, 4.0, 8.0, 16.0, 32.0] {
        let sup = sup_err(g);
        // the grid-L1 norm of the error spectrum dominates the sup error
        let p = PredictorParams::new(g, 0.4, 2, 1, 2).unwrap();
        let e = transfer_error(&p, &xg);
        let l1 = e.bins().iter().map(|b| b.norm()).sum::<f64>() / grid as f64;
        assert!(sup <= l1 * (1.0 + 1e-12), "gamma={g}: sup {sup} vs L1 {l1}");
        errs.push((g, sup));
    }
    for w in errs.windows(2) {
        assert!(
            w[1].1 <= 1.1 * w[0].1 + 1e-300,
            "sup-error grew: {:?} -> {:?}",
            w[0],
            w[1]
        );
    }
    let mut met = None;
    for i in 1..=10u32 {
        let g = (1u64 << i) as f64;
        if sup_err(g) <= 1e-2 {
            met = Some(g);
            break;
        }
    }
    let elapsed = start.elapsed();
    assert!(met.is_some(), "no gamma <= 1024 reaches 1e-2");
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?}");
    println!(
        "criterion 5: PASS (errors {:?}; 1e-2 at gamma={}, {elapsed:?})",
        errs.iter().map(|(g, e)| format!("{g}:{e:.2e}")).collect::<Vec<_>>(),
        met.unwrap()
    );
}

#[test]
fn criterion_6_end_to_end_recovery() {
    let x = smooth_bump();
    let (m, grid) = (2u32, 4096usize);
    let eps = 0.01 * x.l2_norm();
    let (rep, _) = approximate(&x, m, eps, grid).unwrap();
    let xt = rep.sequence;

    let n_obs = 512i64;
    let obs = decimate(&xt, m, -n_obs, n_obs);
    let base = RecoverConfig::new(m, 4.0);
    let (gamma, holdout) = tune_gamma_holdout(&obs, &base, &TUNE_SCHEDULE, 8).unwrap();
    let mut cfg = base;
    cfg.gamma = gamma;
    let report = recover_range(&obs, 4, &cfg).unwrap();

    for rec in &report.records {
        if rec.n % m as i64 == 0 {
            assert!(rec.on_lattice);
            assert_eq!(rec.estimate, xt.get(rec.n), "lattice n={}", rec.n);
        }
    }
    let max_err = report.max_error_vs(&xt);
    let tol = 1e-2 * xt.linf_norm();
    assert!(max_err <= tol, "max error {max_err} vs tolerance {tol}");
    println!(
        "criterion 6: PASS (max error {max_err:.3e} <= {tol:.3e}, gamma {gamma} tuned at holdout {holdout:.3e})"
    );
}

#[test]
fn criterion_7_noise_robustness() {
    let x = smooth_bump();
    let (m, grid) = (2u32, 4096usize);
    let eps = 0.01 * x.l2_norm();
    let (rep, _) = approximate(&x, m, eps, grid).unwrap();
    let xt = rep.sequence;

    let sigmas = [0.0, 1e-4, 1e-3];
    let n_obs_list = [128i64, 256, 512];
    let base = RecoverConfig::new(m, 4.0);
    let table = noise_sweep(&xt, m, &sigmas, &n_obs_list, &base, 4, 0, &TUNE_SCHEDULE).unwrap();

    println!("  sigma      n_obs  gamma  max_error     noiseless     eta_bound");
    for c in &table.cells {
        println!(
            "  {:<9.1e} {:<6} {:<6} {:<13.4e} {:<13.4e} {:<13.4e}",
            c.sigma, c.n_obs, c.gamma, c.max_error, c.noiseless_same_gamma, c.eta_bound
        );
        assert!(
            c.max_error <= c.noiseless_same_gamma + c.eta_bound * (1.0 + 1e-6),
            "decomposition at sigma={} n_obs={}",
            c.sigma,
            c.n_obs
        );
    }
    for sig in sigmas {
        let row: Vec<&branchspec::recovery::SweepCell> =
            table.cells.iter().filter(|c| c.sigma == sig).collect();
        for w in row.windows(2) {
            assert!(
                w[1].max_error <= 1.1 * w[0].max_error + 1e-15,
                "errors grew with n_obs at sigma={sig}"
            );
        }
    }

    // the gamma sweep at the top noise level turns back up once gamma
    // amplifies the contamination
    println!("  gamma sweep at sigma={:.0e}:", sigmas[sigmas.len() - 1]);
    for r in &table.gamma_rows {
        println!(
            "    gamma {:<5} target_error {:<12.4e} holdout_error {:<12.4e}",
            r.gamma, r.target_error, r.holdout_error
        );
    }
    let holdouts: Vec<f64> = table.gamma_rows.iter().map(|r| r.holdout_error).collect();
    let argmin = holdouts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert!(
        argmin > 0 && argmin < holdouts.len() - 1,
        "interior minimum expected, argmin at edge {argmin}: {holdouts:?}"
    );
    assert!(holdouts[holdouts.len() - 1] > holdouts[argmin] * 2.0);
    println!("criterion 7: PASS (decomposition per cell; monotone in n_obs; error floor turns up in gamma)");
}

#[test]
fn criterion_8_reference_error_curve() {
    let grid = 8192usize;
    let params = PredictorParams::new(4.0, 0.4, 1, 1, 4).unwrap();
    let curve = error_curve(&params, grid);
    let centers = degeneracy_points(4);

    // the four largest local maxima sit on the degeneracy points
    let mut maxima: Vec<(f64, f64)> = Vec::new();
    for i in 0..curve.len() {
        let prev = &curve[(i + curve.len() - 1) % curve.len()];
        let next = &curve[(i + 1) % curve.len()];
        if curve[i].1 >= prev.1 && curve[i].1 >= next.1 {
            maxima.push(curve[i]);
        }
    }
    maxima.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for &(w, _) in maxima.iter().take(4) {
        let d = centers
            .iter()
            .map(|&s| {
                let diff = (w - s).rem_euclid(2.0 * PI);
                diff.min(2.0 * PI - diff)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(d <= 0.1, "peak at {w} is {d} from the nearest degeneracy point");
    }

    // symmetric in omega
    let by_w: std::collections::HashMap<i64, f64> =
        curve.iter().map(|&(w, r)| ((w * 1e9).round() as i64, r)).collect();
    for &(w, r) in &curve {
        if let Some(&mirror) = by_w.get(&((-w * 1e9).round() as i64)) {
            assert!((r - mirror).abs() <= 1e-10 * (1.0 + r), "asymmetry at {w}");
        }
    }

    // kernel real
    let kernel = extract_kernel(&params, grid, None).unwrap();
    assert!(kernel.imag_residual <= 1e-10);

    // residual outside the half-width-0.3 mask. The transfer function's
    // good-region boundary at gamma=4, r=0.4 sits at arccos(alpha)/4 ~ 0.283
    // from each center and the residual at distance 0.3 is ~0.748, crossing
    // 0.2 only near 0.41; the 0.2 level at 0.3 rad is not attainable for
    // these parameters.
    let mut sup_outside = 0.0f64;
    for &(w, r) in &curve {
        let d = centers
            .iter()
            .map(|&s| {
                let diff = (w - s).rem_euclid(2.0 * PI);
                diff.min(2.0 * PI - diff)
            })
            .fold(f64::INFINITY, f64::min);
        if d > 0.3 {
            sup_outside = sup_outside.max(r);
        }
    }
    println!(
        "criterion 8: peaks on centers, symmetric, kernel real; sup outside J(0.3,4) = {sup_outside:.4}"
    );
    assert!(
        sup_outside < 0.2,
        "residual outside J(0.3,4) reaches {sup_outside:.4}; the 0.2 level for gamma=4, r=0.4 \
         sits at distance ~0.41, so this bound cannot hold at 0.3 (boundary residual ~0.75)"
    );
}

#[test]
fn criterion_9_continuous_time_bridge() {
    // band-limited function with Gaussian spectrum, shifted right
    let (omegas, f_spec) = gaussian_spectrum(0.18, 48.0, 8.0, 4001);
    let omega_max = PI;
    let tau = PI / omega_max;
    let f_bl = bandlimit(&omegas, &f_spec, omega_max, 0, 120).unwrap();
    let x = f_bl.coeffs.clone();

    let m = 2u32;
    let eps = 0.01 * x.l2_norm();
    let (rep, _) = approximate(&x, m, eps, 4096).unwrap();
    let xt = rep.sequence;

    let ct = error_report(&x, &xt, tau, m, omega_max, 4096).unwrap();
    assert!(
        (ct.l2_ct_parseval - ct.l2_ct_quadrature).abs() <= 1e-9 * ct.l2_ct_parseval,
        "Parseval routes: {} vs {}",
        ct.l2_ct_parseval,
        ct.l2_ct_quadrature
    );

    let eps_branch = eps / (2.0 * m as f64 - 1.0);
    let bound = ct.paper_c * eps_branch;
    assert!(
        ct.linf_ct <= bound,
        "closeness bound: {} vs {}",
        ct.linf_ct,
        bound
    );

    // interpolation consistency at grid times
    let f_t = lift_to_ct(xt.clone(), tau).unwrap();
    let trunc = xt.len() + 16;
    let mut worst = 0.0f64;
    for (k, v) in xt.iter_indexed().step_by(64) {
        worst = worst.max((evaluate(&f_t, tau * k as f64, trunc) - v).norm());
    }
    assert!(worst <= 1e-10, "interpolation residual {worst}");
    println!(
        "criterion 9: PASS (Parseval {:.3e}={:.3e}; L-inf gap {:.3e} <= {bound:.3e}; interp {worst:.1e})",
        ct.l2_ct_parseval, ct.l2_ct_quadrature, ct.linf_ct
    );
}
