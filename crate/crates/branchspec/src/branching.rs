//! Branching processes: ordered families of sequences agreeing with their
//! root on a half-line, the representative branch stitched from them, and
//! the spectral surgery that makes every branch vanish on its own mask.

use crate::spectral::{
    analyze, synthesize, DegeneracyPlan, Sequence, SpectralError, SpectrumGrid,
};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BranchingError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("half-line agreement violated at branch d={d}, index k={k} (|deviation| = {dev})")]
    HalfLineViolation { d: i32, k: i64, dev: f64 },
    #[error("branch window of length {window} exceeds the periodization margin {margin} for grid {grid}")]
    PeriodizationMargin { window: usize, margin: usize, grid: usize },
    #[error("branch count mismatch: expected {expected} branches, found {found}")]
    BranchCount { expected: usize, found: usize },
    #[error(
        "target {target} is below the grid floor {floor} reachable by shrinking the masks (achievable error {floor})"
    )]
    GridFloor { target: f64, floor: f64 },
}

/// Ordered family `{x_d}`, `d = -m+1 ..= m-1`, with `x_d = x_0` on `k <= 0`
/// for `d > 0` and on `k >= 0` for `d < 0`.
#[derive(Debug, Clone)]
pub struct BranchingProcess {
    m: u32,
    branches: Vec<Sequence>, // indexed by d + m - 1
}

impl BranchingProcess {
    pub fn from_branches(m: u32, branches: Vec<Sequence>) -> Result<Self, BranchingError> {
        let expected = (2 * m - 1) as usize;
        if branches.len() != expected {
            return Err(BranchingError::BranchCount { expected, found: branches.len() });
        }
        Ok(BranchingProcess { m, branches })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn branch(&self, d: i32) -> &Sequence {
        &self.branches[(d + self.m as i32 - 1) as usize]
    }

    pub fn root(&self) -> &Sequence {
        self.branch(0)
    }

    pub fn branch_range(&self) -> impl Iterator<Item = i32> {
        -(self.m as i32 - 1)..=(self.m as i32 - 1)
    }

    /// JSON form: `{"m": m, "branches": [{"d": d, "seq": {..}}, ..]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let branches: Vec<serde_json::Value> = self
            .branch_range()
            .map(|d| serde_json::json!({"d": d, "seq": self.branch(d).to_json()}))
            .collect();
        serde_json::json!({"m": self.m, "branches": branches})
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, BranchingError> {
        let m = v["m"].as_u64().unwrap_or(0) as u32;
        let rows = v["branches"].as_array().cloned().unwrap_or_default();
        let expected = if m >= 1 { (2 * m - 1) as usize } else { 0 };
        if m < 1 || rows.len() != expected {
            return Err(BranchingError::BranchCount { expected, found: rows.len() });
        }
        let mut branches = vec![Sequence::zero(); expected];
        for row in rows {
            let d = row["d"].as_i64().unwrap_or(i64::MAX);
            let idx = d + m as i64 - 1;
            if idx < 0 || idx >= expected as i64 {
                return Err(BranchingError::BranchCount { expected, found: 0 });
            }
            let seq = Sequence::from_json(&row["seq"])
                .map_err(|_| BranchingError::BranchCount { expected, found: 0 })?;
            branches[idx as usize] = seq;
        }
        BranchingProcess::from_branches(m, branches)
    }

    /// Exact half-line agreement check; returns the first offending `(d, k)`.
    pub fn check_half_lines(&self, tol: f64) -> Result<(), BranchingError> {
        let root = self.root();
        for d in self.branch_range() {
            if d == 0 {
                continue;
            }
            let b = self.branch(d);
            let lo = root.origin().min(b.origin());
            let hi = root.end().max(b.end());
            for k in lo..hi {
                let constrained = (d > 0 && k <= 0) || (d < 0 && k >= 0);
                if !constrained {
                    continue;
                }
                let dev = (b.get(k) - root.get(k)).norm();
                if dev > tol {
                    return Err(BranchingError::HalfLineViolation { d, k, dev });
                }
            }
        }
        Ok(())
    }
}

/// The representative branch plus the `(k, d)` assignment table used to
/// build it.
#[derive(Debug, Clone)]
pub struct RepresentativeBranch {
    pub sequence: Sequence,
    pub assignments: Vec<(i64, i32)>,
}

/// Branch index feeding `x~(k) = x_d(k+d)`: the unique admissible `d` with
/// `(k + d) / m` integer, nonnegative for `k >= 0` and nonpositive for
/// `k < 0`.
pub fn assignment_index(k: i64, m: u32) -> i32 {
    let m = m as i64;
    let d = if k >= 0 { (-k).rem_euclid(m) } else { -(k.rem_euclid(m)) };
    d as i32
}

/// Lift a sequence into a branching process: branch `d > 0` repeats `x(0)`
/// on `0..=d` and delays the rest by `d`; branch `d < 0` mirrors it.
pub fn lift(x: &Sequence, m: u32) -> BranchingProcess {
    let me = m as i64 - 1;
    let (lo, hi) = if x.is_empty() {
        (-me - 1, me + 2)
    } else {
        (x.origin().min(0) - me - 1, x.end().max(1) + me + 1)
    };
    let mut branches = Vec::with_capacity((2 * m - 1) as usize);
    for d in -(m as i32 - 1)..=(m as i32 - 1) {
        let dd = d as i64;
        let values: Vec<Complex64> = (lo..hi)
            .map(|k| {
                if d == 0 {
                    x.get(k)
                } else if d > 0 {
                    if k < 0 {
                        x.get(k)
                    } else if k <= dd {
                        x.get(0)
                    } else {
                        x.get(k - dd)
                    }
                } else if k > 0 {
                    x.get(k)
                } else if k >= dd {
                    x.get(0)
                } else {
                    x.get(k - dd)
                }
            })
            .collect();
        branches.push(Sequence::new(lo, values));
    }
    BranchingProcess { m, branches }
}

/// Stitch the representative branch `x~(k) = x_d(k+d)` out of a branching
/// process. Rejects inputs that violate the half-line invariants.
pub fn representative(bp: &BranchingProcess) -> Result<RepresentativeBranch, BranchingError> {
    bp.check_half_lines(0.0)?;
    let m = bp.m();
    let me = m as i64 - 1;
    let (lo, hi) = bp
        .branch_range()
        .map(|d| {
            let b = bp.branch(d);
            (b.origin() - me, b.end() + me)
        })
        .fold((i64::MAX, i64::MIN), |(alo, ahi), (blo, bhi)| (alo.min(blo), ahi.max(bhi)));
    if lo >= hi {
        return Ok(RepresentativeBranch { sequence: Sequence::zero(), assignments: Vec::new() });
    }
    let mut values = Vec::with_capacity((hi - lo) as usize);
    let mut assignments = Vec::with_capacity((hi - lo) as usize);
    for k in lo..hi {
        let d = assignment_index(k, m);
        debug_assert_eq!((k + d as i64).rem_euclid(m as i64), 0);
        values.push(bp.branch(d).get(k + d as i64));
        assignments.push((k, d));
    }
    Ok(RepresentativeBranch { sequence: Sequence::new(lo, values), assignments })
}

fn common_window(bp: &BranchingProcess) -> (i64, i64) {
    bp.branch_range()
        .map(|d| {
            let b = bp.branch(d);
            (b.origin(), b.end())
        })
        .fold((i64::MAX, i64::MIN), |(alo, ahi), (blo, bhi)| (alo.min(blo), ahi.max(bhi)))
}

/// The masked-bin energy that spectral surgery moves, identical for every
/// branch: `(1/N) [ sum_{mask_0} |X_0|^2 + sum_{p != 0} sum_{mask_p} |X_p|^2 ]`.
pub fn masked_error_energy(
    bp: &BranchingProcess,
    plan: &DegeneracyPlan,
    grid: usize,
) -> Result<f64, BranchingError> {
    let masks = plan.masks(grid)?;
    let n = grid as f64;
    let x0 = analyze(bp.root(), grid)?;
    let mut total = 0.0;
    for (d, mask) in &masks {
        if *d == 0 {
            total += mask.indices().map(|j| x0.bin(j).norm_sqr()).sum::<f64>() / n;
        } else {
            let xd = analyze(bp.branch(*d), grid)?;
            total += mask.indices().map(|j| xd.bin(j).norm_sqr()).sum::<f64>() / n;
        }
    }
    Ok(total)
}

/// Spectral surgery: produce a branching process whose branch `d` vanishes
/// on its mask, while keeping the half-line identities exact.
///
/// The root spectrum is zeroed on the union of all masks and receives the
/// difference spectrum `Y_d` on mask `d`; each branch is then rebuilt in the
/// time domain as `x^_d = x^_0 - y_d`, so the agreement invariants are exact
/// identities rather than grid approximations.
pub fn degenerate(
    bp: &BranchingProcess,
    plan: &DegeneracyPlan,
    grid: usize,
) -> Result<BranchingProcess, BranchingError> {
    let masks = plan.masks(grid)?;
    let (lo, hi) = common_window(bp);
    let window = if lo < hi { (hi - lo) as usize } else { 0 };
    if window > grid / 2 {
        return Err(BranchingError::PeriodizationMargin {
            window,
            margin: grid / 2,
            grid,
        });
    }

    let root = bp.root();
    let x0 = analyze(root, grid)?;
    let union: Vec<bool> = (0..grid)
        .map(|j| masks.iter().any(|(_, mk)| mk.contains(j)))
        .collect();
    let mut bins: Vec<Complex64> = x0
        .bins()
        .iter()
        .zip(union.iter())
        .map(|(&b, &inside)| if inside { Complex64::new(0.0, 0.0) } else { b })
        .collect();

    let mut diffs: Vec<(i32, Sequence)> = Vec::new();
    for (d, mask) in &masks {
        if *d == 0 {
            continue;
        }
        let y = root.sub(bp.branch(*d));
        let yg = analyze(&y, grid)?;
        for j in mask.indices() {
            bins[j] = yg.bin(j);
        }
        diffs.push((*d, y));
    }

    let xh0_grid = SpectrumGrid::new(bins)?;
    let start = if window == 0 {
        -(grid as i64) / 2
    } else {
        lo + (window as i64) / 2 - (grid as i64) / 2
    };
    let xh0 = synthesize(&xh0_grid, start, grid)?;

    let mut branches = Vec::with_capacity((2 * bp.m() - 1) as usize);
    for d in bp.branch_range() {
        if d == 0 {
            branches.push(xh0.clone());
        } else {
            let y = &diffs.iter().find(|(dd, _)| *dd == d).unwrap().1;
            let values: Vec<Complex64> =
                xh0.iter_indexed().map(|(k, v)| v - y.get(k)).collect();
            branches.push(Sequence::new(start, values));
        }
    }
    BranchingProcess::from_branches(bp.m(), branches)
}

/// Shrink the mask half-width until the per-branch surgery error falls to
/// `eps / (2m - 1)`, then run the surgery and stitch the representative.
/// Returns the representative branch together with the half-width that
/// achieved the target.
pub fn approximate(
    x: &Sequence,
    m: u32,
    eps: f64,
    grid: usize,
) -> Result<(RepresentativeBranch, f64), BranchingError> {
    let start_delta = DegeneracyPlan::max_disjoint_delta(m, grid) / 2.0;
    if x.is_zero() {
        return Ok((
            RepresentativeBranch { sequence: Sequence::zero(), assignments: Vec::new() },
            start_delta,
        ));
    }
    let bp = lift(x, m);
    let target = eps / (2.0 * m as f64 - 1.0);

    // Spectra are fixed across the search; only the masks shrink.
    let x0 = analyze(bp.root(), grid)?;
    let mut spectra: Vec<(i32, SpectrumGrid)> = vec![(0, x0)];
    for d in bp.branch_range() {
        if d != 0 {
            let y = bp.root().sub(bp.branch(d));
            spectra.push((d, analyze(&y, grid)?));
        }
    }

    let mut delta = start_delta;
    let mut achieved = f64::INFINITY;
    let grid_step = 2.0 * std::f64::consts::PI / grid as f64;
    for _ in 0..40 {
        let plan = DegeneracyPlan::with_zeta(m, delta, |d| DegeneracyPlan::example_zeta(m, d))?;
        let masks = plan.masks(grid)?;
        let mut energy = 0.0;
        for (d, mask) in &masks {
            let xg = &spectra.iter().find(|(dd, _)| dd == d).unwrap().1;
            energy += mask.indices().map(|j| xg.bin(j).norm_sqr()).sum::<f64>() / grid as f64;
        }
        achieved = energy.sqrt();
        if achieved <= target {
            let out = degenerate(&bp, &plan, grid)?;
            let rep = representative(&out)?;
            return Ok((rep, delta));
        }
        if delta < grid_step / 2.0 {
            // masks are down to their center bins; no further shrinkage helps
            break;
        }
        delta /= 2.0;
    }
    Err(BranchingError::GridFloor { target, floor: achieved })
}

/// Residual report for a branching process: exact half-line deviations per
/// branch, plus masked-bin residuals when a plan is supplied.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub half_line: Vec<BranchDeviation>,
    pub membership: Option<Vec<BranchResidual>>,
}

#[derive(Debug, Clone, Copy)]
pub struct BranchDeviation {
    pub d: i32,
    pub max_deviation: f64,
    pub worst_k: Option<i64>,
}

#[derive(Debug, Clone, Copy)]
pub struct BranchResidual {
    pub d: i32,
    pub residual: f64,
    pub max_overall: f64,
}

impl VerifyReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.half_line.iter().all(|b| b.max_deviation <= tol)
            && self.membership.as_ref().is_none_or(|ms| {
                ms.iter().all(|m| m.residual <= tol * (1.0 + m.max_overall))
            })
    }
}

pub fn verify(
    bp: &BranchingProcess,
    plan: Option<&DegeneracyPlan>,
    grid: usize,
) -> Result<VerifyReport, BranchingError> {
    let root = bp.root();
    let mut half_line = Vec::new();
    for d in bp.branch_range() {
        if d == 0 {
            continue;
        }
        let b = bp.branch(d);
        let lo = root.origin().min(b.origin());
        let hi = root.end().max(b.end());
        let mut max_dev = 0.0;
        let mut worst = None;
        for k in lo..hi {
            let constrained = (d > 0 && k <= 0) || (d < 0 && k >= 0);
            if !constrained {
                continue;
            }
            let dev = (b.get(k) - root.get(k)).norm();
            if dev > max_dev {
                max_dev = dev;
                worst = Some(k);
            }
        }
        half_line.push(BranchDeviation { d, max_deviation: max_dev, worst_k: worst });
    }

    let membership = match plan {
        None => None,
        Some(plan) => {
            let masks = plan.masks(grid)?;
            let mut rows = Vec::new();
            for (d, mask) in &masks {
                let xg = analyze(bp.branch(*d), grid)?;
                let residual = mask.indices().map(|j| xg.bin(j).norm()).fold(0.0, f64::max);
                rows.push(BranchResidual { d: *d, residual, max_overall: xg.max_abs() });
            }
            Some(rows)
        }
    };

    Ok(VerifyReport { half_line, membership })
}
