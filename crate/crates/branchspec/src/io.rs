//! CSV and JSON plumbing. CSV files open with a `#`-prefixed comment line
//! embedding the resolved run configuration so every output is
//! self-describing; readers skip those lines.

use crate::recovery::{Observations, RecoveryReport};
use crate::spectral::{Sequence, SpectrumGrid};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

pub fn config_comment(config: &serde_json::Value) -> String {
    format!("# config: {config}")
}

pub fn write_sequence_json(
    path: &Path,
    x: &Sequence,
    config: &serde_json::Value,
) -> Result<(), IoError> {
    let mut v = x.to_json();
    v["config"] = config.clone();
    fs::write(path, serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

pub fn read_sequence_json(path: &Path) -> Result<Sequence, IoError> {
    let text = fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    Ok(Sequence::from_json(&v)?)
}

pub fn write_spectrum_csv(
    path: &Path,
    xg: &SpectrumGrid,
    config: &serde_json::Value,
) -> Result<(), IoError> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", config_comment(config));
    let _ = writeln!(out, "omega,re,im");
    for j in xg.ascending_bins() {
        let b = xg.bin(j);
        let _ = writeln!(out, "{},{},{}", xg.omega(j), b.re, b.im);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_kernel_csv(
    path: &Path,
    taps: &[(i64, f64)],
    config: &serde_json::Value,
) -> Result<(), IoError> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", config_comment(config));
    let _ = writeln!(out, "k,h");
    for &(k, h) in taps {
        let _ = writeln!(out, "{k},{h}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_error_curve_csv(
    path: &Path,
    curve: &[(f64, f64)],
    config: &serde_json::Value,
) -> Result<(), IoError> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", config_comment(config));
    let _ = writeln!(out, "omega,residual");
    for &(w, r) in curve {
        let _ = writeln!(out, "{w},{r}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_observations_csv(
    path: &Path,
    obs: &Observations,
    config: &serde_json::Value,
) -> Result<(), IoError> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", config_comment(config));
    let _ = writeln!(out, "k,re,im");
    for (k, v) in obs.iter() {
        let _ = writeln!(out, "{k},{},{}", v.re, v.im);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_observations_csv(path: &Path, m: u32) -> Result<Observations, IoError> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<(i64, Complex64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('k') {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64, IoError> {
            s.ok_or(IoError::Csv { line: i + 1, msg: "missing field".into() })?
                .trim()
                .parse()
                .map_err(|e| IoError::Csv { line: i + 1, msg: format!("{e}") })
        };
        let k = parts
            .next()
            .ok_or(IoError::Csv { line: i + 1, msg: "missing k".into() })?
            .trim()
            .parse::<i64>()
            .map_err(|e| IoError::Csv { line: i + 1, msg: format!("{e}") })?;
        let re = parse(parts.next())?;
        let im = parse(parts.next())?;
        rows.push((k, Complex64::new(re, im)));
    }
    rows.sort_by_key(|r| r.0);
    let n_obs = rows.iter().map(|r| r.0.abs()).max().unwrap_or(0);
    let mut samples = vec![Complex64::new(0.0, 0.0); (2 * n_obs + 1) as usize];
    for (k, v) in rows {
        samples[(k + n_obs) as usize] = v;
    }
    Observations::new(m, n_obs, samples)
        .map_err(|e| IoError::Csv { line: 0, msg: format!("{e}") })
}

#[allow(clippy::too_many_arguments)]
pub fn write_recovery_csv(
    path: &Path,
    report: &RecoveryReport,
    truth: Option<&Sequence>,
    config: &serde_json::Value,
) -> Result<(), IoError> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", config_comment(config));
    let _ = writeln!(
        out,
        "n,d,p,horizon,estimate_re,estimate_im,truth_re,truth_im,abs_error,eta_bound,gamma,kappa,coverage_warnings"
    );
    for r in &report.records {
        let (tre, tim, err) = match truth {
            Some(t) => {
                let tv = t.get(r.n);
                (
                    format!("{}", tv.re),
                    format!("{}", tv.im),
                    format!("{}", (r.estimate - tv).norm()),
                )
            }
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.d,
            r.p,
            r.horizon,
            r.estimate.re,
            r.estimate.im,
            tre,
            tim,
            err,
            r.eta_bound,
            r.gamma,
            r.kappa,
            r.coverage_missing
        );
    }
    fs::write(path, out)?;
    Ok(())
}
