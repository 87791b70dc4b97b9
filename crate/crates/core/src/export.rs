//! Delimited-text export and import of traces, spectra and recovery
//! results. Every file starts with a `#`-prefixed metadata header; data
//! rows are tab-separated.

use std::io::Write;
use std::path::Path;

use crate::model::{CharTrace, ClassLabel, Spectrum, SpectrumEntry, StarProblem};
use crate::recovery::RecoveryResult;
use crate::spectrum::{asymptotic_residuals, window_report};
use crate::{Error, Result};

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::InvalidInput(format!("io: {e}"))
    }
}

/// FNV-1a fingerprint of a canonical problem description; stable across
/// runs, used to tag outputs with the problem they came from.
pub fn problem_fingerprint(problem: &StarProblem) -> String {
    let mut canon = String::new();
    for e in &problem.edges {
        canon.push_str(&format!("h={:.17e};q={:?};", e.h, e.q));
    }
    canon.push_str(&format!(
        "a={:.17e};b={:.17e};d={:.17e}",
        problem.jump.a, problem.jump.b, problem.jump.d
    ));
    format!("{:016x}", fnv1a(canon.as_bytes()))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn write_header(w: &mut impl Write, kind: &str, meta: &[(&str, String)]) -> Result<()> {
    writeln!(w, "# star-spectra {kind}")?;
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

pub fn problem_meta(problem: &StarProblem) -> Vec<(&'static str, String)> {
    vec![
        ("label", problem.label.clone()),
        ("problem-hash", problem_fingerprint(problem)),
        (
            "jump",
            format!(
                "a={} b={} d={}",
                problem.jump.a, problem.jump.b, problem.jump.d
            ),
        ),
    ]
}

/// Two-column trace file: `k omega`.
pub fn write_trace(
    path: &Path,
    trace: &CharTrace,
    mut meta: Vec<(&'static str, String)>,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    meta.push(("provenance", trace.provenance.to_string()));
    meta.push(("grid", format!("n={} spacing={:.9e}", trace.k_grid.len(), trace.spacing())));
    meta.push(("columns", "k omega".into()));
    write_header(&mut w, "charfn-trace", &meta)?;
    for (k, v) in trace.k_grid.iter().zip(&trace.values) {
        writeln!(w, "{k:.12}\t{v:.15e}")?;
    }
    Ok(())
}

/// Spectrum table: `index lambda sqrt_lambda multiplicity class residual`.
/// `sqrt_lambda` is signed (negative for negative eigenvalues).
pub fn write_spectrum(
    path: &Path,
    spectrum: &Spectrum,
    mut meta: Vec<(&'static str, String)>,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    meta.push(("k-max", format!("{}", spectrum.k_max)));
    meta.push(("lambda-min", format!("{}", spectrum.lambda_min)));
    meta.push(("truncation-index", format!("{}", spectrum.truncation_index)));
    meta.push(("root-tol", format!("{:e}", spectrum.root_tol)));
    meta.push(("columns", "index lambda sqrt_lambda multiplicity class residual".into()));
    write_header(&mut w, "spectrum", &meta)?;
    let residuals = asymptotic_residuals(spectrum);
    for (i, (e, r)) in spectrum.entries.iter().zip(&residuals).enumerate() {
        writeln!(
            w,
            "{i}\t{:.15e}\t{:.12}\t{}\t{}\t{:.6}",
            e.lambda,
            e.signed_k(),
            e.multiplicity,
            e.class,
            r.residual
        )?;
    }
    Ok(())
}

/// Counting-window report: `n k_bound expected found pass`.
pub fn write_windows(
    path: &Path,
    spectrum: &Spectrum,
    mut meta: Vec<(&'static str, String)>,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    meta.push(("columns", "n k_bound expected found pass".into()));
    write_header(&mut w, "counting-windows", &meta)?;
    for check in window_report(spectrum) {
        writeln!(
            w,
            "{}\t{:.2}\t{}\t{}\t{}",
            check.window.n,
            check.window.k_bound,
            check.window.expected_count,
            check.found,
            check.pass
        )?;
    }
    Ok(())
}

/// Parse a spectrum file written by [`write_spectrum`]. Returns the
/// spectrum plus any `jump` metadata found in the header (used as the
/// Hadamard anchor on the rebuild path).
pub fn read_spectrum(path: &Path) -> Result<(Spectrum, Option<crate::model::JumpSpec>)> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    let mut k_max = 0.0f64;
    let mut lambda_min = 0.0f64;
    let mut root_tol = 1e-13;
    let mut jump: Option<crate::model::JumpSpec> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "k-max" => k_max = value.parse().unwrap_or(0.0),
                    "lambda-min" => lambda_min = value.parse().unwrap_or(0.0),
                    "root-tol" => root_tol = value.parse().unwrap_or(1e-13),
                    "jump" => {
                        let mut a = None;
                        let mut b = None;
                        let mut d = None;
                        for part in value.split_whitespace() {
                            if let Some((k, v)) = part.split_once('=') {
                                let v: Option<f64> = v.parse().ok();
                                match k {
                                    "a" => a = v,
                                    "b" => b = v,
                                    "d" => d = v,
                                    _ => {}
                                }
                            }
                        }
                        if let (Some(a), Some(b), Some(d)) = (a, b, d) {
                            jump = Some(crate::model::JumpSpec { a, b, d, declared: true });
                        }
                    }
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(Error::InvalidInput(format!(
                "spectrum file line {}: expected at least 5 columns",
                lineno + 1
            )));
        }
        let lambda: f64 = fields[1]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("line {}: bad lambda", lineno + 1)))?;
        let multiplicity: u32 = fields[3]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("line {}: bad multiplicity", lineno + 1)))?;
        let class: ClassLabel = fields[4].parse()?;
        entries.push(SpectrumEntry {
            lambda,
            multiplicity,
            class,
            block: 0,
            ambiguous: false,
        });
    }
    if entries.is_empty() {
        return Err(Error::InvalidInput("spectrum file has no data rows".into()));
    }
    let truncation_index = entries.iter().map(|e| e.multiplicity as usize).sum();
    if k_max == 0.0 {
        k_max = entries.last().map(|e| e.lambda.max(0.0).sqrt()).unwrap_or(0.0);
    }
    Ok((
        Spectrum { entries, truncation_index, k_max, lambda_min, root_tol },
        jump,
    ))
}

/// Recovery report: estimates, calibration constants, T-sweep table and
/// pass/fail convergence flags.
pub fn write_recovery(
    path: &Path,
    result: &RecoveryResult,
    mut meta: Vec<(&'static str, String)>,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    meta.push((
        "calibration",
        format!(
            "alpha1-coeff={} beta-peak-coeff={} b-coeff={} beta-noise-floor={}",
            result.calibration.alpha1_moment_coeff,
            result.calibration.beta_peak_coeff,
            result.calibration.b_moment_coeff,
            result.calibration.beta_noise_floor
        ),
    ))
    ;
    write_header(&mut w, "recovery", &meta)?;
    writeln!(w, "C_hat\t{:.12}", result.c_hat)?;
    writeln!(w, "alpha1_hat\t{:.12}", result.alpha1_hat)?;
    writeln!(w, "a_hat\t{:.12}", result.a_hat)?;
    writeln!(w, "beta_hat\t{:.12}", result.beta_hat)?;
    match result.d_hat {
        Some(d) => writeln!(w, "d_hat\t{d:.12}")?,
        None => writeln!(w, "d_hat\tundefined (no amplitude jump detected)")?,
    }
    match result.b_moment {
        Some(b) => writeln!(w, "b_moment\t{b:.12}")?,
        None => writeln!(w, "b_moment\tskipped (a != 1 regime or no d available)")?,
    }
    writeln!(w, "no_jump\t{}", result.no_jump)?;
    // sweep: deviation from the final estimate, and whether the envelope
    // of those deviations shrinks from the first T to the last
    writeln!(w, "# sweep columns: T C alpha1 beta d a dev_a")?;
    let a_final = result.a_hat;
    let mut devs = Vec::new();
    for row in &result.sweep {
        let dev = (row.a_hat - a_final).abs();
        devs.push(dev);
        writeln!(
            w,
            "sweep\t{:.3}\t{:.9}\t{:.9}\t{:.9}\t{}\t{:.9}\t{:.3e}",
            row.t,
            row.c_hat,
            row.alpha1_hat,
            row.beta_hat,
            row.d_hat.map(|d| format!("{d:.9}")).unwrap_or_else(|| "-".into()),
            row.a_hat,
            dev
        )?;
    }
    let converging = devs.len() < 2 || devs[0] >= *devs.last().unwrap();
    writeln!(w, "sweep_envelope_decreasing\t{converging}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpSpec, StarProblem};
    use crate::propagate::Settings;
    use crate::spectrum::enumerate_eigenvalues;

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let p = StarProblem::reference();
        let a = problem_fingerprint(&p);
        let b = problem_fingerprint(&p);
        assert_eq!(a, b);
        let mut q = p.clone();
        q.jump = JumpSpec::new(2.0, 0.0, 1.0);
        assert_ne!(a, problem_fingerprint(&q));
    }

    #[test]
    fn spectrum_roundtrip() {
        let dir = std::env::temp_dir().join(format!("star-spectra-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("spectrum.tsv");
        let mut p = StarProblem::reference();
        p.jump = JumpSpec::new(2.0, 0.0, 1.0);
        let spec = enumerate_eigenvalues(&p, 4.25, -1.0, &Settings::default()).unwrap();
        write_spectrum(&path, &spec, problem_meta(&p)).unwrap();
        let (back, jump) = read_spectrum(&path).unwrap();
        assert_eq!(back.truncation_index, spec.truncation_index);
        assert_eq!(back.entries.len(), spec.entries.len());
        for (a, b) in back.entries.iter().zip(&spec.entries) {
            assert!((a.lambda - b.lambda).abs() < 1e-9);
            assert_eq!(a.multiplicity, b.multiplicity);
        }
        let j = jump.unwrap();
        assert_eq!((j.a, j.b, j.d), (2.0, 0.0, 1.0));
        std::fs::remove_dir_all(&dir).ok();
    }
}
