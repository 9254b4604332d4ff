//! Summaries and plot data for a directory of runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::pipeline::{find_runs, Manifest};
use crate::cover::unit_ball_volume;
use crate::error::{LabError, Result};
use crate::output::parse_csv;
use crate::stats::fit_power_law;
use crate::weights::ModelKind;

pub const REPORT_DIR: &str = "report";

/// Pass/fail of one recomputed check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_owned(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingColumns {
    pub radius: Vec<f64>,
    pub mean_s: Vec<f64>,
    pub mean_mass: Vec<f64>,
    pub mass_ratio: Vec<f64>,
    pub median_tube: Vec<f64>,
    pub lambda: f64,
}

pub fn read_scaling_csv(text: &str) -> Result<ScalingColumns> {
    let (header, rows) = parse_csv(text);
    let col = |name: &str| -> Result<Vec<f64>> {
        let i = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabError::config(format!("scaling CSV lacks column '{name}'")))?;
        rows.iter()
            .map(|r| {
                r.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| LabError::config(format!("bad value in column '{name}'")))
            })
            .collect()
    };
    let lambda = col("lambda")?.first().copied().unwrap_or(0.0);
    Ok(ScalingColumns {
        radius: col("R")?,
        mean_s: col("meanS")?,
        mean_mass: col("meanMass")?,
        mass_ratio: col("massRatio")?,
        median_tube: col("medianTubeSup")?,
        lambda,
    })
}

/// Upper limit on the fitted exponent of mean `S`: 0.4 at `λ = 0`, and
/// `0.4 + λ + 0.2` otherwise.
pub fn s_exponent_limit(lambda: f64) -> f64 {
    if lambda == 0.0 {
        0.4
    } else {
        0.6 + lambda
    }
}

/// Tube occupancy: `median ≤ 4 ln R` at every radius, and consecutive
/// medians grow by at most the radius ratio (a factor 2 per doubling).
pub fn tube_check(radius: &[f64], medians: &[f64]) -> Check {
    let bound_ok = radius.iter().zip(medians).all(|(r, m)| *m <= 4.0 * r.ln());
    let growth_ok = radius
        .windows(2)
        .zip(medians.windows(2))
        .all(|(r, m)| m[1] <= (r[1] / r[0]) * m[0]);
    let detail = radius
        .iter()
        .zip(medians)
        .map(|(r, m)| format!("R={r}: median {m:.3} (4lnR={:.3})", 4.0 * r.ln()))
        .collect::<Vec<_>>()
        .join("; ");
    Check::new("tube occupancy", bound_ok && growth_ok, detail)
}

/// Checks recomputed from a scaling CSV. `c` and `d` come from the config.
pub fn scaling_checks(cols: &ScalingColumns, kind: ModelKind, c: f64, d: usize) -> Vec<Check> {
    let mut checks = Vec::new();
    match fit_power_law(&cols.radius, &cols.mean_s) {
        Some(fit) => {
            let limit = s_exponent_limit(cols.lambda);
            checks.push(Check::new(
                "expected supremum exponent",
                fit.exponent <= limit,
                format!("alpha = {:.4} (limit {limit})", fit.exponent),
            ));
        }
        None => checks.push(Check::new(
            "expected supremum exponent",
            false,
            "fit refused (fewer than three radii or nonpositive means)".into(),
        )),
    }
    checks.push(tube_check(&cols.radius, &cols.median_tube));
    if kind == ModelKind::Selector {
        let scale = c * unit_ball_volume::<f64>(d);
        let ratios: Vec<f64> = cols.mass_ratio.iter().map(|m| m / scale).collect();
        checks.push(Check::new(
            "mass scaling",
            ratios.iter().all(|r| (0.5..=2.0).contains(r)),
            format!(
                "meanMass/(c v_d R^beta) = [{}]",
                ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
            ),
        ));
        if cols.lambda > 0.0 {
            let beta = d as f64 - 1.0 + cols.lambda;
            let fit = fit_power_law(&cols.radius, &cols.mean_mass);
            checks.push(Check::new(
                "lambda mass exponent",
                fit.as_ref().is_some_and(|f| (f.exponent - beta).abs() <= 0.2),
                match fit {
                    Some(f) => format!("fitted {:.4}, target {beta}", f.exponent),
                    None => "fit refused".into(),
                },
            ));
        }
    }
    checks
}

fn dat(xs: &[f64], ys: &[f64]) -> String {
    let mut s = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(s, "{x:.16e} {y:.16e}");
    }
    s
}

fn mark(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

pub struct Report {
    pub summary: String,
    pub directory: PathBuf,
    pub checks: Vec<(String, Check)>,
}

/// Summarize every run under `dir`. Runs are keyed by config hash and never
/// merged.
pub fn emit_report(dir: &Path) -> Result<Report> {
    if !dir.is_dir() {
        return Err(LabError::config(format!("{} is not a directory", dir.display())));
    }
    let runs = find_runs(dir)?;
    if runs.is_empty() {
        return Err(LabError::config(format!("no run manifest found under {}", dir.display())));
    }
    let out_dir = dir.join(REPORT_DIR);
    std::fs::create_dir_all(&out_dir)?;

    let mut groups: BTreeMap<String, Vec<(PathBuf, Manifest)>> = BTreeMap::new();
    for (path, m) in runs {
        groups.entry(m.config_hash.clone()).or_default().push((path, m));
    }

    let mut summary = String::new();
    let mut all_checks = Vec::new();
    for (hash, runs) in &groups {
        for (path, m) in runs {
            let name = path.file_name().map_or_else(|| hash[..12].to_owned(), |n| n.to_string_lossy().into_owned());
            let _ = writeln!(summary, "== {name}");
            let _ = writeln!(summary, "subcommand: {}", m.subcommand);
            let _ = writeln!(summary, "configHash: {hash}");
            let _ = writeln!(summary, "masterSeed: {}", m.master_seed);
            for check in run_section(path, m, &name, &out_dir, &mut summary)? {
                let _ = writeln!(summary, "[{}] {}: {}", mark(check.passed), check.name, check.detail);
                all_checks.push((name.clone(), check));
            }
            summary.push('\n');
        }
    }
    std::fs::write(out_dir.join("summary.txt"), &summary)?;
    Ok(Report {
        summary,
        directory: out_dir,
        checks: all_checks,
    })
}

fn run_section(path: &Path, m: &Manifest, name: &str, out_dir: &Path, summary: &mut String) -> Result<Vec<Check>> {
    let read = |file: &str| std::fs::read_to_string(path.join(file));
    let mut checks = Vec::new();
    match m.subcommand.as_str() {
        "scaling-study" => {
            let Ok(text) = read("scaling.csv") else {
                let _ = writeln!(summary, "(no scaling.csv; JSON output not summarized)");
                return Ok(checks);
            };
            let cols = read_scaling_csv(&text)?;
            let (kind, c) = m.config.model.as_ref().map_or((ModelKind::Selector, 1.0), |s| (s.kind, s.c));
            let d = m.config.dim().unwrap_or(2);
            if let Some(fit) = fit_power_law(&cols.radius, &cols.mean_s) {
                let _ = writeln!(summary, "fitted alpha (mean S vs R): {:.6}", fit.exponent);
            }
            if let Some(fit) = fit_power_law(&cols.radius, &cols.mean_mass) {
                let _ = writeln!(summary, "fitted mass exponent: {:.6}", fit.exponent);
            }
            checks = scaling_checks(&cols, kind, c, d);
            let lr: Vec<f64> = cols.radius.iter().map(|r| r.ln()).collect();
            let ls: Vec<f64> = cols.mean_s.iter().map(|s| s.ln()).collect();
            let lm: Vec<f64> = cols.mean_mass.iter().map(|s| s.ln()).collect();
            std::fs::write(out_dir.join(format!("{name}.logS.dat")), dat(&lr, &ls))?;
            std::fs::write(out_dir.join(format!("{name}.logMass.dat")), dat(&lr, &lm))?;
            std::fs::write(out_dir.join(format!("{name}.tubeSup.dat")), dat(&cols.radius, &cols.median_tube))?;
        }
        "tail-study" => {
            if let Ok(text) = read("tail.csv") {
                let (_, rows) = parse_csv(&text);
                let parsed: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| r.iter().filter_map(|v| v.parse().ok()).collect())
                    .collect();
                let ok = parsed
                    .iter()
                    .all(|r| r.len() == 4 && (r[3] > 0.5 || r[1] <= r[3] + 3.0 * r[2]));
                checks.push(Check::new("tail dominance", ok, format!("{} thresholds", parsed.len())));
                let xs: Vec<f64> = parsed.iter().map(|r| r[0]).collect();
                let emp: Vec<f64> = parsed.iter().map(|r| r[1]).collect();
                let bnd: Vec<f64> = parsed.iter().map(|r| r[3]).collect();
                std::fs::write(out_dir.join(format!("{name}.empirical.dat")), dat(&xs, &emp))?;
                std::fs::write(out_dir.join(format!("{name}.bound.dat")), dat(&xs, &bnd))?;
            }
        }
        "covering-check" => {
            if let Ok(text) = read("covering.csv") {
                let (_, rows) = parse_csv(&text);
                for r in &rows {
                    let _ = writeln!(summary, "epsilon {} packing {} envelope {}", r[0], r[1], r[3]);
                }
                let eps: Vec<f64> = rows.iter().filter_map(|r| r[0].parse().ok()).collect();
                let lp: Vec<f64> = rows.iter().filter_map(|r| r[2].parse().ok()).collect();
                std::fs::write(out_dir.join(format!("{name}.logPacking.dat")), dat(&eps, &lp))?;
            }
        }
        "maurey-net" => {
            if let Ok(text) = read("maurey.json") {
                let r: super::pipeline::MaureyReport = serde_json::from_str(&text)?;
                checks.push(Check::new(
                    "net coverage",
                    r.audit.covered == r.audit.samples,
                    format!("{}/{} within {}", r.audit.covered, r.audit.samples, r.epsilon),
                ));
                checks.push(Check::new(
                    "net size",
                    r.log_net <= r.envelope,
                    format!("log|net| = {:.4} <= {:.4}", r.log_net, r.envelope),
                ));
            }
        }
        "expected-mt" | "mt-functional" | "tube-sup" | "generate-weight" => {
            for file in ["summary.json", "mt.json", "tube.json"] {
                if let Ok(text) = read(file) {
                    let v: serde_json::Value = serde_json::from_str(&text)?;
                    for key in ["mean", "ci95lo", "ci95hi", "value", "excluded", "flagged"] {
                        if let Some(x) = v.get(key) {
                            let _ = writeln!(summary, "{key}: {x}");
                        }
                    }
                }
            }
        }
        other => {
            let _ = writeln!(summary, "(unrecognized subcommand {other})");
        }
    }
    Ok(checks)
}
