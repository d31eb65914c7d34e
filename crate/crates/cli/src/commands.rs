//! `simulate` and `bounds`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use gt_core::{ComplexityReport, TestParams};
use gt_sim::artifacts::{write_artifacts, ArtifactPaths};
use gt_sim::{run_sweep, SweepReport};
use serde::Serialize;

use crate::config::RunConfig;

pub struct SimulateOutcome {
    pub report: SweepReport,
    pub paths: ArtifactPaths,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> anyhow::Result<SimulateOutcome> {
    let spec = cfg.sweep_spec()?;
    tracing::info!(
        cells = spec.grid.len(),
        runs = spec.runs,
        horizon = spec.horizon(),
        "running sweep"
    );
    let report = run_sweep(&spec)?;
    let paths = write_artifacts(&report, out)
        .with_context(|| format!("writing artifacts to {}", out.display()))?;
    Ok(SimulateOutcome { report, paths })
}

/// One line per cell: stop time at `delta`, its bound, and AUC at each
/// checkpoint.
pub fn summary_table(report: &SweepReport, delta: f64) -> String {
    let mut s = String::new();
    let checkpoints: Vec<usize> = report
        .cells
        .first()
        .map(|c| c.auc.iter().map(|a| a.tests).collect())
        .unwrap_or_default();
    let _ = write!(
        s,
        "{:>7} {:>7} {:>8} {:>10} {:>8} {:>8}",
        "sigma'", "s'", "alpha", "stop", "+-sd", "bound"
    );
    for t in &checkpoints {
        let _ = write!(s, " {:>8}", format!("auc@{t}"));
    }
    s.push('\n');
    for c in &report.cells {
        let st = c.stop_times.iter().find(|st| st.delta == delta);
        let fmt_opt =
            |v: Option<f64>, w: usize| v.map_or(format!("{:>w$}", "-"), |v| format!("{v:>w$.3}"));
        let _ = write!(
            s,
            "{:>7} {:>7} {} {} {} {}",
            c.sigma_prime,
            c.s_prime,
            if c.matched {
                format!("{:>8}", "matched")
            } else {
                fmt_opt(c.alpha, 8)
            },
            fmt_opt(st.map(|s| s.mean_tests), 10),
            fmt_opt(st.map(|s| s.std_tests), 8),
            fmt_opt(st.and_then(|s| s.t_e_bound), 8),
        );
        for a in &c.auc {
            let _ = write!(s, " {:>8.4}", a.mean_auc);
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize)]
pub struct BoundsOutput {
    pub prior_entropy_bits: f64,
    pub delta: f64,
    pub threshold_bits: f64,
    pub true_params: TestParams,
    pub assumed_params: Option<TestParams>,
    pub nu_source: String,
    pub report: ComplexityReport,
}

#[derive(serde::Deserialize)]
struct SummaryFit {
    nu: f64,
}

#[derive(serde::Deserialize)]
struct SummaryCell {
    sigma_prime: f64,
    s_prime: f64,
    matched: bool,
    gaussian_fit: Option<SummaryFit>,
}

#[derive(serde::Deserialize)]
struct SummaryFile {
    cells: Vec<SummaryCell>,
}

fn nu_from_summary(path: &Path, assumed: Option<TestParams>) -> anyhow::Result<(f64, Option<f64>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let summary: SummaryFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let nu = summary
        .cells
        .iter()
        .find(|c| c.matched)
        .and_then(|c| c.gaussian_fit.as_ref())
        .map(|f| f.nu)
        .with_context(|| format!("{} has no matched cell with a fit", path.display()))?;
    let nu_prime = assumed.and_then(|p| {
        summary
            .cells
            .iter()
            .find(|c| c.sigma_prime == p.specificity() && c.s_prime == p.sensitivity())
            .and_then(|c| c.gaussian_fit.as_ref())
            .map(|f| f.nu)
    });
    Ok((nu, nu_prime))
}

pub fn bounds(cfg: &RunConfig, base_dir: &Path) -> anyhow::Result<BoundsOutput> {
    let (nu, nu_prime, nu_source) = match (&cfg.nu_from_summary, cfg.nu) {
        (_, Some(nu)) => (nu, cfg.nu_prime, "config".to_string()),
        (Some(p), None) => {
            let p: PathBuf = if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            };
            let (nu, from_file) = nu_from_summary(&p, cfg.assumed_params)?;
            (nu, cfg.nu_prime.or(from_file), p.display().to_string())
        }
        (None, None) => (0.0, cfg.nu_prime, "default (0)".to_string()),
    };
    let input = cfg.bounds_input(nu, nu_prime);
    Ok(BoundsOutput {
        prior_entropy_bits: input.prior_entropy,
        delta: cfg.delta,
        threshold_bits: cfg.delta * input.prior_entropy,
        true_params: cfg.true_params,
        assumed_params: cfg.assumed_params,
        nu_source,
        report: ComplexityReport::build(&input),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> RunConfig {
        let text = format!(
            r#"{{"n": 10, "prior": {{"uniform": 0.1}}, "true_params": {{"s": 0.8, "sigma": 0.8}},
                "delta": 0.6, "max_tests": 20 {extra}}}"#
        );
        let c = RunConfig::parse(&text).unwrap();
        c.validate(Some(&text)).unwrap();
        c
    }

    #[test]
    fn matched_bound_example() {
        let out = bounds(&cfg(r#", "nu": 0"#), Path::new(".")).unwrap();
        assert!((out.report.t_e.unwrap() - 6.7464).abs() < 1e-4);
        assert!(out.report.alpha.is_none());
        assert!(out.report.feasible);
    }

    #[test]
    fn mismatched_bound_example() {
        let out = bounds(
            &cfg(r#", "assumed_params": {"s": 0.9, "sigma": 0.6}"#),
            Path::new("."),
        )
        .unwrap();
        assert!((out.report.alpha.unwrap() - 0.0062).abs() < 5e-4);
    }

    #[test]
    fn infeasible_bound_is_reported_not_raised() {
        let out = bounds(&cfg(r#", "nu": 3.0"#), Path::new(".")).unwrap();
        assert!(!out.report.feasible);
        assert!(out.report.t_e.is_none());
    }
}
