//! Plot-ready outputs of a sweep: a per-iteration entropy CSV and a JSON
//! summary. Both are pure functions of the report, so identical reports give
//! byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gt_core::GaussianFit;
use serde::Serialize;

use crate::error::Result;
use crate::sweep::{AucCheckpoint, StopFraction, SweepReport};

pub const ENTROPY_CSV: &str = "entropy.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Serialize)]
struct EntropyRow {
    sigma_prime: f64,
    s_prime: f64,
    iteration: usize,
    mean_entropy: f64,
    n_runs: usize,
}

/// One row per cell and iteration `1..=horizon`.
pub fn write_entropy_csv<W: Write>(report: &SweepReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for cell in &report.cells {
        for (iteration, &mean_entropy) in cell.mean_entropy.iter().enumerate().skip(1) {
            w.serialize(EntropyRow {
                sigma_prime: cell.sigma_prime,
                s_prime: cell.s_prime,
                iteration,
                mean_entropy,
                n_runs: cell.runs,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct StopTimeRow {
    delta: f64,
    mean_tests: f64,
    std_tests: f64,
    t_e_bound: Option<f64>,
}

#[derive(Serialize)]
struct CellSummary<'a> {
    sigma_prime: f64,
    s_prime: f64,
    matched: bool,
    f_star: f64,
    f_prime: f64,
    alpha: Option<f64>,
    n_runs: usize,
    stop_times: Vec<StopTimeRow>,
    censored_runs: Vec<usize>,
    auc: &'a [AucCheckpoint],
    gaussian_fit: Option<GaussianFit>,
    gaussian_fit_true_posterior: Option<GaussianFit>,
    stop_fraction: &'a [StopFraction],
}

#[derive(Serialize)]
struct Summary<'a> {
    horizon: usize,
    runs: usize,
    prior_entropy: f64,
    cells: Vec<CellSummary<'a>>,
}

pub fn write_summary_json<W: Write>(report: &SweepReport, out: W) -> Result<()> {
    let summary = Summary {
        horizon: report.horizon,
        runs: report.runs,
        prior_entropy: report.prior_entropy,
        cells: report
            .cells
            .iter()
            .map(|c| CellSummary {
                sigma_prime: c.sigma_prime,
                s_prime: c.s_prime,
                matched: c.matched,
                f_star: c.f_star,
                f_prime: c.f_prime,
                alpha: c.alpha,
                n_runs: c.runs,
                stop_times: c
                    .stop_times
                    .iter()
                    .map(|s| StopTimeRow {
                        delta: s.delta,
                        mean_tests: s.mean_tests,
                        std_tests: s.std_tests,
                        t_e_bound: s.t_e_bound,
                    })
                    .collect(),
                censored_runs: c.stop_times.iter().map(|s| s.censored).collect(),
                auc: &c.auc,
                gaussian_fit: c.fit,
                gaussian_fit_true_posterior: c.fit_true,
                stop_fraction: &c.stop_fraction,
            })
            .collect(),
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub entropy_csv: PathBuf,
    pub summary_json: PathBuf,
}

/// Writes both artifacts into `dir`, creating it if needed.
pub fn write_artifacts(report: &SweepReport, dir: &Path) -> Result<ArtifactPaths> {
    fs::create_dir_all(dir)?;
    let paths = ArtifactPaths {
        entropy_csv: dir.join(ENTROPY_CSV),
        summary_json: dir.join(SUMMARY_JSON),
    };
    write_entropy_csv(report, fs::File::create(&paths.entropy_csv)?)?;
    write_summary_json(report, fs::File::create(&paths.summary_json)?)?;
    Ok(paths)
}
