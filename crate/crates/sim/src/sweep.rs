//! Parameter sweeps: many seeded episodes per (sigma', s') cell, reduced to
//! the curves and summaries the experiments report.
//!
//! Every episode in a sweep runs to the full horizon so that entropy curves
//! and late-iteration `f` statistics are available; per-delta stop times are
//! first-passage times read off each trace.

use gt_core::{
    minorant_moments, mismatch_alpha, optimal_f, sample_complexity, BoundsInput, ComplexityReport,
    GaussianFit, IterationWindow, StoppingConfig, TestParams,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{run_episode, EpisodeConfig, EpisodeTrace};
use crate::error::{Error, Result};
use crate::seed::run_seed;

/// One design-parameter cell of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPair {
    pub sigma: f64,
    pub s: f64,
}

impl ParamPair {
    pub fn params(&self) -> Result<TestParams> {
        Ok(TestParams::new(self.s, self.sigma)?)
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Template episode; `assumed_params` is replaced per cell and
    /// `stopping.max_tests` is the horizon.
    pub base: EpisodeConfig,
    pub grid: Vec<ParamPair>,
    pub runs: usize,
    pub deltas: Vec<f64>,
    pub checkpoints: Vec<usize>,
    pub matched_window: IterationWindow,
    pub mismatched_window: IterationWindow,
    /// Minorant constant for the bound columns.
    pub a: f64,
    /// Worker threads; `0` uses the global rayon pool size.
    pub threads: usize,
}

impl SweepSpec {
    pub fn new(base: EpisodeConfig, grid: Vec<ParamPair>, runs: usize) -> Self {
        Self {
            base,
            grid,
            runs,
            deltas: vec![0.8, 0.7, 0.6],
            checkpoints: vec![4, 8],
            matched_window: IterationWindow::MATCHED,
            mismatched_window: IterationWindow::MISMATCHED,
            a: gt_core::DEFAULT_A,
            threads: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.base.stopping.max_tests
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("parameter grid is empty".into()));
        }
        for cell in &self.grid {
            cell.params()?;
        }
        if let Some(d) = self.deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::Config(format!("delta {d} outside [0, 1]")));
        }
        if let Some(c) = self
            .checkpoints
            .iter()
            .find(|&&c| c == 0 || c > self.horizon())
        {
            return Err(Error::Config(format!(
                "checkpoint {c} outside 1..={}",
                self.horizon()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopTimeSummary {
    pub delta: f64,
    pub mean_tests: f64,
    pub std_tests: f64,
    /// Bound-derived test count: `T_E` for the matched cell, `(1 + alpha) T_E`
    /// otherwise, where `T_E` uses the matched cell's fitted spread. Absent
    /// when the bound is infeasible.
    pub t_e_bound: Option<f64>,
    /// Runs that never reached the threshold; they count as `horizon + 1`.
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucCheckpoint {
    pub tests: usize,
    pub mean_auc: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopFraction {
    pub delta: f64,
    /// Entry `t - 1`: fraction of runs whose true entropy reached
    /// `delta H(X)` within `t` tests.
    pub by_test: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub sigma_prime: f64,
    pub s_prime: f64,
    pub matched: bool,
    pub f_star: f64,
    pub f_prime: f64,
    /// Mismatch penalty from the fitted spread; absent for matched cells or
    /// when infeasible.
    pub alpha: Option<f64>,
    pub runs: usize,
    /// Index `t`: mean true-posterior entropy after `t` tests.
    pub mean_entropy: Vec<f64>,
    pub sem_entropy: Vec<f64>,
    /// Index `t`: mean cumulative `sum J(f_true)`.
    pub mean_ledger: Vec<f64>,
    /// Index `t`: standard error of `H(X) - H_t - ledger_t` across runs.
    pub sem_ledger_gap: Vec<f64>,
    pub stop_times: Vec<StopTimeSummary>,
    pub stop_fraction: Vec<StopFraction>,
    pub auc: Vec<AucCheckpoint>,
    /// Spread of `f` under the selection posterior.
    pub fit: Option<GaussianFit>,
    /// Spread of `f` of the same groups under the true posterior.
    pub fit_true: Option<GaussianFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub horizon: usize,
    pub runs: usize,
    pub prior_entropy: f64,
    pub cells: Vec<CellReport>,
}

impl SweepReport {
    pub fn matched_cell(&self) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.matched)
    }
}

/// Runs `spec.runs` episodes for one cell, in run-index order.
pub fn run_cell_traces(spec: &SweepSpec, cell: ParamPair) -> Result<Vec<EpisodeTrace>> {
    let assumed = cell.params()?;
    let horizon = spec.horizon();
    let template = EpisodeConfig {
        assumed_params: assumed,
        // run to the horizon; thresholds are applied afterwards
        stopping: StoppingConfig::new(0.0, spec.base.stopping.prior_entropy_bits, horizon)?,
        ..spec.base.clone()
    };
    let job = |i: usize| {
        let cfg = EpisodeConfig {
            seed: run_seed(spec.base.seed, i as u64),
            ..template.clone()
        };
        run_episode(&cfg)
    };
    if spec.threads == 1 {
        return (0..spec.runs).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    pool.install(|| (0..spec.runs).into_par_iter().map(job).collect())
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    // The matched cell goes first: its fitted spread sets T_E for every
    // mismatched bound.
    let truth = spec.base.true_params;
    let matched_idx = spec
        .grid
        .iter()
        .position(|c| c.params().is_ok_and(|p| p == truth));
    let mut cells: Vec<Option<CellReport>> = vec![None; spec.grid.len()];
    let mut matched_nu = None;
    if let Some(i) = matched_idx {
        let traces = run_cell_traces(spec, spec.grid[i])?;
        let report = summarize_cell(spec, spec.grid[i], &traces, None)?;
        matched_nu = report.fit.map(|f| f.nu);
        cells[i] = Some(report);
    }
    for (i, &cell) in spec.grid.iter().enumerate() {
        if cells[i].is_none() {
            let traces = run_cell_traces(spec, cell)?;
            cells[i] = Some(summarize_cell(spec, cell, &traces, matched_nu)?);
        }
    }
    let cells = cells.into_iter().flatten().collect();
    Ok(SweepReport {
        horizon: spec.horizon(),
        runs: spec.runs,
        prior_entropy: spec.base.prior.entropy(),
        cells,
    })
}

fn mean_sem(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt(), var.sqrt())
}

/// Reduces the traces of one cell. Traces must be in run-index order so the
/// floating-point reduction is reproducible.
pub fn summarize_cell(
    spec: &SweepSpec,
    cell: ParamPair,
    traces: &[EpisodeTrace],
    matched_nu: Option<f64>,
) -> Result<CellReport> {
    let horizon = spec.horizon();
    let truth = spec.base.true_params;
    let assumed = cell.params()?;
    let matched = assumed == truth;
    let h0 = spec.base.prior.entropy();

    let mut mean_entropy = Vec::with_capacity(horizon + 1);
    let mut sem_entropy = Vec::with_capacity(horizon + 1);
    let mut mean_ledger = Vec::with_capacity(horizon + 1);
    let mut sem_ledger_gap = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let (m, se, _) = mean_sem(traces.iter().map(|tr| tr.entropy_at(t)));
        mean_entropy.push(m);
        sem_entropy.push(se);
        let (l, _, _) = mean_sem(traces.iter().map(|tr| tr.ledger_at(t)));
        mean_ledger.push(l);
        let (_, gap_se, _) = mean_sem(
            traces
                .iter()
                .map(|tr| h0 - tr.entropy_at(t) - tr.ledger_at(t)),
        );
        sem_ledger_gap.push(gap_se);
    }

    let window = if matched {
        spec.matched_window
    } else {
        spec.mismatched_window
    };
    let selected: Vec<Vec<f64>> = traces.iter().map(EpisodeTrace::selected_f).collect();
    let true_f: Vec<Vec<f64>> = traces.iter().map(EpisodeTrace::true_f).collect();
    let fit = gt_core::estimate_nu(&selected, window).ok();
    let fit_true = gt_core::estimate_nu(&true_f, window).ok();

    let f_star = optimal_f(&truth).f_star;
    let f_prime = optimal_f(&assumed).f_star;
    let nu = fit.map_or(0.0, |f| f.nu);
    let alpha = if matched {
        None
    } else {
        mismatch_alpha(&truth, f_prime, f_star, nu, spec.a).ok()
    };
    // Mismatched cells take T_E from the matched cell's spread when known,
    // otherwise from the deterministic-design value (spread 0).
    let te_nu = if matched {
        nu
    } else {
        matched_nu.unwrap_or(0.0)
    };
    let matched_moments = minorant_moments(f_star, te_nu, &truth, spec.a);

    let mut stop_times = Vec::new();
    let mut stop_fraction = Vec::new();
    for &delta in &spec.deltas {
        let threshold = delta * h0;
        let passages: Vec<Option<usize>> = traces
            .iter()
            .map(|tr| tr.first_passage(threshold))
            .collect();
        let censored = passages.iter().filter(|p| p.is_none()).count();
        let (mean_tests, _, std_tests) =
            mean_sem(passages.iter().map(|p| p.unwrap_or(horizon + 1) as f64));
        let t_e = sample_complexity(h0, delta, matched_moments.expected_info).ok();
        let t_e_bound = if matched {
            t_e
        } else {
            alpha.zip(t_e).map(|(a, t)| (1.0 + a) * t)
        };
        stop_times.push(StopTimeSummary {
            delta,
            mean_tests,
            std_tests,
            t_e_bound,
            censored,
        });
        let by_test = (1..=horizon)
            .map(|t| {
                passages
                    .iter()
                    .filter(|p| p.is_some_and(|p| p <= t))
                    .count() as f64
                    / traces.len() as f64
            })
            .collect();
        stop_fraction.push(StopFraction { delta, by_test });
    }

    let auc = spec
        .checkpoints
        .iter()
        .map(|&tests| {
            let vals: Vec<f64> = traces.iter().filter_map(|tr| tr.auc_at(tests)).collect();
            AucCheckpoint {
                tests,
                mean_auc: if vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                },
                n_runs: vals.len(),
            }
        })
        .collect();

    Ok(CellReport {
        sigma_prime: cell.sigma,
        s_prime: cell.s,
        matched,
        f_star,
        f_prime,
        alpha,
        runs: traces.len(),
        mean_entropy,
        sem_entropy,
        mean_ledger,
        sem_ledger_gap,
        stop_times,
        stop_fraction,
        auc,
        fit,
        fit_true,
    })
}

/// Bound report for the matched model using the spread fitted on a matched
/// cell.
pub fn matched_bounds(spec: &SweepSpec, cell: &CellReport, delta: f64) -> ComplexityReport {
    ComplexityReport::build(&BoundsInput {
        prior_entropy: spec.base.prior.entropy(),
        delta,
        true_params: spec.base.true_params,
        assumed_params: None,
        nu: cell.fit.map_or(0.0, |f| f.nu),
        nu_prime: None,
        a: spec.a,
        horizon: spec.horizon(),
    })
}

/// The 5 x 5 design grid over `{0.6, 0.7, 0.8, 0.9, 0.99}` for both
/// specificity and sensitivity.
pub fn standard_grid() -> Vec<ParamPair> {
    const LEVELS: [f64; 5] = [0.6, 0.7, 0.8, 0.9, 0.99];
    LEVELS
        .iter()
        .flat_map(|&sigma| LEVELS.iter().map(move |&s| ParamPair { sigma, s }))
        .collect()
}
