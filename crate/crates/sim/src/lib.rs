//! Simulation harness for adaptive group testing.
//!
//! Episodes draw a hidden infection state, run the adaptive design loop
//! against a simulated noisy assay, and record entropy, AUC and the achieved
//! group infection probabilities. Sweeps repeat episodes over a grid of
//! assumed test parameters and reduce them to plot-ready artifacts.

pub mod artifacts;
pub mod auc;
pub mod episode;
pub mod error;
pub mod seed;
pub mod sweep;

pub use auc::{auc, TieRule};
pub use episode::{
    run_episode, sample_ground_truth, simulate_outcome, EpisodeConfig, EpisodeTrace, GroundTruth,
    StepRecord,
};
pub use error::{Error, Result};
pub use sweep::{run_sweep, standard_grid, CellReport, ParamPair, SweepReport, SweepSpec};
