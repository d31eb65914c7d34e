//! Ground-truth simulation of one adaptive testing campaign.
//!
//! Two posteriors evolve side by side: the selection posterior, updated with
//! the parameters the designer assumes, drives group choice; the true
//! posterior, updated with the real test parameters, measures the
//! information actually gained. They coincide when the model is matched.

use gt_core::{
    select_group, stopping_met, utility, Group, InfectionState, Posterior, Prior, StoppingConfig,
    Strategy, TestParams, TestRecord,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auc::{auc, TieRule};
use crate::error::{Error, Result};

/// How the hidden infection state is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// Each individual independently infected with its prior probability.
    SampleFromPrior,
    /// Exactly `k` infected individuals placed uniformly at random.
    FixedInfected { k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub prior: Prior,
    pub true_params: TestParams,
    /// Parameters used for design and for the selection posterior.
    pub assumed_params: TestParams,
    pub stopping: StoppingConfig,
    pub strategy: Strategy,
    pub truth: GroundTruth,
    pub ties: TieRule,
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn matched(&self) -> bool {
        self.assumed_params == self.true_params
    }

    pub fn validate(&self) -> Result<()> {
        if let GroundTruth::FixedInfected { k } = self.truth {
            if k > self.prior.len() {
                return Err(Error::Config(format!(
                    "cannot place {k} infected individuals in a population of {}",
                    self.prior.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn sample_ground_truth<R: Rng + ?Sized>(
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<InfectionState> {
    cfg.validate()?;
    let n = cfg.prior.len();
    let bits = match cfg.truth {
        GroundTruth::SampleFromPrior => cfg
            .prior
            .probs()
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &q)| {
                acc | (u32::from(rng.random_bool(q)) << i)
            }),
        GroundTruth::FixedInfected { k } => {
            sample(rng, n, k).iter().fold(0u32, |acc, i| acc | 1 << i)
        }
    };
    Ok(InfectionState::from_bits(bits))
}

/// Draws a test outcome from the true channel.
pub fn simulate_outcome<R: Rng + ?Sized>(
    group: Group,
    truth: InfectionState,
    params: &TestParams,
    rng: &mut R,
) -> bool {
    rng.random_bool(params.outcome_prob(group.hits(truth), true))
}

/// One row per performed test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub group: Group,
    /// Infection probability of the chosen group under the selection
    /// posterior (before the outcome).
    pub f_selection: f64,
    /// Same group under the true posterior.
    pub f_true: f64,
    /// Information actually gained in expectation, `J(f_true)` with the true
    /// parameters.
    pub info_true: f64,
    pub positive: bool,
    pub entropy_true: f64,
    pub entropy_selection: f64,
    /// Selection-posterior marginals after the update.
    pub marginals: Vec<f64>,
    /// AUC of `marginals` against the truth; absent when undefined.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub truth: InfectionState,
    pub prior_entropy: f64,
    pub steps: Vec<StepRecord>,
    /// Number of tests after which the stopping rule held on the true
    /// posterior; `None` if the budget ran out first.
    pub stopped_at: Option<usize>,
}

impl EpisodeTrace {
    /// True-posterior entropy after `t` tests, carrying the last value
    /// forward once the episode has ended.
    pub fn entropy_at(&self, t: usize) -> f64 {
        match t.min(self.steps.len()) {
            0 => self.prior_entropy,
            k => self.steps[k - 1].entropy_true,
        }
    }

    /// Cumulative `sum J(f_true)` after `t` tests, carried forward.
    pub fn ledger_at(&self, t: usize) -> f64 {
        self.steps.iter().take(t).map(|s| s.info_true).sum()
    }

    /// AUC after `t` tests, carried forward; `None` when undefined.
    pub fn auc_at(&self, t: usize) -> Option<f64> {
        match t.min(self.steps.len()) {
            0 => None,
            k => self.steps[k - 1].auc,
        }
    }

    /// First test count at which the true entropy is at most `threshold`.
    pub fn first_passage(&self, threshold: f64) -> Option<usize> {
        if self.prior_entropy <= threshold {
            return Some(0);
        }
        self.steps
            .iter()
            .position(|s| s.entropy_true <= threshold)
            .map(|i| i + 1)
    }

    pub fn selected_f(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.f_selection).collect()
    }

    pub fn true_f(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.f_true).collect()
    }
}

/// Runs one campaign until the stopping rule holds on the true posterior or
/// the test budget is exhausted.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<EpisodeTrace> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let truth = sample_ground_truth(cfg, &mut rng)?;
    let n = cfg.prior.len();
    let labels: Vec<bool> = (0..n).map(|i| truth.contains(i)).collect();
    let matched = cfg.matched();

    let mut true_post = Posterior::from_prior(&cfg.prior);
    let mut sel_post = true_post.clone();
    let prior_entropy = true_post.entropy();
    let mut steps = Vec::new();
    let mut stopped_at = None;

    for t in 0..=cfg.stopping.max_tests {
        let h = steps
            .last()
            .map_or(prior_entropy, |s: &StepRecord| s.entropy_true);
        if stopping_met(h, &cfg.stopping) {
            stopped_at = Some(t);
            break;
        }
        if t == cfg.stopping.max_tests {
            break;
        }
        let choice = select_group(&sel_post, &cfg.assumed_params, cfg.strategy);
        let f_true = if matched {
            choice.f
        } else {
            true_post.infection_prob(choice.group)?
        };
        let positive = simulate_outcome(choice.group, truth, &cfg.true_params, &mut rng);

        true_post = true_post.update(&TestRecord::new(choice.group, positive, cfg.true_params))?;
        sel_post = if matched {
            true_post.clone()
        } else {
            sel_post.update(&TestRecord::new(choice.group, positive, cfg.assumed_params))?
        };
        let marginals = sel_post.marginals();
        steps.push(StepRecord {
            iteration: t + 1,
            group: choice.group,
            f_selection: choice.f,
            f_true,
            info_true: utility(f_true, &cfg.true_params),
            positive,
            entropy_true: true_post.entropy(),
            entropy_selection: sel_post.entropy(),
            auc: auc(&marginals, &labels, cfg.ties).ok(),
            marginals,
        });
    }

    Ok(EpisodeTrace {
        truth,
        prior_entropy,
        steps,
        stopped_at,
    })
}
