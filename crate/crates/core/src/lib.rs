//! Exact Bayesian engine for noisy adaptive group testing.
//!
//! The engine keeps the full posterior over all `2^n` infection states of a
//! small population, designs each pooled test by maximizing the one-test
//! mutual information, stops on conditional entropy, and evaluates the
//! Chebyshev-style sample-complexity bounds for matched and mismatched test
//! models.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the scalar to
//! `f64`, which is what the simulator and the service use.

pub mod bounds;
pub mod design;
pub mod error;
pub mod model;
pub mod posterior;
pub mod scalar;
pub mod transform;

pub use bounds::{
    chebyshev_curve, estimate_nu, minorant_moments, mismatch_alpha, quadratic_minorant,
    sample_complexity, BoundsInput, IterationWindow, DEFAULT_A,
};
pub use design::{
    information_ledger, ledger_stopping_met, optimal_f, predictive_positive, select_group,
    stopping_met, utility, Strategy,
};
pub use error::{Error, Result, MAX_POPULATION};
pub use model::{binary_entropy, group_hit, likelihood, prior_entropy, Group, InfectionState};
pub use scalar::Real;

pub type TestParams = model::TestParams<f64>;
pub type Prior = model::Prior<f64>;
pub type TestRecord = model::TestRecord<f64>;
pub type Posterior = posterior::Posterior<f64>;
pub type DesignTarget = design::DesignTarget<f64>;
pub type Selection = design::Selection<f64>;
pub type StoppingConfig = design::StoppingConfig<f64>;
pub type MinorantMoments = bounds::MinorantMoments<f64>;
pub type GaussianFit = bounds::GaussianFit<f64>;
pub type ComplexityReport = bounds::ComplexityReport<f64>;
