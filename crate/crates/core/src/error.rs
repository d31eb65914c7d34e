use thiserror::Error;

/// Largest population the exact posterior is allowed to enumerate.
pub const MAX_POPULATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability {name} = {value} lies outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("uninformative test: sensitivity + specificity - 1 = {rho} must be positive")]
    Uninformative { rho: f64 },
    #[error("population size {n} outside 1..={max}", max = MAX_POPULATION)]
    PopulationSize { n: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("individual index {index} out of range for population of {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("empty group cannot be used as a test")]
    EmptyGroup,
    #[error("observed outcomes have zero probability under the model")]
    InconsistentEvidence,
    #[error("posterior mass does not sum to one (total {total})")]
    NotNormalized { total: f64 },
    #[error("bound infeasible: expected per-test information {expected_info} is not positive")]
    InfeasibleBound { expected_info: f64 },
    #[error("test count {t} is below the threshold {threshold}")]
    BelowThreshold { t: f64, threshold: f64 },
    #[error("insufficient data: {found} samples, need at least {needed}")]
    InsufficientData { found: usize, needed: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
