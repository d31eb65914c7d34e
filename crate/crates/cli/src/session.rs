//! A live campaign: the selection posterior under the assumed parameters and
//! the record of what was actually tested. No ground truth is involved.

use std::fmt;

use gt_core::{
    predictive_positive, select_group, Group, Posterior, Selection, Strategy, TestParams,
    TestRecord,
};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::PriorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub n: usize,
    pub prior: PriorSpec,
    pub assumed_params: TestParams,
    pub delta: f64,
    pub max_tests: usize,
    #[serde(default)]
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionError {
    Stopped,
    Invalid { path: String, message: String },
}

impl SessionError {
    fn invalid(path: &str, message: impl Into<String>) -> Self {
        SessionError::Invalid {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for SessionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionError::Stopped => write!(f, "session has stopped"),
            SessionError::Invalid { path, message } => write!(f, "{path}: {message}"),
        }
    }
}

impl std::error::Error for SessionError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Stopped,
}

/// Test outcome; accepts `true`/`false` or `1`/`0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Outcome(pub bool);

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Outcome;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("true, false, 1 or 0")
            }

            fn visit_bool<E: de::Error>(self, v: bool) -> Result<Outcome, E> {
                Ok(Outcome(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Outcome, E> {
                match v {
                    0 => Ok(Outcome(false)),
                    1 => Ok(Outcome(true)),
                    _ => Err(E::invalid_value(de::Unexpected::Unsigned(v), &self)),
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Outcome, E> {
                u64::try_from(v)
                    .map_err(|_| E::invalid_value(de::Unexpected::Signed(v), &self))
                    .and_then(|v| self.visit_u64(v))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub group: Vec<usize>,
    pub outcome: bool,
    #[serde(rename = "override")]
    pub overridden: bool,
    pub entropy_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub group: Vec<usize>,
    pub f: f64,
    pub utility_bits: f64,
    pub predicted_positive_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultResponse {
    pub entropy_bits: f64,
    pub delta_threshold_bits: f64,
    pub stopped: bool,
    pub tests_performed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateView {
    pub session_id: String,
    pub config: SessionConfig,
    pub marginals: Vec<f64>,
    pub entropy_bits: f64,
    pub prior_entropy_bits: f64,
    pub delta_threshold_bits: f64,
    pub history: Vec<HistoryEntry>,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    config: SessionConfig,
    prior_entropy: f64,
    posterior: Posterior,
    history: Vec<HistoryEntry>,
    status: Status,
    cached: Option<Selection>,
}

impl Session {
    pub fn new(id: String, config: SessionConfig) -> Result<Self, SessionError> {
        if !(0.0..=1.0).contains(&config.delta) {
            return Err(SessionError::invalid(
                "delta",
                format!("must be in [0, 1], got {}", config.delta),
            ));
        }
        if config.max_tests == 0 {
            return Err(SessionError::invalid("max_tests", "must be at least 1"));
        }
        let prior = config.prior.build(config.n).map_err(|m| {
            SessionError::invalid(
                if m.starts_with("population") {
                    "n"
                } else {
                    "prior"
                },
                m,
            )
        })?;
        let posterior = Posterior::from_prior(&prior);
        let mut s = Self {
            id,
            prior_entropy: posterior.entropy(),
            posterior,
            config,
            history: Vec::new(),
            status: Status::Active,
            cached: None,
        };
        s.refresh_status();
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn posterior(&self) -> &Posterior {
        &self.posterior
    }

    pub fn threshold(&self) -> f64 {
        self.config.delta * self.prior_entropy
    }

    fn params(&self) -> TestParams {
        self.config.assumed_params
    }

    fn refresh_status(&mut self) {
        if self.posterior.entropy() <= self.threshold()
            || self.history.len() >= self.config.max_tests
        {
            self.status = Status::Stopped;
        }
    }

    fn selection(&mut self) -> Selection {
        if self.cached.is_none() {
            self.cached = Some(select_group(
                &self.posterior,
                &self.params(),
                self.config.strategy,
            ));
        }
        self.cached.expect("just filled")
    }

    /// The pool to test next; repeated calls return the same answer until a
    /// result is recorded.
    pub fn recommendation(&mut self) -> Result<Recommendation, SessionError> {
        if self.status == Status::Stopped {
            return Err(SessionError::Stopped);
        }
        let sel = self.selection();
        Ok(Recommendation {
            group: sel.group.indices(),
            f: sel.f,
            utility_bits: sel.utility,
            predicted_positive_prob: predictive_positive(sel.f, &self.params()),
        })
    }

    fn parse_group(&self, members: &[usize]) -> Result<Group, SessionError> {
        if members.is_empty() {
            return Err(SessionError::invalid(
                "group",
                "must contain at least one individual",
            ));
        }
        let g = Group::from_indices(members, self.config.n)
            .map_err(|e| SessionError::invalid("group", e.to_string()))?;
        if g.len() != members.len() {
            return Err(SessionError::invalid(
                "group",
                "lists an individual more than once",
            ));
        }
        Ok(g)
    }

    /// Conditions on an observed result. Unless `overridden`, the group must
    /// be the current recommendation.
    pub fn record(
        &mut self,
        members: &[usize],
        outcome: bool,
        overridden: bool,
    ) -> Result<ResultResponse, SessionError> {
        if self.status == Status::Stopped {
            return Err(SessionError::Stopped);
        }
        let group = self.parse_group(members)?;
        if !overridden {
            let rec = self.selection().group;
            if rec != group {
                return Err(SessionError::invalid(
                    "group",
                    format!("{group} is not the current recommendation {rec}; set \"override\": true to record a different pool"),
                ));
            }
        }
        self.apply(group, outcome, overridden)
    }

    /// Re-applies a stored result without checking it against the
    /// recommendation.
    pub fn replay(
        &mut self,
        members: &[usize],
        outcome: bool,
        overridden: bool,
    ) -> Result<ResultResponse, SessionError> {
        let group = self.parse_group(members)?;
        self.apply(group, outcome, overridden)
    }

    fn apply(
        &mut self,
        group: Group,
        outcome: bool,
        overridden: bool,
    ) -> Result<ResultResponse, SessionError> {
        let record = TestRecord::new(group, outcome, self.params());
        self.posterior = self
            .posterior
            .update(&record)
            .map_err(|e| SessionError::invalid("outcome", e.to_string()))?;
        self.cached = None;
        let entropy = self.posterior.entropy();
        self.history.push(HistoryEntry {
            group: group.indices(),
            outcome,
            overridden,
            entropy_bits: entropy,
        });
        self.refresh_status();
        Ok(ResultResponse {
            entropy_bits: entropy,
            delta_threshold_bits: self.threshold(),
            stopped: self.status == Status::Stopped,
            tests_performed: self.history.len(),
        })
    }

    pub fn state(&self) -> StateView {
        StateView {
            session_id: self.id.clone(),
            config: self.config.clone(),
            marginals: self.posterior.marginals(),
            entropy_bits: self.posterior.entropy(),
            prior_entropy_bits: self.prior_entropy,
            delta_threshold_bits: self.threshold(),
            history: self.history.clone(),
            status: self.status,
        }
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }
}
