//! Mutual-information test design: the one-test utility `J(f)`, its closed
//! form maximizer, group selection and the conditional-entropy stopping rule.
//!
//! For a single pooled test the mutual information between the infection
//! state and the outcome depends on the posterior only through
//! `f = P(group contains an infected individual)`:
//!
//! ```text
//! J(f) = h(rho f + 1 - sigma) - h(sigma) - gamma f
//! ```
//!
//! `J` is concave with a unique maximizer `f*`, so selecting the most
//! informative group amounts to finding the group whose `f` lands closest
//! (in utility) to `f*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{entropy_bits, Group, TestParams};
use crate::posterior::Posterior;
use crate::scalar::Real;

/// One-test mutual information in bits for group infection probability `f`.
pub fn utility<T: Real>(f: T, params: &TestParams<T>) -> T {
    entropy_bits(predictive_positive(f, params)) - params.h_specificity() - params.gamma() * f
}

/// `P(Y = 1) = rho f + 1 - sigma`.
pub fn predictive_positive<T: Real>(f: T, params: &TestParams<T>) -> T {
    let p = params.rho() * f + T::one() - params.specificity();
    // rounding can leave the [1 - sigma, s] band by an ulp
    p.max(T::zero()).min(T::one())
}

/// Utility-maximizing group infection probability for a parameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct DesignTarget<T> {
    pub f_star: T,
    pub params: TestParams<T>,
}

impl<T: Real> DesignTarget<T> {
    pub fn utility(&self) -> T {
        utility(self.f_star, &self.params)
    }
}

/// Closed-form argmax of [`utility`].
///
/// Setting `J'(f) = 0` gives `P(Y = 1) = 1 / (1 + 2^(gamma/rho))`; the
/// exponent base is 2 because `gamma` is measured in bits.
pub fn optimal_f<T: Real>(params: &TestParams<T>) -> DesignTarget<T> {
    let two = T::lit(2.0);
    let k = params.gamma() / params.rho();
    // logistic in base 2, evaluated on the side that cannot overflow
    let u = if k >= T::zero() {
        let e = two.powf(-k);
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + two.powf(k))
    };
    let f = (u - T::one() + params.specificity()) / params.rho();
    let eps = T::epsilon();
    DesignTarget {
        f_star: f.max(eps).min(T::one() - eps),
        params: *params,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Scan all `2^n - 1` non-empty groups.
    #[default]
    Exhaustive,
    /// Forward selection: add the individual that most increases the utility
    /// until no addition helps.
    Greedy,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Strategy::Exhaustive),
            "greedy" => Ok(Strategy::Greedy),
            other => Err(Error::Invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

/// A chosen pool with its infection probability and utility under the
/// posterior it was selected from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct Selection<T> {
    pub group: Group,
    pub f: T,
    pub utility: T,
}

/// Ordering used to pick among candidates: higher utility first, then
/// smaller pools, then smaller encodings. Utilities within
/// [`Real::tie_tolerance`] count as equal.
fn better<T: Real>(cand: &Selection<T>, best: &Selection<T>) -> bool {
    let tol = T::tie_tolerance();
    if cand.utility > best.utility + tol {
        return true;
    }
    if cand.utility + tol < best.utility {
        return false;
    }
    (cand.group.len(), cand.group.bits()) < (best.group.len(), best.group.bits())
}

/// Picks the next group to test.
pub fn select_group<T: Real>(
    posterior: &Posterior<T>,
    params: &TestParams<T>,
    strategy: Strategy,
) -> Selection<T> {
    match strategy {
        Strategy::Exhaustive => select_exhaustive(posterior, params),
        Strategy::Greedy => select_greedy(posterior, params),
    }
}

fn select_exhaustive<T: Real>(posterior: &Posterior<T>, params: &TestParams<T>) -> Selection<T> {
    let probs = posterior.all_infection_probs();
    let mut best: Option<Selection<T>> = None;
    for (g, &f) in probs.iter().enumerate().skip(1) {
        let cand = Selection {
            group: Group::from_bits(g as u32),
            f,
            utility: utility(f, params),
        };
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    best.expect("population has at least one individual")
}

fn select_greedy<T: Real>(posterior: &Posterior<T>, params: &TestParams<T>) -> Selection<T> {
    let n = posterior.population();
    let mut current: Option<Selection<T>> = None;
    loop {
        let base = current.map_or(0, |c| c.group.bits());
        let mut step: Option<Selection<T>> = None;
        for i in (0..n).filter(|i| base >> i & 1 == 0) {
            let group = Group::from_bits(base | 1 << i);
            let f = posterior
                .infection_prob(group)
                .expect("candidate group is non-empty and in range");
            let cand = Selection {
                group,
                f,
                utility: utility(f, params),
            };
            if step.as_ref().is_none_or(|b| better(&cand, b)) {
                step = Some(cand);
            }
        }
        match (step, current) {
            (None, Some(c)) => return c,
            (Some(s), None) => current = Some(s),
            (Some(s), Some(c)) if s.utility > c.utility + T::tie_tolerance() => current = Some(s),
            (_, Some(c)) => return c,
            (None, None) => unreachable!("population has at least one individual"),
        }
    }
}

/// Conditional-entropy stopping rule `H(X | Y_1..Y_t) <= delta H(X)`, with a
/// hard test budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct StoppingConfig<T> {
    pub delta: T,
    pub prior_entropy_bits: T,
    pub max_tests: usize,
}

impl<T: Real> StoppingConfig<T> {
    pub fn new(delta: T, prior_entropy_bits: T, max_tests: usize) -> Result<Self> {
        if !(delta >= T::zero() && delta <= T::one()) {
            return Err(Error::Domain {
                name: "delta",
                value: delta.to_f64().unwrap_or(f64::NAN),
                range: "[0, 1]",
            });
        }
        if max_tests == 0 {
            return Err(Error::Invalid("max_tests must be positive".into()));
        }
        Ok(Self {
            delta,
            prior_entropy_bits,
            max_tests,
        })
    }

    /// `delta * H(X)`.
    pub fn threshold(&self) -> T {
        self.delta * self.prior_entropy_bits
    }
}

pub fn stopping_met<T: Real>(entropy_now: T, cfg: &StoppingConfig<T>) -> bool {
    entropy_now <= cfg.threshold()
}

/// Sum of per-step utilities, the expected-information form of the entropy
/// drop. Compare against `(1 - delta) H(X)`.
pub fn information_ledger<'a, T, I>(steps: I) -> T
where
    T: Real,
    I: IntoIterator<Item = (T, &'a TestParams<T>)>,
{
    steps.into_iter().map(|(f, p)| utility(f, p)).sum()
}

/// Ledger form of the stopping rule: `sum J >= (1 - delta) H(X)`.
pub fn ledger_stopping_met<T: Real>(ledger_bits: T, cfg: &StoppingConfig<T>) -> bool {
    ledger_bits >= (T::one() - cfg.delta) * cfg.prior_entropy_bits
}
