//! Population model: priors, pooled groups, infection states and the noisy
//! test channel.
//!
//! States and groups are `n`-bit masks (bit `i` = individual `i`) packed into
//! a `u32`, which bounds the population at [`MAX_POPULATION`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, MAX_POPULATION};
use crate::scalar::{xlog2x, Real};

/// Binary entropy `h(p)` in bits.
pub fn binary_entropy<T: Real>(p: T) -> Result<T> {
    check_unit("p", p)?;
    Ok(entropy_bits(p))
}

/// Binary entropy without the domain check.
#[inline]
pub(crate) fn entropy_bits<T: Real>(p: T) -> T {
    -(xlog2x(p) + xlog2x(T::one() - p))
}

fn check_unit<T: Real>(name: &'static str, p: T) -> Result<()> {
    if p >= T::zero() && p <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: p.to_f64().unwrap_or(f64::NAN),
            range: "[0, 1]",
        })
    }
}

fn check_population(n: usize) -> Result<()> {
    if (1..=MAX_POPULATION).contains(&n) {
        Ok(())
    } else {
        Err(Error::PopulationSize { n })
    }
}

/// Sensitivity/specificity of a pooled assay, with the derived constants the
/// utility and the bounds are written in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr<T>", into = "ParamsRepr<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct TestParams<T> {
    sensitivity: T,
    specificity: T,
    rho: T,
    gamma: T,
    h_specificity: T,
}

#[derive(Clone, Serialize, Deserialize)]
struct ParamsRepr<T> {
    s: T,
    sigma: T,
}

impl<T: Real> TryFrom<ParamsRepr<T>> for TestParams<T> {
    type Error = Error;

    fn try_from(r: ParamsRepr<T>) -> Result<Self> {
        Self::new(r.s, r.sigma)
    }
}

impl<T: Real> From<TestParams<T>> for ParamsRepr<T> {
    fn from(p: TestParams<T>) -> Self {
        ParamsRepr {
            s: p.sensitivity,
            sigma: p.specificity,
        }
    }
}

impl<T: Real> TestParams<T> {
    /// Builds parameters from sensitivity `s` and specificity `sigma`.
    ///
    /// Both must lie in `(0, 1]` and the test must be informative
    /// (`s + sigma > 1`).
    pub fn new(sensitivity: T, specificity: T) -> Result<Self> {
        for (name, v) in [("sensitivity", sensitivity), ("specificity", specificity)] {
            if !(v > T::zero() && v <= T::one()) {
                return Err(Error::Domain {
                    name,
                    value: v.to_f64().unwrap_or(f64::NAN),
                    range: "(0, 1]",
                });
            }
        }
        let rho = sensitivity + specificity - T::one();
        if rho <= T::zero() {
            return Err(Error::Uninformative {
                rho: rho.to_f64().unwrap_or(f64::NAN),
            });
        }
        let h_s = entropy_bits(sensitivity);
        let h_specificity = entropy_bits(specificity);
        Ok(Self {
            sensitivity,
            specificity,
            rho,
            gamma: h_s - h_specificity,
            h_specificity,
        })
    }

    pub fn sensitivity(&self) -> T {
        self.sensitivity
    }

    pub fn specificity(&self) -> T {
        self.specificity
    }

    /// `s + sigma - 1`.
    pub fn rho(&self) -> T {
        self.rho
    }

    /// `h(s) - h(sigma)` in bits.
    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// `h(sigma)` in bits.
    pub fn h_specificity(&self) -> T {
        self.h_specificity
    }

    /// Probability of observing `positive` given whether the pool contains
    /// an infected individual.
    #[inline]
    pub fn outcome_prob(&self, hit: bool, positive: bool) -> T {
        match (hit, positive) {
            (true, true) => self.sensitivity,
            (true, false) => T::one() - self.sensitivity,
            (false, true) => T::one() - self.specificity,
            (false, false) => self.specificity,
        }
    }
}

/// Independent Bernoulli prior over infection states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Prior<T> {
    q: Vec<T>,
}

impl<T: Real> Prior<T> {
    /// Per-individual infection probabilities. Degenerate `0`/`1` entries are
    /// accepted so that deterministic ground truths can be expressed.
    pub fn new(q: Vec<T>) -> Result<Self> {
        check_population(q.len())?;
        for &p in &q {
            check_unit("q", p)?;
        }
        Ok(Self { q })
    }

    pub fn uniform(n: usize, q: T) -> Result<Self> {
        Self::new(vec![q; n])
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn probs(&self) -> &[T] {
        &self.q
    }

    /// `H(X) = sum_i h(q_i)` in bits.
    pub fn entropy(&self) -> T {
        self.q.iter().map(|&p| entropy_bits(p)).sum()
    }

    /// Prior mass of one state.
    pub fn prob(&self, x: InfectionState) -> T {
        self.q
            .iter()
            .enumerate()
            .map(|(i, &p)| if x.contains(i) { p } else { T::one() - p })
            .fold(T::one(), |acc, v| acc * v)
    }
}

/// Free-function form of [`Prior::entropy`].
pub fn prior_entropy<T: Real>(prior: &Prior<T>) -> T {
    prior.entropy()
}

macro_rules! bitmask_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(u32);

        impl $name {
            pub const fn from_bits(bits: u32) -> Self {
                Self(bits)
            }

            pub const fn bits(self) -> u32 {
                self.0
            }

            pub fn singleton(i: usize) -> Self {
                Self(1 << i)
            }

            /// Builds a mask from member indices, rejecting indices `>= n`.
            pub fn from_indices(indices: &[usize], n: usize) -> Result<Self> {
                check_population(n)?;
                let mut bits = 0u32;
                for &i in indices {
                    if i >= n {
                        return Err(Error::IndexOutOfRange { index: i, n });
                    }
                    bits |= 1 << i;
                }
                Ok(Self(bits))
            }

            pub fn from_flags(flags: &[bool]) -> Result<Self> {
                check_population(flags.len())?;
                Ok(Self(flags.iter().enumerate().fold(0, |acc, (i, &f)| acc | (u32::from(f) << i))))
            }

            pub fn contains(self, i: usize) -> bool {
                self.0 >> i & 1 == 1
            }

            pub fn len(self) -> usize {
                self.0.count_ones() as usize
            }

            pub fn is_empty(self) -> bool {
                self.0 == 0
            }

            pub fn indices(self) -> Vec<usize> {
                (0..32).filter(|&i| self.contains(i)).collect()
            }

            /// True when every set bit lies below `n`.
            pub fn fits(self, n: usize) -> bool {
                n >= 32 || self.0 >> n == 0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:?}", self.indices())
            }
        }
    };
}

bitmask_newtype!(
    /// A pooled test: bit `i` set means individual `i` contributes a sample.
    Group
);
bitmask_newtype!(
    /// A joint infection status: bit `i` set means individual `i` is infected.
    InfectionState
);

impl Group {
    /// `[g, x] = min(1, g^T x)`.
    #[inline]
    pub fn hits(self, x: InfectionState) -> bool {
        self.0 & x.0 != 0
    }
}

/// `[g, x]` on explicit 0/1 vectors.
pub fn group_hit(group: &[bool], x: &[bool]) -> Result<bool> {
    if group.len() != x.len() {
        return Err(Error::Dimension {
            expected: group.len(),
            actual: x.len(),
        });
    }
    Ok(group.iter().zip(x).any(|(&g, &x)| g && x))
}

/// One observed pooled test and the parameters assumed when incorporating it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct TestRecord<T> {
    pub group: Group,
    pub positive: bool,
    pub params: TestParams<T>,
}

impl<T: Real> TestRecord<T> {
    pub fn new(group: Group, positive: bool, params: TestParams<T>) -> Self {
        Self {
            group,
            positive,
            params,
        }
    }

    /// `Pr(Y = y | X = x)` for this single test.
    #[inline]
    pub fn likelihood(&self, x: InfectionState) -> T {
        self.params.outcome_prob(self.group.hits(x), self.positive)
    }
}

/// Likelihood of a batch of results, the product of per-test factors.
pub fn likelihood<T: Real>(records: &[TestRecord<T>], x: InfectionState) -> T {
    records
        .iter()
        .fold(T::one(), |acc, r| acc * r.likelihood(x))
}
