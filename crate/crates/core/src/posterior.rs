//! Exact posterior over all `2^n` infection states.

use crate::error::{Error, Result, MAX_POPULATION};
use crate::model::{Group, InfectionState, Prior, TestRecord};
use crate::scalar::Real;
use crate::transform::group_infection_probs;

/// Dense probability mass over infection states, indexed by the state's
/// bit encoding, with a parallel natural-log representation used for
/// updates. Values are immutable; [`Posterior::update`] returns a new one.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    n: usize,
    mass: Vec<T>,
    log_mass: Vec<T>,
}

impl<T: Real> Posterior<T> {
    pub fn from_prior(prior: &Prior<T>) -> Self {
        let n = prior.len();
        let mut log_mass = vec![T::zero(); 1 << n];
        for (i, &q) in prior.probs().iter().enumerate() {
            let (on, off) = (q.ln(), (T::one() - q).ln());
            for (x, l) in log_mass.iter_mut().enumerate() {
                *l = *l + if x >> i & 1 == 1 { on } else { off };
            }
        }
        Self::from_log_unnormalized(n, log_mass).expect("prior has positive total mass")
    }

    /// Uniform mass over all states of `n` individuals.
    pub fn uniform(n: usize) -> Result<Self> {
        check_size(n)?;
        Self::from_log_unnormalized(n, vec![T::zero(); 1 << n])
    }

    /// Builds a posterior from arbitrary non-negative weights, normalizing
    /// them.
    pub fn from_weights(n: usize, weights: Vec<T>) -> Result<Self> {
        check_size(n)?;
        if weights.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                actual: weights.len(),
            });
        }
        if let Some(&w) = weights
            .iter()
            .find(|w| w.is_nan() || **w < T::zero() || w.is_infinite())
        {
            return Err(Error::Domain {
                name: "weight",
                value: w.to_f64().unwrap_or(f64::NAN),
                range: "[0, inf)",
            });
        }
        Self::from_log_unnormalized(n, weights.into_iter().map(|w| w.ln()).collect())
    }

    /// Point mass on one state.
    pub fn point_mass(n: usize, x: InfectionState) -> Result<Self> {
        check_size(n)?;
        if !Group::from_bits(x.bits()).fits(n) {
            return Err(Error::Dimension {
                expected: n,
                actual: 32 - x.bits().leading_zeros() as usize,
            });
        }
        let mut w = vec![T::zero(); 1 << n];
        w[x.bits() as usize] = T::one();
        Self::from_weights(n, w)
    }

    fn from_log_unnormalized(n: usize, mut log_mass: Vec<T>) -> Result<Self> {
        let max = log_mass
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
        if max == T::neg_infinity() || max.is_nan() {
            return Err(Error::InconsistentEvidence);
        }
        let mut mass: Vec<T> = log_mass.iter().map(|&l| (l - max).exp()).collect();
        let total: T = mass.iter().copied().sum();
        let log_total = total.ln();
        for (m, l) in mass.iter_mut().zip(log_mass.iter_mut()) {
            *m = *m / total;
            *l = *l - max - log_total;
        }
        Ok(Self { n, mass, log_mass })
    }

    pub fn population(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn log_mass(&self) -> &[T] {
        &self.log_mass
    }

    pub fn prob(&self, x: InfectionState) -> T {
        self.mass[x.bits() as usize]
    }

    fn check_group(&self, group: Group) -> Result<()> {
        if group.fits(self.n) {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.n,
                actual: 32 - group.bits().leading_zeros() as usize,
            })
        }
    }

    /// Bayes update with one observed test, carried out in the log domain.
    ///
    /// Fails with [`Error::InconsistentEvidence`] when the observation has
    /// zero probability under every state (only reachable with a noiseless
    /// sensitivity or specificity).
    pub fn update(&self, record: &TestRecord<T>) -> Result<Self> {
        self.check_group(record.group)?;
        if record.group.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let g = record.group.bits();
        let ln_hit = record.params.outcome_prob(true, record.positive).ln();
        let ln_miss = record.params.outcome_prob(false, record.positive).ln();
        let log_mass = self
            .log_mass
            .iter()
            .enumerate()
            .map(|(x, &l)| l + if x as u32 & g != 0 { ln_hit } else { ln_miss })
            .collect();
        Self::from_log_unnormalized(self.n, log_mass)
    }

    /// Applies a batch of results; the outcome does not depend on their order.
    pub fn update_all<'a, I>(&self, records: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TestRecord<T>>,
    {
        let mut post = self.clone();
        for r in records {
            post = post.update(r)?;
        }
        Ok(post)
    }

    /// Shannon entropy of the posterior in bits.
    pub fn entropy(&self) -> T {
        let ln2 = T::lit(std::f64::consts::LN_2);
        -self
            .mass
            .iter()
            .zip(&self.log_mass)
            .filter(|(m, _)| **m > T::zero())
            .map(|(&m, &l)| m * l)
            .sum::<T>()
            / ln2
    }

    /// `P(X_i = 1 | data)` for every individual.
    pub fn marginals(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (x, &m) in self.mass.iter().enumerate() {
            let mut bits = x;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                out[i] = out[i] + m;
                bits &= bits - 1;
            }
        }
        out
    }

    /// Probability that `group` contains at least one infected individual.
    pub fn infection_prob(&self, group: Group) -> Result<T> {
        self.check_group(group)?;
        if group.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let g = group.bits() as usize;
        let clear: T = self
            .mass
            .iter()
            .enumerate()
            .filter(|(x, _)| x & g == 0)
            .map(|(_, &m)| m)
            .sum();
        Ok(T::one() - clear)
    }

    /// [`Posterior::infection_prob`] for every group mask (index 0, the empty
    /// group, maps to 0) in `O(n 2^n)`.
    pub fn all_infection_probs(&self) -> Vec<T> {
        group_infection_probs(&self.mass)
    }
}

fn check_size(n: usize) -> Result<()> {
    if (1..=MAX_POPULATION).contains(&n) {
        Ok(())
    } else {
        Err(Error::PopulationSize { n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TestParams;
    use approx::assert_abs_diff_eq;

    fn sum(p: &Posterior<f64>) -> f64 {
        p.mass().iter().sum()
    }

    #[test]
    fn prior_mass_matches_product_form() {
        let prior = Prior::new(vec![0.1, 0.3, 0.7]).unwrap();
        let post = Posterior::from_prior(&prior);
        for x in 0..8 {
            let x = InfectionState::from_bits(x);
            assert_abs_diff_eq!(post.prob(x), prior.prob(x), epsilon = 1e-15);
        }
    }

    #[test]
    fn noiseless_negative_excludes_hits() {
        let prior = Prior::uniform(3, 0.2).unwrap();
        let exact = TestParams::new(1.0, 1.0).unwrap();
        let g = Group::from_bits(0b011);
        let post = Posterior::from_prior(&prior)
            .update(&TestRecord::new(g, false, exact))
            .unwrap();
        for x in 0..8u32 {
            if g.hits(InfectionState::from_bits(x)) {
                assert_eq!(post.mass()[x as usize], 0.0);
            }
        }
        assert_abs_diff_eq!(sum(&post), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_person_update_by_hand() {
        let params = TestParams::new(0.8, 0.8).unwrap();
        let post = Posterior::uniform(2)
            .unwrap()
            .update(&TestRecord::new(Group::singleton(0), true, params))
            .unwrap();
        // index = bits (x1 is bit 0): 00, x1, x2, both
        let expect = [0.1, 0.4, 0.1, 0.4];
        for (m, e) in post.mass().iter().zip(expect) {
            assert_abs_diff_eq!(*m, e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(post.entropy(), 1.721928, epsilon = 1e-6);
        let m = post.marginals();
        assert_abs_diff_eq!(m[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn inconsistent_evidence_is_an_error() {
        let exact = TestParams::new(1.0, 1.0).unwrap();
        let post = Posterior::point_mass(2, InfectionState::from_bits(0)).unwrap();
        let err = post
            .update(&TestRecord::new(Group::singleton(1), true, exact))
            .unwrap_err();
        assert_eq!(err, Error::InconsistentEvidence);
    }

    #[test]
    fn update_rejects_bad_groups() {
        let params = TestParams::new(0.8, 0.8).unwrap();
        let post = Posterior::<f64>::uniform(3).unwrap();
        assert_eq!(
            post.update(&TestRecord::new(Group::from_bits(0), true, params)),
            Err(Error::EmptyGroup)
        );
        assert!(matches!(
            post.update(&TestRecord::new(Group::from_bits(0b1000), true, params)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(
            Posterior::<f64>::uniform(4).unwrap().entropy(),
            4.0,
            epsilon = 1e-12
        );
        let pm = Posterior::<f64>::point_mass(4, InfectionState::from_bits(5)).unwrap();
        assert_eq!(pm.entropy(), 0.0);
        assert_eq!(pm.marginals(), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn untouched_prior_marginals_equal_q() {
        let q = vec![0.1, 0.25, 0.5, 0.9];
        let post = Posterior::from_prior(&Prior::new(q.clone()).unwrap());
        for (m, q) in post.marginals().iter().zip(&q) {
            assert_abs_diff_eq!(m, q, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(
            post.entropy(),
            Prior::new(q).unwrap().entropy(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn infection_prob_examples() {
        let post = Posterior::from_prior(&Prior::uniform(10, 0.1).unwrap());
        let g = Group::from_indices(&[0, 1, 2, 3, 4], 10).unwrap();
        assert_abs_diff_eq!(post.infection_prob(g).unwrap(), 0.409510, epsilon = 1e-6);
        assert_abs_diff_eq!(
            post.infection_prob(g).unwrap(),
            1.0 - 0.9f64.powi(5),
            epsilon = 1e-14
        );
        let full = Group::from_bits((1 << 10) - 1);
        assert_abs_diff_eq!(
            post.infection_prob(full).unwrap(),
            1.0 - post.mass()[0],
            epsilon = 1e-15
        );
        let pm = Posterior::<f64>::point_mass(3, InfectionState::from_bits(0b100)).unwrap();
        assert_eq!(pm.infection_prob(Group::from_bits(0b110)).unwrap(), 1.0);
        assert_eq!(
            pm.infection_prob(Group::from_bits(0)),
            Err(Error::EmptyGroup)
        );
    }

    #[test]
    fn all_infection_probs_independent_closed_form() {
        let q = [0.05, 0.1, 0.2, 0.3, 0.4];
        let post = Posterior::from_prior(&Prior::new(q.to_vec()).unwrap());
        let all = post.all_infection_probs();
        assert_eq!(all[0], 0.0);
        for (g, &f) in all.iter().enumerate().skip(1) {
            let clear: f64 = (0..5)
                .filter(|i| g >> i & 1 == 1)
                .map(|i| 1.0 - q[i])
                .product();
            assert_abs_diff_eq!(f, 1.0 - clear, epsilon = 1e-14);
        }
    }

    #[test]
    fn runs_in_single_precision() {
        let params = TestParams::new(0.8_f32, 0.8).unwrap();
        let post = Posterior::from_prior(&Prior::uniform(6, 0.1_f32).unwrap())
            .update(&TestRecord::new(Group::from_bits(0b111), true, params))
            .unwrap();
        let total: f32 = post.mass().iter().sum();
        assert!((total - 1.0).abs() < 1e-5);
        let wide = Posterior::from_prior(&Prior::uniform(6, 0.1_f64).unwrap())
            .update(&TestRecord::new(
                Group::from_bits(0b111),
                true,
                TestParams::new(0.8, 0.8).unwrap(),
            ))
            .unwrap();
        assert!((f64::from(post.entropy()) - wide.entropy()).abs() < 1e-5);
    }

    #[test]
    fn size_limits() {
        assert_eq!(
            Posterior::<f64>::uniform(21).unwrap_err(),
            Error::PopulationSize { n: 21 }
        );
        assert!(matches!(
            Posterior::<f64>::from_weights(2, vec![1.0; 3]),
            Err(Error::Dimension { .. })
        ));
        assert!(Posterior::<f64>::from_weights(1, vec![1.0, -1.0]).is_err());
    }
}
