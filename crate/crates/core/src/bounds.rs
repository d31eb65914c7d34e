//! Sample-complexity bounds for the conditional-entropy stopping rule.
//!
//! The per-test information `J(F)` is bounded below by a quadratic
//! `J^(A)` (valid for `A = 4` because `h(u) >= 1 - 4 (u - 1/2)^2`). Modelling
//! the achieved `F` as `N(center, nu^2)` gives closed-form moments of the
//! quadratic, and Chebyshev's inequality turns them into a lower bound on the
//! probability of having stopped after `T` tests.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::design::optimal_f;
use crate::error::{Error, Result};
use crate::model::TestParams;
use crate::scalar::Real;

/// Minorant constant used throughout unless stated otherwise.
pub const DEFAULT_A: f64 = 4.0;

/// `B_A = 2 A (1/2 - sigma) rho + gamma`.
///
/// Substituting `h(u) >= 1 - 4 (u - 1/2)^2` into `J` carries `-gamma x`
/// through unchanged, so `gamma` enters `B_A` with a plus sign. For
/// symmetric tests `gamma = 0` and the sign is immaterial.
pub fn linear_coefficient<T: Real>(params: &TestParams<T>, a: T) -> T {
    let half = T::lit(0.5);
    T::lit(2.0) * a * (half - params.specificity()) * params.rho() + params.gamma()
}

/// `J^(A)(x) = -A rho^2 x^2 - B_A x - A (1/2 - sigma)^2 + 1 - h(sigma)`.
pub fn quadratic_minorant<T: Real>(x: T, params: &TestParams<T>, a: T) -> T {
    let rho2 = params.rho() * params.rho();
    let c = T::lit(0.5) - params.specificity();
    -a * rho2 * x * x - linear_coefficient(params, a) * x - a * c * c + T::one()
        - params.h_specificity()
}

/// Mean and variance of `J^(A)(F)` for `F ~ N(center, nu^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorantMoments<T> {
    pub b_a: T,
    /// `E_F`, bits per test.
    pub expected_info: T,
    /// `V_F`, bits squared.
    pub variance: T,
}

impl<T: Real> MinorantMoments<T> {
    /// A non-positive mean makes every derived bound vacuous.
    pub fn feasible(&self) -> bool {
        self.expected_info > T::zero()
    }
}

pub fn minorant_moments<T: Real>(
    center: T,
    nu: T,
    params: &TestParams<T>,
    a: T,
) -> MinorantMoments<T> {
    let rho2 = params.rho() * params.rho();
    let b_a = linear_coefficient(params, a);
    let nu2 = nu * nu;
    let expected_info = quadratic_minorant(center, params, a) - a * rho2 * nu2;
    let slope = b_a + T::lit(2.0) * a * rho2 * center;
    let variance = T::lit(2.0) * a * a * rho2 * rho2 * nu2 * nu2 + slope * slope * nu2;
    MinorantMoments {
        b_a,
        expected_info,
        variance,
    }
}

/// `T_E = (1 - delta) H(X) / E_F`, real valued.
pub fn sample_complexity<T: Real>(prior_entropy: T, delta: T, expected_info: T) -> Result<T> {
    if expected_info.is_nan() || expected_info <= T::zero() {
        return Err(Error::InfeasibleBound {
            expected_info: expected_info.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((T::one() - delta) * prior_entropy / expected_info)
}

/// Chebyshev lower bound on `Pr(stopped by test t)` for `t >= threshold`:
/// `1 - t V / (t V + ((t - threshold) E)^2)`.
///
/// Pass the matched `T_E` as `threshold` for the matched bound, or
/// `(1 + alpha) T_E` with the mismatched moments for the mismatched one.
pub fn chebyshev_curve<T: Real>(t: T, threshold: T, expected_info: T, variance: T) -> Result<T> {
    if t < threshold {
        return Err(Error::BelowThreshold {
            t: t.to_f64().unwrap_or(f64::NAN),
            threshold: threshold.to_f64().unwrap_or(f64::NAN),
        });
    }
    let gap = (t - threshold) * expected_info;
    let gap2 = gap * gap;
    if gap2 == T::zero() {
        return Ok(T::zero());
    }
    Ok(gap2 / (t * variance + gap2))
}

/// Multiplicative sample-complexity penalty `alpha^(A)` of designing towards
/// `f_prime` instead of `f_star`. Moments use the true parameters, centered
/// at `f_prime` with spread `nu_prime`.
pub fn mismatch_alpha<T: Real>(
    true_params: &TestParams<T>,
    f_prime: T,
    f_star: T,
    nu_prime: T,
    a: T,
) -> Result<T> {
    let moments = minorant_moments(f_prime, nu_prime, true_params, a);
    if !moments.feasible() {
        return Err(Error::InfeasibleBound {
            expected_info: moments.expected_info.to_f64().unwrap_or(f64::NAN),
        });
    }
    let rho2 = true_params.rho() * true_params.rho();
    let b = moments.b_a;
    let at = |f: T| a * rho2 * f * f + b * f;
    Ok((at(f_prime) - at(f_star)) / moments.expected_info)
}

/// Inclusive 1-based iteration range used when fitting the spread of the
/// achieved `f` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct IterationWindow {
    pub first: usize,
    pub last: usize,
}

impl IterationWindow {
    /// Iterations 5 to 15: the first few selections are dominated by the
    /// prior.
    pub const MATCHED: Self = Self { first: 5, last: 15 };
    /// Iterations 3 to 7, used for mismatched runs.
    pub const MISMATCHED: Self = Self { first: 3, last: 7 };

    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first == 0 || last < first {
            return Err(Error::Invalid(format!(
                "bad iteration window {first}..={last}"
            )));
        }
        Ok(Self { first, last })
    }
}

impl Default for IterationWindow {
    fn default() -> Self {
        Self::MATCHED
    }
}

/// Gaussian summary of achieved `f` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianFit<T> {
    pub mean: T,
    pub nu: T,
    pub window: IterationWindow,
    pub samples: usize,
}

/// Pools the `f` values that fall inside `window` across runs (each run is a
/// sequence indexed from iteration 1) and returns their sample mean and
/// standard deviation.
pub fn estimate_nu<T, R>(runs: &[R], window: IterationWindow) -> Result<GaussianFit<T>>
where
    T: Real,
    R: AsRef<[T]>,
{
    let pooled: Vec<T> = runs
        .iter()
        .flat_map(|r| {
            let r = r.as_ref();
            let lo = (window.first - 1).min(r.len());
            let hi = window.last.min(r.len());
            r[lo..hi].iter().copied()
        })
        .collect();
    fit_samples(&pooled, window)
}

fn fit_samples<T: Real>(samples: &[T], window: IterationWindow) -> Result<GaussianFit<T>> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData {
            found: samples.len(),
            needed: 2,
        });
    }
    let count = T::from_count(samples.len());
    if samples.iter().all(|&x| x == samples[0]) {
        return Ok(GaussianFit {
            mean: samples[0],
            nu: T::zero(),
            window,
            samples: samples.len(),
        });
    }
    let mean = samples.iter().copied().sum::<T>() / count;
    let ss: T = samples.iter().map(|&x| (x - mean) * (x - mean)).sum();
    Ok(GaussianFit {
        mean,
        nu: (ss / (count - T::one())).sqrt(),
        window,
        samples: samples.len(),
    })
}

/// Inputs for a full bound report.
#[derive(Debug, Clone, Copy)]
pub struct BoundsInput<T> {
    pub prior_entropy: T,
    pub delta: T,
    pub true_params: TestParams<T>,
    /// Design parameters when they differ from the truth.
    pub assumed_params: Option<TestParams<T>>,
    pub nu: T,
    /// Spread of achieved `f` under the mismatched design; defaults to `nu`.
    pub nu_prime: Option<T>,
    pub a: T,
    /// Largest `T` tabulated in the probability curve.
    pub horizon: usize,
}

/// Matched bound, and the mismatched one when design parameters are given.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport<T> {
    pub a: T,
    pub f_star: T,
    pub f_prime: Option<T>,
    pub nu: T,
    pub b_a: T,
    pub expected_info: T,
    pub variance: T,
    pub feasible: bool,
    pub t_e: Option<T>,
    /// Absent for matched designs.
    pub alpha: Option<T>,
    pub mismatched_expected_info: Option<T>,
    pub mismatched_variance: Option<T>,
    /// `(1 + alpha) T_E`.
    pub mismatched_t_e: Option<T>,
    /// Lower bound on `Pr(H <= delta H(X))` by test count, from
    /// `ceil(threshold)` to the horizon.
    pub probability_curve: BTreeMap<usize, T>,
}

impl<T: Real> ComplexityReport<T> {
    pub fn build(input: &BoundsInput<T>) -> Self {
        let target = optimal_f(&input.true_params);
        let matched = minorant_moments(target.f_star, input.nu, &input.true_params, input.a);
        let t_e = sample_complexity(input.prior_entropy, input.delta, matched.expected_info).ok();

        let mismatched = input
            .assumed_params
            .filter(|p| *p != input.true_params)
            .map(|p| {
                let f_prime = optimal_f(&p).f_star;
                let nu_prime = input.nu_prime.unwrap_or(input.nu);
                let moments = minorant_moments(f_prime, nu_prime, &input.true_params, input.a);
                let alpha = mismatch_alpha(
                    &input.true_params,
                    f_prime,
                    target.f_star,
                    nu_prime,
                    input.a,
                )
                .ok();
                (f_prime, moments, alpha)
            });

        let (threshold, e, v) = match (&mismatched, t_e) {
            (None, Some(t_e)) => (Some(t_e), matched.expected_info, matched.variance),
            (Some((_, m, Some(alpha))), Some(t_e)) if m.feasible() => {
                (Some((T::one() + *alpha) * t_e), m.expected_info, m.variance)
            }
            _ => (None, T::zero(), T::zero()),
        };
        let mut probability_curve = BTreeMap::new();
        if let Some(threshold) = threshold {
            let start = threshold.ceil().to_usize().unwrap_or(usize::MAX).max(1);
            for t in start..=input.horizon {
                if let Ok(p) = chebyshev_curve(T::from_count(t), threshold, e, v) {
                    probability_curve.insert(t, p);
                }
            }
        }

        Self {
            a: input.a,
            f_star: target.f_star,
            f_prime: mismatched.as_ref().map(|m| m.0),
            nu: input.nu,
            b_a: matched.b_a,
            expected_info: matched.expected_info,
            variance: matched.variance,
            feasible: threshold.is_some(),
            t_e,
            alpha: mismatched.as_ref().and_then(|m| m.2),
            mismatched_expected_info: mismatched.as_ref().map(|m| m.1.expected_info),
            mismatched_variance: mismatched.as_ref().map(|m| m.1.variance),
            mismatched_t_e: mismatched
                .as_ref()
                .and_then(|m| m.2)
                .zip(t_e)
                .map(|(alpha, t_e)| (T::one() + alpha) * t_e),
            probability_curve,
        }
    }
}
