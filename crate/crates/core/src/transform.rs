//! Sum-over-subsets (zeta) transform over the `2^n` state lattice.
//!
//! Only ring operations are required, so the same code runs over floats and
//! over exact rationals.

use std::ops::{Add, Sub};

use num_traits::{One, Zero};

/// In-place subset-sum transform: afterwards `values[s] = sum_{x ⊆ s} old[x]`.
///
/// `values.len()` must be a power of two.
pub fn subset_sums<T>(values: &mut [T])
where
    T: Clone + Add<Output = T>,
{
    let len = values.len();
    assert!(
        len.is_power_of_two(),
        "lattice length must be a power of two"
    );
    let mut half = 1;
    while half < len {
        for block in values.chunks_exact_mut(half * 2) {
            let (lo, hi) = block.split_at_mut(half);
            for (l, h) in lo.iter().zip(hi.iter_mut()) {
                *h = h.clone() + l.clone();
            }
        }
        half <<= 1;
    }
}

/// Probability that each group contains an infected individual, for every
/// group mask at once: `f(g) = 1 - sum_{x ⊆ ¬g} mass(x)`.
pub fn group_infection_probs<T>(mass: &[T]) -> Vec<T>
where
    T: Clone + Zero + One + Add<Output = T> + Sub<Output = T>,
{
    let mut clear = mass.to_vec();
    subset_sums(&mut clear);
    let full = clear.len() - 1;
    let mut out: Vec<T> = (0..clear.len())
        .map(|g| T::one() - clear[full ^ g].clone())
        .collect();
    // The empty pool never contains an infected individual.
    out[0] = T::zero();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_sums_small() {
        let mut v = vec![1, 2, 3, 4];
        subset_sums(&mut v);
        assert_eq!(v, vec![1, 3, 4, 10]);
    }

    #[test]
    fn infection_probs_uniform_two() {
        let f = group_infection_probs(&[0.25_f64; 4]);
        assert_eq!(f, vec![0.0, 0.5, 0.5, 0.75]);
    }
}
