//! Compensated (Kahan) summation.

use std::iter::Sum;
use std::ops::AddAssign;

/// Running sum with a compensation term for lost low-order bits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    err: f64,
}

impl KahanSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, err: 0.0 }
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.err;
        let t = self.sum + y;
        self.err = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl AddAssign<f64> for KahanSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl Sum<f64> for KahanSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().sum::<KahanSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_summation() {
        let mut values = vec![1.0];
        values.extend(std::iter::repeat_n(1e-16, 10_000));
        let naive: f64 = values.iter().sum();
        let compensated = kahan_sum(values.iter().copied());
        assert_eq!(naive, 1.0);
        assert!((compensated - (1.0 + 1e-12)).abs() < 1e-20);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(kahan_sum(std::iter::empty()), 0.0);
    }
}
