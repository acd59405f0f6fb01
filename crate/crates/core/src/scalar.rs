use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// Number type used for proof rates, budgets and mean costs.
///
/// Implemented for `f32`, `f64` and exact rationals. Every value the
/// evaluation layer produces is a ratio of two counts, so `from_counts` is the
/// only constructor it needs.
pub trait Scalar:
    Num + Copy + PartialOrd + Display + Debug + FromStr + ToPrimitive + Send + Sync + 'static
{
    /// `num / den`; `den` must be non-zero.
    fn from_counts(num: u64, den: u64) -> Self;

    fn from_count(n: u64) -> Self {
        Self::from_counts(n, 1)
    }

    /// Largest integer not above `self` (used to truncate fractional budgets).
    fn floor_count(self) -> u64 {
        self.to_f64().map(|v| v.floor().max(0.0) as u64).unwrap_or(0)
    }
}

impl Scalar for f64 {
    fn from_counts(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
}

impl Scalar for f32 {
    fn from_counts(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }
}

impl Scalar for Ratio<i64> {
    fn from_counts(num: u64, den: u64) -> Self {
        Ratio::new(num as i64, den as i64)
    }

    fn floor_count(self) -> u64 {
        self.floor().to_integer().max(0) as u64
    }
}

impl Scalar for Ratio<i128> {
    fn from_counts(num: u64, den: u64) -> Self {
        Ratio::new(num as i128, den as i128)
    }

    fn floor_count(self) -> u64 {
        self.floor().to_integer().max(0) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_agree_across_types() {
        assert_eq!(f64::from_counts(1, 4), 0.25);
        assert_eq!(f32::from_counts(3, 4), 0.75);
        assert_eq!(Ratio::<i64>::from_counts(6, 8), Ratio::new(3, 4));
        assert_eq!(Ratio::<i128>::from_counts(323, 100).floor_count(), 3);
        assert_eq!(3.99f64.floor_count(), 3);
    }
}
