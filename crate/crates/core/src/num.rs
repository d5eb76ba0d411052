//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the scoring, statistics and learning code is generic over.
///
/// Implemented for `f32` and `f64`; the crate root re-exports `f64`
/// instantiations of the public types.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`; used for constants and counts.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Scalar")
    }

    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// The threshold grid `0.0, 0.1, ..., 1.0`, each step computed as `i / 10`.
    fn threshold_grid() -> Vec<Self> {
        (0..=10).map(|i| Self::of_usize(i) / Self::of_usize(10)).collect()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean; zero for an empty slice.
pub(crate) fn mean<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    values.iter().copied().sum::<T>() / T::of_usize(values.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_eleven_points() {
        let grid = f64::threshold_grid();
        assert_eq!(grid.len(), 11);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[5], 0.5);
        assert_eq!(grid[10], 1.0);
        assert_eq!(f32::threshold_grid()[7], 0.7f32);
    }

    #[test]
    fn mean_of_empty_is_zero() {
        assert_eq!(mean::<f64>(&[]), 0.0);
        assert_eq!(mean(&[1.0f64, 2.0, 6.0]), 3.0);
    }
}
