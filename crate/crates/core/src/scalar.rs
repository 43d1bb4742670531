//! Scalar abstraction for the numeric kernels (LP, learner updates, simplex helpers).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar usable by the generic kernels: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable")
    }

    /// Absolute tolerance for pivots and zero tests at this precision.
    fn eps() -> Self;
}

impl Scalar for f32 {
    fn eps() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn eps() -> Self {
        1e-12
    }
}

/// Sum of a slice.
pub fn total<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum()
}

/// Uniform vector of length `n`.
pub fn uniform<T: Scalar>(n: usize) -> Vec<T> {
    let w = T::one() / T::from_usize(n).expect("usize representable");
    vec![w; n]
}

/// Rescale a non-negative vector onto the simplex; uniform if it has no mass.
pub fn normalize<T: Scalar>(values: &mut [T]) {
    let sum = total(values);
    if sum > T::zero() && sum.is_finite() {
        values.iter_mut().for_each(|v| *v /= sum);
    } else {
        let u = uniform::<T>(values.len());
        values.copy_from_slice(&u);
    }
}

/// L1 distance between two vectors of equal length.
pub fn l1_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum()
}

/// True when `values` is a probability vector within `tol`.
pub fn is_distribution<T: Scalar>(values: &[T], tol: T) -> bool {
    !values.is_empty()
        && values.iter().all(|v| v.is_finite() && *v >= -tol)
        && (total(values) - T::one()).abs() <= tol
}
