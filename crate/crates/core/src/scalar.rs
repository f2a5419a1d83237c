//! Scalar abstraction over the floating-point type of the numeric core.
//!
//! All reward, advantage, and policy math is generic over [`Scalar`] so the
//! same code runs in `f32` or `f64`. The CLI and the simulation default to
//! `f64` (see the aliases at the crate root).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used for rewards, advantages, and policy parameters.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into the scalar type.
    fn from_f64_const(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant not representable")
    }

    /// Converts a count into the scalar type.
    fn from_count(count: usize) -> Self {
        Self::from_usize(count).expect("count not representable")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + AddAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
}
