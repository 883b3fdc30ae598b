//! Scalar abstraction: every numeric kernel in this crate is generic over a
//! floating-point element type. `f64` is the default throughout the library
//! (see the `RealTensor` alias at the crate root); `f32` works too but the
//! tight tolerances used by the self-check suites assume `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Element type of tensors: an IEEE float with the usual operator set.
pub trait Scalar:
    Float + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Shorthand for lossy conversion from an `f64` literal.
    fn c(x: f64) -> Self {
        Self::from(x).expect("f64 literal must convert into the scalar type")
    }
}

impl<T> Scalar for T where
    T: Float + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Modulus floor below which a complex value is treated as the singular
/// point of `arg`: the angle is clamped and no gradient flows.
pub fn eps_arg<T: Scalar>() -> T {
    T::c(1e-12)
}
