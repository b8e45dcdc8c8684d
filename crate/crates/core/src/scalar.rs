//! Floating-point scalar abstraction shared by the energy model, the
//! matching solver and the assignment schemes.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for energies, rates and matching weights.
///
/// Implemented for `f32` and `f64`. The crate root exposes `f64` aliases for
/// every generic type, which is what the simulator itself uses.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Absolute tolerance used when deciding whether a reduced cost is zero.
    fn tight_eps() -> Self;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn tight_eps() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn tight_eps() -> Self {
        1e-4
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn approx_eq_rel<T: Scalar>(a: T, b: T, tol: T) -> bool {
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= tol * scale
}
