//! Scalar abstraction shared by the oracles, the mesher and the solvers.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating point scalar the numerical kernels are generic over.
///
/// `f64` is what the command line tool and the acceptance suite instantiate;
/// `f32` is exercised in tests to keep the kernels honest about precision
/// assumptions. Robust geometric predicates always evaluate through `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + 'static
{
    /// Conversion from an `f64` constant. Panics on values a float type
    /// cannot represent at all (never the case for the constants used here).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable")
    }

    /// Lossless-for-f64, widening-for-f32 view used by reporting and by the
    /// robust predicates.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier-compensated summation; keeps long accumulations (triangle areas,
/// stiffness residuals) near machine precision.
pub(crate) fn neumaier_sum<T: Real>(items: impl Iterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for x in items {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}
