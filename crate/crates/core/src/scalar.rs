//! Element type abstraction: f32 for training, f64 for gradient checking.
//!
//! Every layer and op in the crate is generic over [`Scalar`] so the exact
//! computation graph built in f32 for training can be re-instantiated in f64
//! when comparing analytic gradients against central finite differences.

use std::fmt::{Debug, Display};

pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert a literal constant. Panics only on NaN-free conversion failure,
    /// which cannot happen for f32/f64.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant conversion")
    }

    fn to_f64c(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64c(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64c(self) -> f64 {
        self
    }
}
