//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar the difficulty, curriculum and model code is generic over.
///
/// `Display` must print the shortest representation that parses back to the
/// same value; the metrics and checkpoint formats depend on it.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    /// Name written into checkpoints.
    const NAME: &'static str;

    fn from_f64_lossy(x: f64) -> Self;

    fn from_count(n: usize) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }

    fn from_count(n: usize) -> Self {
        n as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn from_f64_lossy(x: f64) -> Self {
        x
    }

    fn from_count(n: usize) -> Self {
        n as f64
    }

    fn as_f64(self) -> f64 {
        self
    }
}
