//! Numeric field abstraction shared by the float and exact propagation paths.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_traits::{One, Zero};

use crate::domain::{to_f64, Rational};

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + 'static
{
    /// Largest n for which a full 2^n vector is accepted.
    const MAX_FULL_SITES: usize;
    const NAME: &'static str;

    fn from_rational(q: &Rational) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    const MAX_FULL_SITES: usize = 26;
    const NAME: &'static str = "float";

    fn from_rational(q: &Rational) -> Self {
        to_f64(q)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rational {
    const MAX_FULL_SITES: usize = 16;
    const NAME: &'static str = "rational";

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn to_f64(&self) -> f64 {
        to_f64(self)
    }
}
