use std::fmt;

use crate::num::Scalar;

/// A closed probability interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(lower: T, upper: T) -> Self {
        Self { lower, upper }
    }

    pub fn point(value: T) -> Self {
        Self::new(value.clone(), value)
    }

    /// `[0, 1]`, the trivial bounds.
    pub fn unit() -> Self {
        Self::new(T::zero(), T::one())
    }

    pub fn width(&self) -> T {
        self.upper.clone() - self.lower.clone()
    }

    pub fn midpoint(&self) -> T {
        (self.lower.clone() + self.upper.clone()) / (T::one() + T::one())
    }

    pub fn contains(&self, x: T) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Intersection of `self` with `other`, never wider than `self`.
    ///
    /// When rounding makes the two intervals barely disjoint, both ends meet
    /// at the middle of the gap, clamped into `self`.
    pub fn intersect(&self, other: &Self) -> Self {
        let lower = if other.lower > self.lower { &other.lower } else { &self.lower };
        let upper = if other.upper < self.upper { &other.upper } else { &self.upper };
        if lower <= upper {
            return Self::new(lower.clone(), upper.clone());
        }
        let mut mid = (lower.clone() + upper.clone()) / (T::one() + T::one());
        if mid < self.lower {
            mid = self.lower.clone();
        }
        if mid > self.upper {
            mid = self.upper.clone();
        }
        Self::point(mid)
    }
}

impl<T: fmt::Display> fmt::Display for Bounds<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}
