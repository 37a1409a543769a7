use std::fmt;

use thiserror::Error;

use crate::scalar::{half, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid interval ({lo}, {hi}): lower end must be strictly below upper end")]
pub struct IntervalError {
    pub lo: f64,
    pub hi: f64,
}

/// Which end of an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Lo,
    Hi,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Lo => f.write_str("lo"),
            Endpoint::Hi => f.write_str("hi"),
        }
    }
}

/// Open interval `(lo, hi)` of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo == T::infinity() || hi == T::neg_infinity()
        {
            return Err(IntervalError {
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn end(&self, end: Endpoint) -> T {
        match end {
            Endpoint::Lo => self.lo,
            Endpoint::Hi => self.hi,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn length(&self) -> T {
        self.hi - self.lo
    }

    /// Open-interval membership.
    pub fn contains(&self, x: T) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn contains_closed(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: T) -> T {
        x.max(self.lo).min(self.hi)
    }

    /// Default anchor point `e`: 0 when the interval contains 0, the midpoint when bounded,
    /// otherwise one unit inside the finite end.
    pub fn default_anchor(&self) -> T {
        if self.contains(T::zero()) {
            T::zero()
        } else if self.is_bounded() {
            (self.lo + self.hi) * half()
        } else if self.lo.is_finite() {
            self.lo + T::one()
        } else {
            self.hi - T::one()
        }
    }
}

impl<T: Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_reversed() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
        assert!(Interval::new(f64::INFINITY, f64::INFINITY).is_err());
        assert!(Interval::new(f64::NEG_INFINITY, 0.0).is_ok());
    }

    #[test]
    fn anchor_rule() {
        assert_eq!(Interval::<f64>::real_line().default_anchor(), 0.0);
        assert_eq!(Interval::new(0.0, 1.0).unwrap().default_anchor(), 0.5);
        assert_eq!(Interval::new(-3.0, 5.0).unwrap().default_anchor(), 0.0);
        assert_eq!(Interval::new(2.0, f64::INFINITY).unwrap().default_anchor(), 3.0);
    }
}
