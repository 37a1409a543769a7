//! Scale functions of the form `s(x) = ∫_0^x exp(-2 ∫_0^y b)`, tabulated on panels.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::quadrature::{integrate, QuadratureOptions};
use crate::scalar::Scalar;

pub type DriftFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OreyError {
    #[error("quadrature tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("table range and panel width must be positive")]
    BadTable,
    #[error("exp(2∫b) overflows near x = {at}: drift integral reaches {value}")]
    Overflow { at: f64, value: f64 },
    #[error("drift is not finite at x = {0}")]
    NonFinite(f64),
}

/// Behaviour of `s` at an infinite end of the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleLimit<T> {
    Finite(T),
    Infinite,
}

/// Panel table for an Orey-type scale. Nodes sit at `k·width`, `|k·width| ≤ range`.
#[derive(Clone)]
pub struct OreyTable<T> {
    b: DriftFn<T>,
    width: T,
    half_count: usize,
    /// `B(x_k)` with `B(y) = ∫_0^y b`.
    drift_integral: Vec<T>,
    /// `S(x_k)` with `S(x) = ∫_0^x exp(-2B)`.
    scale: Vec<T>,
    opts: QuadratureOptions<T>,
    limits: (ScaleLimit<T>, ScaleLimit<T>),
}

impl<T: fmt::Debug> fmt::Debug for OreyTable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OreyTable")
            .field("width", &self.width)
            .field("panels", &(2 * self.half_count))
            .field("limits", &self.limits)
            .finish()
    }
}

impl<T: Scalar> OreyTable<T> {
    pub fn new(b: DriftFn<T>, tol: T, range: T, width: T) -> Result<Self, OreyError> {
        if !(tol > T::zero()) {
            return Err(OreyError::BadTolerance(tol.to_f64_lossy()));
        }
        if !(range > T::zero() && width > T::zero() && range.is_finite()) {
            return Err(OreyError::BadTable);
        }
        let opts = QuadratureOptions::default()
            .with_rel_tol(tol)
            .with_abs_tol(tol * T::lit(1e-4));
        let half_count = (range / width).ceil().to_usize().unwrap_or(1).max(1);
        let n = 2 * half_count + 1;
        let limit = overflow_limit::<T>();
        let mut table = Self {
            b,
            width,
            half_count,
            drift_integral: vec![T::zero(); n],
            scale: vec![T::zero(); n],
            opts,
            limits: (ScaleLimit::Infinite, ScaleLimit::Infinite),
        };
        // fill outward from the origin node
        for dir in [1isize, -1] {
            for step in 1..=half_count {
                let k = (half_count as isize + dir * step as isize) as usize;
                let prev = (k as isize - dir) as usize;
                let (a, c) = (table.node(prev), table.node(k));
                let db = integrate(|y| (table.b)(y), a, c, &table.opts).value;
                if !db.is_finite() {
                    return Err(OreyError::NonFinite(c.to_f64_lossy()));
                }
                let bk = table.drift_integral[prev] + db;
                if (T::lit(2.0) * bk).abs() > limit {
                    return Err(OreyError::Overflow {
                        at: c.to_f64_lossy(),
                        value: bk.to_f64_lossy(),
                    });
                }
                table.drift_integral[k] = bk;
                let ds = table.density_integral(prev, a, c);
                table.scale[k] = table.scale[prev] + ds;
            }
        }
        table.limits = (table.limit(-T::one()), table.limit(T::one()));
        Ok(table)
    }

    fn node(&self, k: usize) -> T {
        T::from_isize(k as isize - self.half_count as isize).unwrap_or_else(T::zero) * self.width
    }

    fn panel(&self, x: T) -> usize {
        let k = (x / self.width).round().to_isize().unwrap_or(0);
        let h = self.half_count as isize;
        (k.clamp(-h, h) + h) as usize
    }

    /// `B(y) = B(x_k) + ∫_{x_k}^y b`.
    fn drift_from(&self, k: usize, y: T) -> T {
        self.drift_integral[k] + integrate(|z| (self.b)(z), self.node(k), y, &self.opts).value
    }

    fn density_integral(&self, k: usize, a: T, c: T) -> T {
        let two = T::lit(2.0);
        integrate(|y| (-two * self.drift_from(k, y)).exp(), a, c, &self.opts).value
    }

    pub fn drift(&self, x: T) -> T {
        (self.b)(x)
    }

    /// `∫_0^x b`.
    pub fn drift_integral(&self, x: T) -> T {
        self.drift_from(self.panel(x), x)
    }

    /// `s(x) = ∫_0^x exp(-2B)`.
    pub fn scale(&self, x: T) -> T {
        let k = self.panel(x);
        self.scale[k] + self.density_integral(k, self.node(k), x)
    }

    /// `s'(x) = exp(-2B(x))`.
    pub fn scale_density(&self, x: T) -> T {
        (-T::lit(2.0) * self.drift_integral(x)).exp()
    }

    pub fn limits(&self) -> (ScaleLimit<T>, ScaleLimit<T>) {
        self.limits
    }

    /// Extends the integral past the table by doubling panels until the increments
    /// either die out or stop shrinking.
    fn limit(&self, dir: T) -> ScaleLimit<T> {
        let two = T::lit(2.0);
        let over = overflow_limit::<T>();
        let end_k = if dir > T::zero() {
            2 * self.half_count
        } else {
            0
        };
        let mut a = self.node(end_k);
        let mut b_at_a = self.drift_integral[end_k];
        let mut s = self.scale[end_k];
        let mut width = self.width * T::from_usize(self.half_count).unwrap_or_else(T::one);
        let mut last_inc: Option<T> = None;
        let mut slow = 0;
        for _ in 0..60 {
            let c = a + dir * width;
            let base = b_at_a;
            let opts = self.opts;
            let inner = |y: T| base + integrate(|z| (self.b)(z), a, y, &opts).value;
            if (-two * inner(c)).abs() > over && -two * inner(c) > T::zero() {
                return ScaleLimit::Infinite;
            }
            let inc = integrate(|y| (-two * inner(y)).exp(), a, c, &opts).value.abs();
            if !inc.is_finite() {
                return ScaleLimit::Infinite;
            }
            s = s + dir * inc;
            if inc <= T::epsilon() * s.abs() {
                return ScaleLimit::Finite(s);
            }
            if let Some(prev) = last_inc {
                if inc >= prev * T::lit(0.9) {
                    slow += 1;
                    if slow >= 2 {
                        return ScaleLimit::Infinite;
                    }
                } else {
                    slow = 0;
                }
            }
            last_inc = Some(inc);
            b_at_a = inner(c);
            a = c;
            width = width * two;
        }
        ScaleLimit::Finite(s)
    }
}

fn overflow_limit<T: Scalar>() -> T {
    T::max_value().ln() * T::lit(0.95)
}
