//! Bracketing solvers for monotone equations. Never derivative based: the inverse scale
//! functions handled here have flat spots, so Newton-type steps are unsafe.

use crate::scalar::{half, Scalar};

/// Solves `f(u) = target` for increasing `f` given `f(lo) <= target <= f(hi)`.
///
/// Illinois (modified regula falsi) steps with a bisection step whenever the bracket fails
/// to halve twice in a row. Stops when the bracket is within a few ulps or `f` hits the
/// target exactly.
pub fn solve_increasing<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    target: T,
    mut lo: T,
    mut hi: T,
) -> T {
    let mut flo = f(lo) - target;
    let mut fhi = f(hi) - target;
    if flo >= T::zero() {
        return lo;
    }
    if fhi <= T::zero() {
        return hi;
    }
    let ulp_tol = T::epsilon() * T::lit(4.0);
    let mut side = 0i8;
    let mut slow = 0u8;
    for _ in 0..400 {
        let width = hi - lo;
        if width <= ulp_tol * (lo.abs().max(hi.abs()) + T::min_positive_value()) {
            break;
        }
        let mut mid = if slow >= 2 {
            slow = 0;
            (lo + hi) * half()
        } else {
            (lo * fhi - hi * flo) / (fhi - flo)
        };
        if !(mid > lo && mid < hi) {
            mid = (lo + hi) * half();
        }
        let fm = f(mid) - target;
        if fm == T::zero() {
            return mid;
        }
        if fm < T::zero() {
            lo = mid;
            flo = fm;
            if side == -1 {
                fhi = fhi * half();
            }
            side = -1;
        } else {
            hi = mid;
            fhi = fm;
            if side == 1 {
                flo = flo * half();
            }
            side = 1;
        }
        if hi - lo > width * half() {
            slow += 1;
        } else {
            slow = 0;
        }
    }
    if -flo <= fhi {
        lo
    } else {
        hi
    }
}

/// Expands a bracket around `guess` for increasing `f` until `f(lo) <= target <= f(hi)`,
/// staying inside `[min, max]`. Returns `None` when the target is out of reach.
pub fn bracket_increasing<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    target: T,
    guess: T,
    step: T,
    min: T,
    max: T,
) -> Option<(T, T)> {
    let two = T::lit(2.0);
    let mut step = step.abs().max(T::epsilon());
    let g = guess.max(min).min(max);
    let fg = f(g);
    if fg == target {
        return Some((g, g));
    }
    if fg < target {
        let mut lo = g;
        for _ in 0..2100 {
            let hi = (lo + step).min(max);
            let fh = f(hi);
            if fh >= target {
                return Some((lo, hi));
            }
            if hi >= max {
                return None;
            }
            lo = hi;
            step = step * two;
        }
        None
    } else {
        let mut hi = g;
        for _ in 0..2100 {
            let lo = (hi - step).max(min);
            let fl = f(lo);
            if fl <= target {
                return Some((lo, hi));
            }
            if lo <= min {
                return None;
            }
            hi = lo;
            step = step * two;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_root() {
        let r = solve_increasing(|x: f64| x * x * x, 2.0, 0.0, 5.0);
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn flat_spot_and_step_like() {
        // flat derivative at the root
        let r = solve_increasing(|x: f64| (x - 1.0).powi(3), 0.0, -3.0, 4.0);
        assert!((r - 1.0).abs() < 1e-5);
        // Hölder-continuous staircase-like function
        let f = |x: f64| x + (x.max(0.0)).powf(0.3);
        let r = solve_increasing(f, 1.5, 0.0, 2.0);
        assert!((f(r) - 1.5).abs() < 1e-13);
    }

    #[test]
    fn bracket_expansion() {
        let (lo, hi) = bracket_increasing(|x: f64| x, 1000.0, 0.0, 1.0, f64::MIN, f64::MAX).unwrap();
        assert!(lo <= 1000.0 && hi >= 1000.0);
        let (lo, hi) = bracket_increasing(|x: f64| x.exp(), 1e-8, 0.0, 1.0, -1e3, 1e3).unwrap();
        assert!(lo.exp() <= 1e-8 && hi.exp() >= 1e-8);
        assert!(bracket_increasing(|x: f64| x.atan(), 2.0, 0.0, 1.0, -1e300, 1e300).is_none());
    }
}
