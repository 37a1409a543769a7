//! Scale functions with explicit absolutely continuous and singular parts.
//!
//! Every construction is expressed through a parameter `u` in which both the state
//! `x(u)` and the raw scale value `σ(u)` are explicit. The anchored scale function is
//! `s(x(u)) = σ(u) - σ(u_e)`, its inverse is `t(y) = x(σ^{-1}(y + σ(u_e)))`, and
//!
//! ```text
//! t'∘s = x'/σ',    t''∘s = (x''σ' - x'σ'') / σ'^3
//! ```
//!
//! with `σ'` the absolutely continuous density of `dσ` in `u`. For the fat-Cantor
//! construction `u` is the natural scale itself, which keeps the singular set resolvable
//! to machine precision; on the state line that set is a null set of very small scale.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::cantor::{
    CantorError, CantorSet, Chart, DistanceChart, Extension, GeneralizedCantorSpec, MeasureOp,
    SingularMeasure,
};
use crate::interval::{Interval, IntervalError};
use crate::orey::{OreyError, OreyTable, ScaleLimit};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::root::{bracket_increasing, solve_increasing};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Orey(#[from] OreyError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("point {x} lies outside the domain {domain}")]
    OutsideDomain { x: f64, domain: String },
    #[error("value {y} lies outside the scale range {range}")]
    OutsideRange { y: f64, range: String },
    #[error("skew factors must be positive and finite, got ({0}, {1})")]
    BadSkew(f64, f64),
    #[error("slope must be positive and finite, got {0}")]
    BadSlope(f64),
    #[error("subspace mass {c} lies outside [0, {total}]")]
    SubspaceMass { c: f64, total: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(
        "decomposition audit failed on ({a}, {b}]: increment {increment}, reconstructed {reconstructed}"
    )]
    AuditMismatch {
        a: f64,
        b: f64,
        increment: f64,
        reconstructed: f64,
    },
}

/// Regularity class of `t'` as a function on `J`, read off the construction.
#[derive(Debug, Clone, PartialEq)]
pub enum TPrimeClass<T> {
    Lipschitz,
    AbsolutelyContinuous,
    /// Bounded variation, absolutely continuous apart from the listed jumps.
    Jumps(Vec<TPrimeJump<T>>),
    NotBoundedVariation,
}

impl<T> TPrimeClass<T> {
    pub fn is_bounded_variation(&self) -> bool {
        !matches!(self, TPrimeClass::NotBoundedVariation)
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        matches!(
            self,
            TPrimeClass::Lipschitz | TPrimeClass::AbsolutelyContinuous
        )
    }
}

impl<T: fmt::Display> fmt::Display for TPrimeClass<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TPrimeClass::Lipschitz => f.write_str("lipschitz"),
            TPrimeClass::AbsolutelyContinuous => f.write_str("absolutely continuous"),
            TPrimeClass::Jumps(j) => {
                f.write_str("bounded variation with jumps at")?;
                for jump in j {
                    write!(f, " {}", jump.state)?;
                }
                Ok(())
            }
            TPrimeClass::NotBoundedVariation => f.write_str("not of bounded variation"),
        }
    }
}

/// A jump of `t'` located at the scale image of `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TPrimeJump<T> {
    pub state: T,
    /// `t'(s(state)+) - t'(s(state)-)`.
    pub size: T,
}

/// Identifies the parameterization; scales sharing one can be integrated against each
/// other without changing coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamId {
    Identity,
    Chart(usize),
}

#[derive(Debug, Clone)]
pub(crate) enum ScaleKind<T> {
    Affine {
        slope: T,
    },
    Orey(Arc<OreyTable<T>>),
    /// `u` is the natural scale, `x(u) = ∫ψ`.
    Cantor(DistanceChart<T>),
    /// `σ(u) = u + c(u)` with `c` the Cantor function of the set.
    Staircase(Arc<CantorSet<T>>),
    Skew {
        parent: Arc<ScaleKind<T>>,
        split: T,
        left: T,
        right: T,
    },
    /// Parent with its singular part kept only on `window` (in `u`); `None` drops it.
    Restricted {
        parent: Arc<ScaleKind<T>>,
        window: Option<(T, T)>,
    },
}

/// `(x, x', x'')` at a parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoint<T> {
    pub x: T,
    pub dx: T,
    pub ddx: T,
}

impl<T: Scalar> ScaleKind<T> {
    fn name(&self) -> &'static str {
        match self {
            ScaleKind::Affine { .. } => "affine",
            ScaleKind::Orey(_) => "orey",
            ScaleKind::Cantor(_) => "cantor",
            ScaleKind::Staircase(_) => "staircase",
            ScaleKind::Skew { .. } => "skew",
            ScaleKind::Restricted { .. } => "subspace",
        }
    }

    fn param_id(&self) -> ParamId {
        match self {
            ScaleKind::Cantor(c) => ParamId::Chart(Arc::as_ptr(c.set()) as usize),
            ScaleKind::Skew { parent, .. } | ScaleKind::Restricted { parent, .. } => {
                parent.param_id()
            }
            _ => ParamId::Identity,
        }
    }

    fn state(&self, u: T) -> StatePoint<T> {
        match self {
            ScaleKind::Cantor(c) => {
                let (x, dx, ddx) = c.eval(u);
                StatePoint { x, dx, ddx }
            }
            ScaleKind::Skew { parent, .. } | ScaleKind::Restricted { parent, .. } => {
                parent.state(u)
            }
            _ => StatePoint {
                x: u,
                dx: T::one(),
                ddx: T::zero(),
            },
        }
    }

    fn param_of_state(&self, x: T) -> T {
        match self {
            ScaleKind::Cantor(c) => c.inverse(x),
            ScaleKind::Skew { parent, .. } | ScaleKind::Restricted { parent, .. } => {
                parent.param_of_state(x)
            }
            _ => x,
        }
    }

    fn sigma(&self, u: T) -> T {
        match self {
            ScaleKind::Affine { slope } => *slope * u,
            ScaleKind::Orey(t) => t.scale(u),
            ScaleKind::Cantor(_) => u,
            ScaleKind::Staircase(set) => u + set.cdf(u),
            ScaleKind::Skew {
                parent,
                split,
                left,
                right,
            } => {
                let d = parent.sigma(u) - parent.sigma(*split);
                if u < *split {
                    *left * d
                } else {
                    *right * d
                }
            }
            ScaleKind::Restricted { parent, window } => {
                parent.sigma(u) - parent.singular(u) + restricted_singular(parent, *window, u)
            }
        }
    }

    /// `(σ', σ'')`, the density of the absolutely continuous part of `dσ` and its derivative.
    fn dsigma(&self, u: T) -> (T, T) {
        match self {
            ScaleKind::Affine { slope } => (*slope, T::zero()),
            ScaleKind::Orey(t) => {
                let d = t.scale_density(u);
                (d, -T::lit(2.0) * t.drift(u) * d)
            }
            ScaleKind::Cantor(_) | ScaleKind::Staircase(_) => (T::one(), T::zero()),
            ScaleKind::Skew {
                parent,
                split,
                left,
                right,
            } => {
                let (d1, d2) = parent.dsigma(u);
                let g = if u < *split { *left } else { *right };
                (g * d1, g * d2)
            }
            ScaleKind::Restricted { parent, .. } => parent.dsigma(u),
        }
    }

    /// Cumulative singular part of `dσ` (singular with respect to `dx`), up to a constant.
    fn singular(&self, u: T) -> T {
        match self {
            ScaleKind::Affine { .. } | ScaleKind::Orey(_) => T::zero(),
            ScaleKind::Cantor(c) => c.set().lebesgue_measure() * c.set().cdf(u),
            ScaleKind::Staircase(set) => set.cdf(u),
            ScaleKind::Skew {
                parent,
                split,
                left,
                right,
            } => {
                let d = parent.singular(u) - parent.singular(*split);
                if u < *split {
                    *left * d
                } else {
                    *right * d
                }
            }
            ScaleKind::Restricted { parent, window } => {
                restricted_singular(parent, *window, u)
            }
        }
    }

    /// Cumulative absolutely continuous part of `dσ`, computed by a route independent of
    /// [`ScaleKind::sigma`] wherever one exists. Used by the decomposition audit.
    fn abs_cumulative(&self, u: T, opts: &QuadratureOptions<T>) -> T {
        match self {
            ScaleKind::Affine { slope } => *slope * u,
            ScaleKind::Orey(t) => {
                // fresh nested quadrature from the origin, bypassing the panel table
                let two = T::lit(2.0);
                let b = |z: T| t.drift(z);
                integrate(
                    |y: T| (-two * integrate(b, T::zero(), y, opts).value).exp(),
                    T::zero(),
                    u,
                    opts,
                )
                .value
            }
            ScaleKind::Cantor(c) => {
                let set = c.set();
                if u < set.lo() {
                    u - set.lo()
                } else if u > set.hi() {
                    set.hi() - set.lo() - set.lebesgue_measure() + (u - set.hi())
                } else {
                    set.locate(u).gap_length
                }
            }
            ScaleKind::Staircase(_) => u,
            ScaleKind::Skew {
                parent,
                split,
                left,
                right,
            } => {
                let d = parent.abs_cumulative(u, opts) - parent.abs_cumulative(*split, opts);
                if u < *split {
                    *left * d
                } else {
                    *right * d
                }
            }
            ScaleKind::Restricted { parent, .. } => parent.abs_cumulative(u, opts),
        }
    }

    fn in_support(&self, u: T) -> bool {
        match self {
            ScaleKind::Affine { .. } | ScaleKind::Orey(_) => false,
            ScaleKind::Cantor(c) => c.set().lebesgue_measure() > T::zero() && c.set().in_set(u),
            ScaleKind::Staircase(set) => set.in_set(u),
            ScaleKind::Skew { parent, .. } => parent.in_support(u),
            ScaleKind::Restricted { parent, window } => match window {
                Some((lo, hi)) => u >= *lo && u <= *hi && parent.in_support(u),
                None => false,
            },
        }
    }

    /// Raw `σ` limit at an end of the parameter domain.
    fn sigma_limit(&self, u_end: T, positive: bool) -> ScaleLimit<T> {
        if u_end.is_finite() {
            return ScaleLimit::Finite(self.sigma(u_end));
        }
        match self {
            ScaleKind::Affine { .. } | ScaleKind::Cantor(_) | ScaleKind::Staircase(_) => {
                ScaleLimit::Infinite
            }
            ScaleKind::Orey(t) => {
                if positive {
                    t.limits().1
                } else {
                    t.limits().0
                }
            }
            ScaleKind::Skew {
                parent,
                split,
                left,
                right,
            } => match parent.sigma_limit(u_end, positive) {
                ScaleLimit::Finite(v) => {
                    let g = if positive { *right } else { *left };
                    ScaleLimit::Finite(g * (v - parent.sigma(*split)))
                }
                ScaleLimit::Infinite => ScaleLimit::Infinite,
            },
            ScaleKind::Restricted { parent, window } => {
                match parent.sigma_limit(u_end, positive) {
                    ScaleLimit::Finite(v) => ScaleLimit::Finite(
                        v - parent.singular(u_end)
                            + restricted_singular(parent, *window, u_end),
                    ),
                    ScaleLimit::Infinite => ScaleLimit::Infinite,
                }
            }
        }
    }

    /// Solves `σ(u) = v` inside `u_domain`.
    fn sigma_inverse(&self, v: T, u_domain: &Interval<T>) -> T {
        match self {
            ScaleKind::Affine { slope } => v / *slope,
            ScaleKind::Cantor(_) => v,
            ScaleKind::Staircase(set) => {
                let (lo, hi) = (set.lo(), set.hi());
                if v <= lo {
                    v
                } else if v >= hi + T::one() {
                    v - T::one()
                } else {
                    let a = (v - T::one()).max(lo);
                    let b = v.min(hi);
                    solve_increasing(|u| u + set.cdf(u), v, a, b)
                }
            }
            ScaleKind::Skew {
                parent,
                split,
                left,
                right,
            } => {
                let base = parent.sigma(*split);
                let g = if v < T::zero() { *left } else { *right };
                parent.sigma_inverse(base + v / g, u_domain)
            }
            ScaleKind::Orey(_) | ScaleKind::Restricted { .. } => {
                let guess = match self {
                    ScaleKind::Restricted { parent, .. } => parent.sigma_inverse(v, u_domain),
                    _ => v,
                };
                let guess = if guess.is_finite() { guess } else { T::zero() };
                let f = |u: T| self.sigma(u);
                let min = if u_domain.lo().is_finite() {
                    u_domain.lo()
                } else {
                    -T::max_value()
                };
                let max = if u_domain.hi().is_finite() {
                    u_domain.hi()
                } else {
                    T::max_value()
                };
                match bracket_increasing(f, v, guess, T::one(), min, max) {
                    Some((a, b)) => solve_increasing(|u| self.sigma(u), v, a, b),
                    None => {
                        if self.sigma(guess) < v {
                            max
                        } else {
                            min
                        }
                    }
                }
            }
        }
    }

    fn tprime_class(&self) -> TPrimeClass<T> {
        match self {
            ScaleKind::Affine { .. } | ScaleKind::Cantor(_) => TPrimeClass::Lipschitz,
            ScaleKind::Orey(_) => TPrimeClass::AbsolutelyContinuous,
            ScaleKind::Staircase(_) => TPrimeClass::NotBoundedVariation,
            ScaleKind::Skew { parent, .. } => self.skew_class(parent.tprime_class()),
            ScaleKind::Restricted { parent, window } => {
                if window.is_none() || parent.singular_total() == T::zero() {
                    parent.abs_class()
                } else {
                    parent.tprime_class()
                }
            }
        }
    }

    /// Class of `t'` for the absolutely continuous part of this scale.
    fn abs_class(&self) -> TPrimeClass<T> {
        match self {
            ScaleKind::Staircase(_) => TPrimeClass::Lipschitz,
            ScaleKind::Skew { parent, .. } => self.skew_class(parent.abs_class()),
            ScaleKind::Restricted { parent, .. } => parent.abs_class(),
            other => other.tprime_class(),
        }
    }

    fn skew_class(&self, parent_class: TPrimeClass<T>) -> TPrimeClass<T> {
        let ScaleKind::Skew {
            parent,
            split,
            left,
            right,
        } = self
        else {
            return parent_class;
        };
        if left == right {
            return parent_class;
        }
        let p = parent.state(*split);
        let (ds, _) = parent.dsigma(*split);
        let base = p.dx / ds;
        let size = base / *right - base / *left;
        if size == T::zero() {
            return parent_class;
        }
        let jump = TPrimeJump { state: p.x, size };
        match parent_class {
            TPrimeClass::NotBoundedVariation => TPrimeClass::NotBoundedVariation,
            TPrimeClass::Jumps(mut j) => {
                j.push(jump);
                j.sort_by(|a, b| a.state.partial_cmp(&b.state).unwrap_or(std::cmp::Ordering::Equal));
                TPrimeClass::Jumps(j)
            }
            _ => TPrimeClass::Jumps(vec![jump]),
        }
    }

    fn abs_root(&self) -> &ScaleKind<T> {
        match self {
            ScaleKind::Restricted { parent, .. } => parent.abs_root(),
            other => other,
        }
    }

    /// `t'∘s` when it equals a constant Lebesgue-a.e.
    fn constant_tprime(&self) -> Option<T> {
        match self.abs_root() {
            ScaleKind::Affine { slope } => Some(T::one() / *slope),
            // g = 1 off a null set
            ScaleKind::Staircase(_) => Some(T::one()),
            _ => None,
        }
    }

    /// Whether `x'/σ'` agrees for both kinds at every parameter value.
    fn same_density(&self, other: &ScaleKind<T>) -> bool {
        match (self.abs_root(), other.abs_root()) {
            (ScaleKind::Affine { slope: a }, ScaleKind::Affine { slope: b }) => a == b,
            (ScaleKind::Orey(a), ScaleKind::Orey(b)) => Arc::ptr_eq(a, b),
            (ScaleKind::Cantor(a), ScaleKind::Cantor(b)) => {
                Arc::ptr_eq(a.set(), b.set()) && a.extension() == b.extension()
            }
            (ScaleKind::Staircase(a), ScaleKind::Staircase(b)) => Arc::ptr_eq(a, b),
            (
                ScaleKind::Skew {
                    parent: p1,
                    split: s1,
                    left: l1,
                    right: r1,
                },
                ScaleKind::Skew {
                    parent: p2,
                    split: s2,
                    left: l2,
                    right: r2,
                },
            ) => s1 == s2 && l1 == l2 && r1 == r2 && p1.same_density(p2),
            _ => false,
        }
    }

    fn singular_total(&self) -> T {
        let hi = self.singular(T::infinity());
        let lo = self.singular(T::neg_infinity());
        hi - lo
    }

    fn singular_measure(&self) -> Option<SingularMeasure<T>> {
        match self {
            ScaleKind::Affine { .. } | ScaleKind::Orey(_) => None,
            ScaleKind::Cantor(c) => {
                let lambda = c.set().lebesgue_measure();
                if lambda == T::zero() {
                    return None;
                }
                Some(SingularMeasure::new(
                    c.set().clone(),
                    Chart::Distance(c.clone()),
                    lambda,
                ))
            }
            ScaleKind::Staircase(set) => {
                Some(SingularMeasure::new(set.clone(), Chart::Identity, T::one()))
            }
            ScaleKind::Skew {
                parent,
                split,
                left,
                right,
            } => parent.singular_measure().map(|m| {
                m.with_op(MeasureOp::Skew {
                    split: *split,
                    left: *left,
                    right: *right,
                })
            }),
            ScaleKind::Restricted { parent, window } => match window {
                Some((lo, hi)) => parent
                    .singular_measure()
                    .map(|m| m.with_op(MeasureOp::Window { lo: *lo, hi: *hi })),
                None => None,
            },
        }
    }

    /// Parameter values in `[lo, hi]` where integrands may lose smoothness: ends and
    /// midpoints of construction gaps at least `min_len` long, skew splits, window ends.
    fn param_breaks(&self, lo: T, hi: T, min_len: T, out: &mut Vec<T>) {
        match self {
            ScaleKind::Cantor(c) => {
                let set = c.set();
                out.push(set.lo());
                out.push(set.hi());
                for (a, b) in set.gaps_in(lo, hi, min_len) {
                    out.push(a);
                    out.push((a + b) * T::lit(0.5));
                    out.push(b);
                }
            }
            ScaleKind::Staircase(set) => {
                out.push(set.lo());
                out.push(set.hi());
                for (a, b) in set.gaps_in(lo, hi, min_len) {
                    out.push(a);
                    out.push(b);
                }
            }
            ScaleKind::Skew { parent, split, .. } => {
                parent.param_breaks(lo, hi, min_len, out);
                out.push(*split);
            }
            ScaleKind::Restricted { parent, window } => {
                parent.param_breaks(lo, hi, min_len, out);
                if let Some((a, b)) = window {
                    out.push(*a);
                    out.push(*b);
                }
            }
            _ => {}
        }
    }

    /// Gap endpoints down to `depth` generations, in state coordinates.
    fn structural_points(&self, depth: u32, out: &mut Vec<T>) {
        match self {
            ScaleKind::Cantor(c) => {
                let set = c.set();
                out.push(c.position(set.lo()));
                out.push(c.position(set.hi()));
                for (a, b) in set.gaps(depth) {
                    out.push(c.position(a));
                    out.push(c.position(b));
                }
            }
            ScaleKind::Staircase(set) => {
                out.push(set.lo());
                out.push(set.hi());
                for (a, b) in set.gaps(depth) {
                    out.push(a);
                    out.push(b);
                }
            }
            ScaleKind::Skew { parent, split, .. } => {
                parent.structural_points(depth, out);
                out.push(parent.state(*split).x);
            }
            ScaleKind::Restricted { parent, window } => {
                parent.structural_points(depth, out);
                if let Some((lo, hi)) = window {
                    out.push(parent.state(*lo).x);
                    out.push(parent.state(*hi).x);
                }
            }
            _ => {}
        }
    }
}

fn restricted_singular<T: Scalar>(parent: &ScaleKind<T>, window: Option<(T, T)>, u: T) -> T {
    match window {
        Some((lo, hi)) => parent.singular(u.max(lo).min(hi)),
        None => T::zero(),
    }
}

/// A strictly increasing continuous scale function anchored at `e` with `s(e) = 0`.
#[derive(Debug, Clone)]
pub struct ScaleFunction<T> {
    kind: Arc<ScaleKind<T>>,
    domain: Interval<T>,
    u_domain: Interval<T>,
    anchor: T,
    u_anchor: T,
    sigma_anchor: T,
    singular_anchor: T,
    depth: u32,
    range: Interval<T>,
}

impl<T: Scalar> ScaleFunction<T> {
    fn from_kind(kind: ScaleKind<T>, domain: Interval<T>, anchor: T, depth: u32) -> Self {
        let kind = Arc::new(kind);
        let u_lo = kind.param_of_state(domain.lo());
        let u_hi = kind.param_of_state(domain.hi());
        let u_domain = Interval::new(u_lo, u_hi).unwrap_or(domain);
        let u_anchor = kind.param_of_state(anchor);
        let sigma_anchor = kind.sigma(u_anchor);
        let singular_anchor = kind.singular(u_anchor);
        let lo = match kind.sigma_limit(u_lo, false) {
            ScaleLimit::Finite(v) => v - sigma_anchor,
            ScaleLimit::Infinite => T::neg_infinity(),
        };
        let hi = match kind.sigma_limit(u_hi, true) {
            ScaleLimit::Finite(v) => v - sigma_anchor,
            ScaleLimit::Infinite => T::infinity(),
        };
        let range = Interval::new(lo, hi).unwrap_or_else(|_| Interval::real_line());
        Self {
            kind,
            domain,
            u_domain,
            anchor,
            u_anchor,
            sigma_anchor,
            singular_anchor,
            depth,
            range,
        }
    }

    fn derived(&self, kind: ScaleKind<T>) -> Self {
        Self::from_kind(kind, self.domain, self.anchor, self.depth)
    }

    /// `s(x) = x` on the real line.
    pub fn identity() -> Self {
        Self::from_kind(
            ScaleKind::Affine { slope: T::one() },
            Interval::real_line(),
            T::zero(),
            1,
        )
    }

    /// `s(x) = slope·(x - e)` on `domain`, anchored by the default rule.
    pub fn affine(domain: Interval<T>, slope: T) -> Result<Self, ScaleError> {
        if !(slope > T::zero() && slope.is_finite()) {
            return Err(ScaleError::BadSlope(slope.to_f64_lossy()));
        }
        Ok(Self::from_kind(
            ScaleKind::Affine { slope },
            domain,
            domain.default_anchor(),
            1,
        ))
    }

    pub(crate) fn orey(table: Arc<OreyTable<T>>) -> Self {
        Self::from_kind(ScaleKind::Orey(table), Interval::real_line(), T::zero(), 1)
    }

    pub fn kind_name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn domain(&self) -> Interval<T> {
        self.domain
    }

    /// Domain in the construction parameter.
    pub fn param_domain(&self) -> Interval<T> {
        self.u_domain
    }

    pub fn anchor(&self) -> T {
        self.anchor
    }

    pub fn anchor_param(&self) -> T {
        self.u_anchor
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `J = s(I)`.
    pub fn range(&self) -> Interval<T> {
        self.range
    }

    pub fn param_id(&self) -> ParamId {
        self.kind.param_id()
    }

    pub fn param(&self, x: T) -> T {
        self.kind.param_of_state(x)
    }

    pub fn state(&self, u: T) -> StatePoint<T> {
        self.kind.state(u)
    }

    /// `s` at the state with parameter `u`.
    pub fn at_param(&self, u: T) -> T {
        self.kind.sigma(u) - self.sigma_anchor
    }

    /// A closed-form antiderivative of `at_param`, for the kinds whose parameter is the
    /// state itself and whose `σ` integrates exactly.
    pub fn param_antiderivative(&self, u: T) -> Option<T> {
        let half = T::lit(0.5);
        let base = match &*self.kind {
            ScaleKind::Affine { slope } => *slope * u * u * half,
            ScaleKind::Staircase(set) => u * u * half + set.cdf_integral(u),
            _ => return None,
        };
        Some(base - self.sigma_anchor * u)
    }

    /// `(σ', σ'')` at parameter `u`.
    pub fn param_density(&self, u: T) -> (T, T) {
        self.kind.dsigma(u)
    }

    pub fn eval(&self, x: T) -> T {
        self.at_param(self.param(x))
    }

    pub fn try_eval(&self, x: T) -> Result<T, ScaleError> {
        if !self.domain.contains_closed(x) {
            return Err(ScaleError::OutsideDomain {
                x: x.to_f64_lossy(),
                domain: self.domain.to_string(),
            });
        }
        Ok(self.eval(x))
    }

    /// Parameter `u` with `s(x(u)) = y`.
    pub fn param_of_scale(&self, y: T) -> T {
        self.kind.sigma_inverse(y + self.sigma_anchor, &self.u_domain)
    }

    /// `t'∘s` at parameter `u`; 0 on the singular support.
    pub fn tprime_at_param(&self, u: T) -> T {
        let p = self.kind.state(u);
        if p.dx == T::zero() {
            return T::zero();
        }
        let (ds, _) = self.kind.dsigma(u);
        p.dx / ds
    }

    /// `t''∘s` at parameter `u`.
    pub fn tsecond_at_param(&self, u: T) -> T {
        let p = self.kind.state(u);
        let (d1, d2) = self.kind.dsigma(u);
        (p.ddx * d1 - p.dx * d2) / (d1 * d1 * d1)
    }

    /// `t'∘s(x)`.
    pub fn tprime_of_state(&self, x: T) -> T {
        self.tprime_at_param(self.param(x))
    }

    /// `t''∘s(x)`.
    pub fn tsecond_of_state(&self, x: T) -> T {
        self.tsecond_at_param(self.param(x))
    }

    /// Density `g` of the absolutely continuous part of `ds`; infinite on the singular
    /// support (a Lebesgue-null set of states).
    pub fn density(&self, x: T) -> T {
        let u = self.param(x);
        let p = self.kind.state(u);
        let (ds, _) = self.kind.dsigma(u);
        if p.dx == T::zero() {
            T::infinity()
        } else {
            ds / p.dx
        }
    }

    pub fn in_singular_support(&self, x: T) -> bool {
        self.kind.in_support(self.param(x))
    }

    /// Total mass of the singular part `κ`.
    pub fn singular_mass(&self) -> T {
        self.kind.singular_total()
    }

    /// `κ((e, x])`, negative for `x < e`.
    pub fn singular_cumulative(&self, x: T) -> T {
        self.kind.singular(self.param(x)) - self.singular_anchor
    }

    pub fn singular_measure(&self) -> Option<SingularMeasure<T>> {
        self.kind.singular_measure()
    }

    /// Whether `t'∘s` coincides with that of `other` as a function of the state, decided
    /// from the construction (subspace members share it with their parent).
    pub fn same_tprime(&self, other: &ScaleFunction<T>) -> bool {
        self.domain == other.domain && self.kind.same_density(&other.kind)
    }

    /// `t'∘s` when it is constant Lebesgue-a.e.
    pub fn constant_tprime(&self) -> Option<T> {
        self.kind.constant_tprime()
    }

    pub fn tprime_class(&self) -> TPrimeClass<T> {
        self.kind.tprime_class()
    }

    /// State locations of construction gap endpoints down to `depth` generations, sorted,
    /// deduplicated and restricted to the domain.
    pub fn structural_points(&self, depth: u32) -> Vec<T> {
        let mut out = Vec::new();
        self.kind.structural_points(depth, &mut out);
        out.retain(|x| self.domain.contains(*x));
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out.dedup();
        out
    }

    /// Sorted parameter values strictly inside `(lo, hi)` at which integrands in the
    /// parameter may kink or jump, resolving construction gaps down to `min_len`.
    pub fn param_breakpoints(&self, lo: T, hi: T, min_len: T) -> Vec<T> {
        let mut out = Vec::new();
        self.kind.param_breaks(lo, hi, min_len, &mut out);
        out.retain(|u| *u > lo && *u < hi);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out.dedup();
        out
    }

    pub fn inverse(&self) -> InverseScale<T> {
        InverseScale {
            scale: self.clone(),
            tol: T::epsilon(),
        }
    }

    pub(crate) fn abs_cumulative_param(&self, u: T, opts: &QuadratureOptions<T>) -> T {
        self.kind.abs_cumulative(u, opts)
    }

    pub(crate) fn skewed(&self, x0: T, left: T, right: T) -> Self {
        self.derived(ScaleKind::Skew {
            parent: self.kind.clone(),
            split: self.param(x0),
            left,
            right,
        })
    }

    pub(crate) fn restricted(&self, window: Option<(T, T)>) -> Self {
        self.derived(ScaleKind::Restricted {
            parent: self.kind.clone(),
            window,
        })
    }
}

/// `t = s^{-1}` on `J`.
#[derive(Debug, Clone)]
pub struct InverseScale<T> {
    scale: ScaleFunction<T>,
    tol: T,
}

impl<T: Scalar> InverseScale<T> {
    pub fn range(&self) -> Interval<T> {
        self.scale.range()
    }

    pub fn scale(&self) -> &ScaleFunction<T> {
        &self.scale
    }

    pub fn tolerance(&self) -> T {
        self.tol
    }

    fn check(&self, y: T) -> Result<(), ScaleError> {
        if self.range().contains_closed(y) && y.is_finite() {
            Ok(())
        } else {
            Err(ScaleError::OutsideRange {
                y: y.to_f64_lossy(),
                range: self.range().to_string(),
            })
        }
    }

    pub fn eval(&self, y: T) -> Result<T, ScaleError> {
        self.check(y)?;
        Ok(self.scale.state(self.scale.param_of_scale(y)).x)
    }

    /// `t'(y)`; 0 on the image of the singular support.
    pub fn derivative(&self, y: T) -> Result<T, ScaleError> {
        self.check(y)?;
        Ok(self.scale.tprime_at_param(self.scale.param_of_scale(y)))
    }

    pub fn second_derivative(&self, y: T) -> Result<T, ScaleError> {
        self.check(y)?;
        Ok(self.scale.tsecond_at_param(self.scale.param_of_scale(y)))
    }
}

/// `ds = g·λ + κ`, with an audit that reconstructs increments of `s` through independent
/// routes for the two parts.
#[derive(Debug, Clone)]
pub struct LebesgueDecomposition<T> {
    scale: ScaleFunction<T>,
    kappa: Option<SingularMeasure<T>>,
    opts: QuadratureOptions<T>,
}

/// Outcome of [`LebesgueDecomposition::audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSummary<T> {
    pub probes: usize,
    /// Largest `|Δs - ∫g - Δκ| / (|Δs| + tiny)` seen.
    pub worst_relative: T,
}

impl<T: Scalar> LebesgueDecomposition<T> {
    pub fn g(&self, x: T) -> T {
        self.scale.density(x)
    }

    pub fn kappa(&self) -> Option<&SingularMeasure<T>> {
        self.kappa.as_ref()
    }

    pub fn kappa_mass(&self) -> T {
        self.kappa
            .as_ref()
            .map(|k| k.total_mass())
            .unwrap_or_else(T::zero)
    }

    /// `∫_a^b g dλ`.
    pub fn abs_increment(&self, a: T, b: T) -> T {
        let ua = self.scale.param(a);
        let ub = self.scale.param(b);
        self.scale.abs_cumulative_param(ub, &self.opts) - self.scale.abs_cumulative_param(ua, &self.opts)
    }

    /// `κ((a, b])`.
    pub fn kappa_increment(&self, a: T, b: T) -> T {
        self.kappa
            .as_ref()
            .map(|k| k.mass_between(a, b))
            .unwrap_or_else(T::zero)
    }

    /// Checks `|Δs - ∫g dλ - Δκ| ≤ rel·|Δs| + abs` on every interval.
    pub fn audit(&self, intervals: &[(T, T)], rel: T, abs: T) -> Result<AuditSummary<T>, ScaleError> {
        let mut worst = T::zero();
        for &(a, b) in intervals {
            let ua = self.scale.param(a);
            let ub = self.scale.param(b);
            let increment = self.scale.at_param(ub) - self.scale.at_param(ua);
            let reconstructed = self.scale.abs_cumulative_param(ub, &self.opts)
                - self.scale.abs_cumulative_param(ua, &self.opts)
                + self
                    .kappa
                    .as_ref()
                    .map(|k| k.cumulative_param(ub) - k.cumulative_param(ua))
                    .unwrap_or_else(T::zero);
            let err = (increment - reconstructed).abs();
            worst = worst.max(err / (increment.abs() + T::min_positive_value()));
            if !(err <= rel * increment.abs() + abs) {
                return Err(ScaleError::AuditMismatch {
                    a: a.to_f64_lossy(),
                    b: b.to_f64_lossy(),
                    increment: increment.to_f64_lossy(),
                    reconstructed: reconstructed.to_f64_lossy(),
                });
            }
        }
        Ok(AuditSummary {
            probes: intervals.len(),
            worst_relative: worst,
        })
    }
}

/// Fat-Cantor scale: `t = ∫ψ` with `ψ` the distance to the set (extended outside the base),
/// `s = t^{-1}` on the real line anchored at 0.
pub fn build_cantor_scale<T: Scalar>(
    spec: GeneralizedCantorSpec<T>,
    extension: Extension<T>,
) -> Result<(ScaleFunction<T>, InverseScale<T>), ScaleError> {
    let set = Arc::new(CantorSet::new(spec)?);
    let chart = DistanceChart::new(set, extension)?;
    let s = ScaleFunction::from_kind(
        ScaleKind::Cantor(chart),
        Interval::real_line(),
        T::zero(),
        spec.depth,
    );
    let t = s.inverse();
    Ok((s, t))
}

/// `s(x) = x + c(x)` with `c` the middle-thirds Cantor function.
pub fn build_devils_staircase_scale<T: Scalar>(
    depth: u32,
) -> Result<(ScaleFunction<T>, InverseScale<T>), ScaleError> {
    let set = Arc::new(CantorSet::new(GeneralizedCantorSpec::middle_thirds(depth))?);
    let s = ScaleFunction::from_kind(
        ScaleKind::Staircase(set),
        Interval::real_line(),
        T::zero(),
        depth,
    );
    let t = s.inverse();
    Ok((s, t))
}

/// Accessor for the stored decomposition.
pub fn lebesgue_decompose<T: Scalar>(s: &ScaleFunction<T>) -> LebesgueDecomposition<T> {
    LebesgueDecomposition {
        scale: s.clone(),
        kappa: s.singular_measure(),
        opts: QuadratureOptions::default().with_rel_tol(T::lit(1e-12).max(T::epsilon() * T::lit(100.0))),
    }
}

/// `s̄(x) = ∫_e^x g dλ`.
pub fn abs_cont_part<T: Scalar>(s: &ScaleFunction<T>) -> ScaleFunction<T> {
    if s.singular_mass() == T::zero() {
        return s.clone();
    }
    s.restricted(None)
}

/// Member `s_c` of the subspace family: `g` everywhere plus `κ` restricted to the
/// symmetric window `[e - x_c, e + x_c]` carrying mass `c`.
pub fn subspace_scale<T: Scalar>(s: &ScaleFunction<T>, c: T) -> Result<ScaleFunction<T>, ScaleError> {
    let total = s.singular_mass();
    let slack = T::epsilon() * T::lit(64.0) * (T::one() + total);
    if !(c >= T::zero() && c <= total + slack) {
        return Err(ScaleError::SubspaceMass {
            c: c.to_f64_lossy(),
            total: total.to_f64_lossy(),
        });
    }
    if c >= total - slack {
        return Ok(s.clone());
    }
    if c <= slack {
        return Ok(abs_cont_part(s));
    }
    let (lo, hi) = window_half_width(s, c);
    Ok(s.restricted(Some((lo, hi))))
}

/// Half width `x_c` of the window around the anchor with `κ([e - x_c, e + x_c]) = c`,
/// returned as the window in the construction parameter.
fn window_half_width<T: Scalar>(s: &ScaleFunction<T>, c: T) -> (T, T) {
    let e = s.anchor();
    let dom = s.domain();
    let mass = |r: T| {
        let a = dom.clamp(e - r);
        let b = dom.clamp(e + r);
        s.singular_cumulative(b) - s.singular_cumulative(a)
    };
    let mut lo = T::zero();
    let mut hi = T::one();
    let cap = T::max_value().sqrt();
    while mass(hi) < c && hi < cap {
        lo = hi;
        hi = hi * T::lit(2.0);
    }
    // infimum of {r : κ([e-r, e+r]) ≥ c}
    for _ in 0..400 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) >= c {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let a = s.param(dom.clamp(e - hi));
    let b = s.param(dom.clamp(e + hi));
    (a, b)
}

/// Inverse with a checked tolerance. Inversion is by bracketing or closed form, so the
/// attained accuracy is a few ulps; `tol` is validated and recorded.
pub fn invert<T: Scalar>(s: &ScaleFunction<T>, tol: T) -> Result<InverseScale<T>, ScaleError> {
    if !(tol > T::zero()) {
        return Err(ScaleError::BadTolerance(tol.to_f64_lossy()));
    }
    let mut t = s.inverse();
    t.tol = tol;
    Ok(t)
}
