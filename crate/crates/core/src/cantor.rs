//! Generalized Cantor sets with geometric removal and the measures they carry.
//!
//! Generation `n` removes `2^{n-1}` open middle gaps of length `ℓ_n = ℓ_1 ρ^{n-1}`. Every
//! surviving interval of a generation is congruent to the others, which makes the set
//! self-similar enough that all quantities below (Cantor CDF, Lebesgue measure of the set,
//! distance to the set and its integral) are computed by a single descent with exact
//! per-generation sums.

use std::sync::Arc;

use thiserror::Error;

use crate::interval::Interval;
use crate::scalar::{half, Scalar};

const MAX_LEVELS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CantorError {
    #[error("construction depth must be at least 1")]
    ZeroDepth,
    #[error("cantor base must be a bounded interval")]
    UnboundedBase,
    #[error("first gap length must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("gap ratio must lie in (0, 1/2), got {0}")]
    BadRatio(f64),
    #[error("removed intervals have total length {removed} which exceeds the base length {length}")]
    Overlapping { removed: f64, length: f64 },
    #[error("extension cap must be positive, got {0}")]
    BadCap(f64),
}

/// Construction recipe: base interval, geometric gap lengths, truncation depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedCantorSpec<T> {
    pub base: Interval<T>,
    /// Length `ℓ_1` of the single generation-1 gap.
    pub first_gap: T,
    /// Ratio `ℓ_{n+1} / ℓ_n`.
    pub ratio: T,
    pub depth: u32,
}

impl<T: Scalar> GeneralizedCantorSpec<T> {
    pub fn geometric(base: Interval<T>, first_gap: T, ratio: T, depth: u32) -> Self {
        Self {
            base,
            first_gap,
            ratio,
            depth,
        }
    }

    /// `ℓ_n = 4^{-n}` on `[0, 1]`; the resulting set has Lebesgue measure 1/2.
    pub fn quarter(depth: u32) -> Self {
        Self::geometric(
            Interval::new(T::zero(), T::one()).expect("unit interval"),
            T::lit(0.25),
            T::lit(0.25),
            depth,
        )
    }

    /// Classical middle-thirds set on `[0, 1]`.
    pub fn middle_thirds(depth: u32) -> Self {
        Self::geometric(
            Interval::new(T::zero(), T::one()).expect("unit interval"),
            T::one() / T::lit(3.0),
            T::one() / T::lit(3.0),
            depth,
        )
    }

    pub fn gap_length(&self, n: u32) -> T {
        self.first_gap * self.ratio.powi(n as i32 - 1)
    }

    /// Sum of all removed lengths, `ℓ_1 / (1 - 2ρ)`.
    pub fn removed_length(&self) -> T {
        self.first_gap / (T::one() - T::lit(2.0) * self.ratio)
    }

    pub fn validate(&self) -> Result<(), CantorError> {
        if self.depth == 0 {
            return Err(CantorError::ZeroDepth);
        }
        if !self.base.is_bounded() {
            return Err(CantorError::UnboundedBase);
        }
        if !(self.first_gap > T::zero()) {
            return Err(CantorError::NonPositiveGap(self.first_gap.to_f64_lossy()));
        }
        if !(self.ratio > T::zero() && self.ratio < half()) {
            return Err(CantorError::BadRatio(self.ratio.to_f64_lossy()));
        }
        let removed = self.removed_length();
        let length = self.base.length();
        // exact equality is the measure-zero limit (middle thirds); allow rounding slack there
        if removed > length * (T::one() + T::epsilon() * T::lit(16.0)) {
            return Err(CantorError::Overlapping {
                removed: removed.to_f64_lossy(),
                length: length.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// Everything a single descent through the construction learns about a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Locate<T> {
    /// Cantor-measure fraction of `[lo, y]` (mass `2^{-n}` per generation-`n` interval).
    pub cdf: T,
    /// Total length of gaps inside `[lo, y]`.
    pub gap_length: T,
    /// `∫_lo^y d(z, K) dz`.
    pub distance_integral: T,
    /// `d(y, K)`.
    pub distance: T,
    /// Derivative of `d(·, K)`: `+1` in the left half of a gap, `-1` in the right half,
    /// 0 on the set.
    pub slope: T,
    pub in_set: bool,
}

/// A generalized Cantor set with precomputed per-generation tables.
#[derive(Debug, Clone)]
pub struct CantorSet<T> {
    spec: GeneralizedCantorSpec<T>,
    lo: T,
    hi: T,
    /// `ell[n]` = gap length of generation n (index 0 unused).
    ell: Vec<T>,
    /// `r[n]` = length of each surviving interval after generation n.
    r: Vec<T>,
    /// `psi[n]` = integral of the distance function over one generation-n survivor.
    psi: Vec<T>,
    /// `pow2[n]` = `2^{-n}`.
    pow2: Vec<T>,
    lebesgue: T,
    levels: usize,
}

impl<T: Scalar> CantorSet<T> {
    pub fn new(spec: GeneralizedCantorSpec<T>) -> Result<Self, CantorError> {
        spec.validate()?;
        let lo = spec.base.lo();
        let hi = spec.base.hi();
        let length = hi - lo;
        let rho = spec.ratio;
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let psi_factor = four * (T::one() - two * rho * rho);
        let eps = T::epsilon();

        let mut lebesgue = length - spec.removed_length();
        if lebesgue < length * eps * T::lit(16.0) {
            lebesgue = T::zero();
        }
        // closed form avoids the cancellation of r_n = (r_{n-1} - ℓ_n)/2 when λ(K) is small
        let tail = spec.first_gap / (T::one() - two * rho);
        let mut ell = vec![T::zero()];
        let mut r = vec![length];
        let mut pow2 = vec![T::one()];
        let mut psi = vec![spec.first_gap * spec.first_gap / psi_factor];
        let mut n = 0usize;
        loop {
            let done = n >= spec.depth as usize
                && r[n] <= eps * length
                && pow2[n] <= eps
                && psi[n] <= eps * psi[0];
            if done || n >= MAX_LEVELS {
                break;
            }
            n += 1;
            let gap = spec.gap_length(n as u32);
            ell.push(gap);
            pow2.push(pow2[n - 1] * half());
            let next = (lebesgue + tail * (two * rho).powi(n as i32)) * pow2[n];
            r.push(next);
            let following = gap * rho;
            psi.push(following * following / psi_factor);
        }
        Ok(Self {
            spec,
            lo,
            hi,
            ell,
            r,
            psi,
            pow2,
            lebesgue,
            levels: n,
        })
    }

    pub fn spec(&self) -> &GeneralizedCantorSpec<T> {
        &self.spec
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    /// Lebesgue measure of the limiting set.
    pub fn lebesgue_measure(&self) -> T {
        self.lebesgue
    }

    /// Integral of `d(·, K)` over the whole base.
    pub fn total_distance_integral(&self) -> T {
        self.psi[0]
    }

    /// Number of generations the evaluations descend through.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn locate(&self, y: T) -> Locate<T> {
        if y <= self.lo {
            return Locate {
                cdf: T::zero(),
                gap_length: T::zero(),
                distance_integral: T::zero(),
                distance: T::zero(),
                slope: T::zero(),
                in_set: y == self.lo,
            };
        }
        if y >= self.hi {
            return Locate {
                cdf: T::one(),
                gap_length: self.hi - self.lo - self.lebesgue,
                distance_integral: self.psi[0],
                distance: T::zero(),
                slope: T::zero(),
                in_set: y == self.hi,
            };
        }
        let quarter = T::lit(0.25);
        let mut a = self.lo;
        let mut cdf = T::zero();
        let mut gaps = T::zero();
        let mut integral = T::zero();
        for n in 1..=self.levels {
            let gap = self.ell[n];
            let left_end = a + self.r[n];
            let right_start = left_end + gap;
            if y <= left_end {
                continue;
            }
            cdf = cdf + self.pow2[n];
            integral = integral + self.psi[n];
            // gaps nested inside the skipped left survivor
            gaps = gaps + (self.r[n] - self.lebesgue * self.pow2[n]).max(T::zero());
            if y < right_start {
                let d = y - left_end;
                let (partial, distance, slope) = tent(d, gap);
                return Locate {
                    cdf,
                    gap_length: gaps + d,
                    distance_integral: integral + partial,
                    distance,
                    slope,
                    in_set: false,
                };
            }
            gaps = gaps + gap;
            integral = integral + gap * gap * quarter;
            a = right_start;
        }
        let last = self.levels;
        let frac = if self.r[last] > T::zero() {
            ((y - a) / self.r[last]).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        Locate {
            cdf: cdf + self.pow2[last] * frac,
            gap_length: gaps + (self.r[last] - self.lebesgue * self.pow2[last]).max(T::zero()) * frac,
            distance_integral: integral + self.psi[last] * frac,
            distance: T::zero(),
            slope: T::zero(),
            in_set: true,
        }
    }

    /// Cantor-measure fraction of `[lo, y]`.
    pub fn cdf(&self, y: T) -> T {
        self.locate(y).cdf
    }

    /// `∫_lo^y cdf`, exact: `(y - lo)·cdf(y)` minus the first moment of the Cantor
    /// measure on `[lo, y]`. Every survivor carries a measure symmetric about its midpoint.
    pub fn cdf_integral(&self, y: T) -> T {
        let half = T::lit(0.5);
        if y <= self.lo {
            return T::zero();
        }
        if y >= self.hi {
            return y - self.lo - (self.hi - self.lo) * half;
        }
        let mut a = self.lo;
        let mut cdf = T::zero();
        let mut moment = T::zero();
        for n in 1..=self.levels {
            let left_end = a + self.r[n];
            if y <= left_end {
                continue;
            }
            cdf = cdf + self.pow2[n];
            moment = moment + self.pow2[n] * (a + self.r[n] * half - self.lo);
            let right_start = left_end + self.ell[n];
            if y < right_start {
                return (y - self.lo) * cdf - moment;
            }
            a = right_start;
        }
        let last = self.levels;
        let d = (y - a).max(T::zero()).min(self.r[last]);
        if self.r[last] > T::zero() {
            let mass = self.pow2[last] * d / self.r[last];
            cdf = cdf + mass;
            moment = moment + mass * (a + d * half - self.lo);
        }
        (y - self.lo) * cdf - moment
    }

    /// Lebesgue measure of `K ∩ [lo, y]`.
    pub fn lebesgue_up_to(&self, y: T) -> T {
        let c = y.max(self.lo).min(self.hi);
        (c - self.lo - self.locate(c).gap_length).max(T::zero())
    }

    /// `d(y, K)` for `y` inside the base.
    pub fn distance(&self, y: T) -> T {
        self.locate(y).distance
    }

    pub fn in_set(&self, y: T) -> bool {
        y >= self.lo && y <= self.hi && self.locate(y).in_set
    }

    /// Inverse of `y ↦ ∫_lo^y d(z, K) dz` on `[0, total_distance_integral]`.
    pub fn invert_distance_integral(&self, x: T) -> T {
        if x <= T::zero() {
            return self.lo;
        }
        if x >= self.psi[0] {
            return self.hi;
        }
        let quarter = T::lit(0.25);
        let two = T::lit(2.0);
        let mut a = self.lo;
        let mut xa = T::zero();
        for n in 1..=self.levels {
            let gap = self.ell[n];
            let survivor = self.psi[n];
            let gap_x = gap * gap * quarter;
            if x <= xa + survivor {
                continue;
            }
            if x < xa + survivor + gap_x {
                let w = x - xa - survivor;
                let d = if w <= gap_x * half() {
                    (two * w).sqrt()
                } else {
                    gap - (two * (gap_x - w)).max(T::zero()).sqrt()
                };
                return a + self.r[n] + d;
            }
            xa = xa + survivor + gap_x;
            a = a + self.r[n] + gap;
        }
        let last = self.levels;
        let frac = if self.psi[last] > T::zero() {
            ((x - xa) / self.psi[last]).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        a + self.r[last] * frac
    }

    /// Gaps of generations `1..=depth`, sorted left to right.
    pub fn gaps(&self, depth: u32) -> Vec<(T, T)> {
        let mut out = Vec::new();
        self.collect_gaps(self.lo, 1, depth as usize, &mut out);
        out
    }

    fn collect_gaps(&self, a: T, n: usize, depth: usize, out: &mut Vec<(T, T)>) {
        if n > depth || n > self.levels {
            return;
        }
        let left_end = a + self.r[n];
        let right_start = left_end + self.ell[n];
        self.collect_gaps(a, n + 1, depth, out);
        out.push((left_end, right_start));
        self.collect_gaps(right_start, n + 1, depth, out);
    }

    /// Gaps meeting `[lo, hi]` whose length is at least `min_len`, in increasing order.
    pub fn gaps_in(&self, lo: T, hi: T, min_len: T) -> Vec<(T, T)> {
        let mut out = Vec::new();
        if min_len > T::zero() {
            self.collect_gaps_in(self.lo, 1, lo, hi, min_len, &mut out);
        }
        out
    }

    fn collect_gaps_in(&self, a: T, n: usize, lo: T, hi: T, min_len: T, out: &mut Vec<(T, T)>) {
        if n > self.levels || self.ell[n] < min_len {
            return;
        }
        let left_end = a + self.r[n];
        let right_start = left_end + self.ell[n];
        let end = right_start + self.r[n];
        if end < lo || a > hi {
            return;
        }
        self.collect_gaps_in(a, n + 1, lo, hi, min_len, out);
        if right_start >= lo && left_end <= hi {
            out.push((left_end, right_start));
        }
        self.collect_gaps_in(right_start, n + 1, lo, hi, min_len, out);
    }

    /// The image of this set under `y ↦ ∫_lo^y d(z, K) dz`, shifted to start at `offset`.
    ///
    /// Gaps map to gaps of length `ℓ_n²/4` and survivors stay congruent, so the image is
    /// again a geometric generalized Cantor set, with ratio `ρ²` and zero Lebesgue measure.
    pub fn distance_integral_image(&self, offset: T) -> Result<CantorSet<T>, CantorError> {
        let base = Interval::new(offset, offset + self.psi[0]).map_err(|_| CantorError::UnboundedBase)?;
        let l1 = self.spec.first_gap;
        CantorSet::new(GeneralizedCantorSpec::geometric(
            base,
            l1 * l1 * T::lit(0.25),
            self.spec.ratio * self.spec.ratio,
            self.spec.depth,
        ))
    }
}

/// Partial integral, value and slope of the tent `min(d, ℓ - d)` on a gap of length `ℓ`.
fn tent<T: Scalar>(d: T, gap: T) -> (T, T, T) {
    let h = gap * half();
    if d < h {
        (d * d * half(), d, T::one())
    } else {
        let rest = gap - d;
        (gap * gap * T::lit(0.25) - rest * rest * half(), rest, -T::one())
    }
}

/// How the distance function is continued outside the base interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extension<T> {
    /// `ψ(y) = d(y, K)`, so the integral grows quadratically and `t(±∞) = ±∞`.
    Distance,
    /// `ψ(y) = min(d(y, K), cap)`: linear growth of the integral beyond `cap`.
    Saturating(T),
}

impl<T: Scalar> Extension<T> {
    pub fn validate(&self) -> Result<(), CantorError> {
        match *self {
            Extension::Distance => Ok(()),
            Extension::Saturating(cap) if cap > T::zero() && cap.is_finite() => Ok(()),
            Extension::Saturating(cap) => Err(CantorError::BadCap(cap.to_f64_lossy())),
        }
    }

    /// (integral from 0 to d, value, slope) of the extended ψ at distance `d ≥ 0` from the base.
    pub fn outside(&self, d: T) -> (T, T, T) {
        match *self {
            Extension::Distance => (d * d * half(), d, T::one()),
            Extension::Saturating(cap) => {
                if d < cap {
                    (d * d * half(), d, T::one())
                } else {
                    (cap * cap * half() + cap * (d - cap), cap, T::zero())
                }
            }
        }
    }

    /// Inverse of the integral in [`Extension::outside`].
    pub fn outside_inverse(&self, w: T) -> T {
        let two = T::lit(2.0);
        match *self {
            Extension::Distance => (two * w).sqrt(),
            Extension::Saturating(cap) => {
                let knee = cap * cap * half();
                if w <= knee {
                    (two * w).sqrt()
                } else {
                    cap + (w - knee) / cap
                }
            }
        }
    }
}

/// The map `y ↦ ∫_lo^y ψ`, where ψ is the distance to the set inside the base and the
/// extension outside it. Strictly increasing because the set is nowhere dense.
#[derive(Debug, Clone)]
pub struct DistanceChart<T> {
    set: Arc<CantorSet<T>>,
    extension: Extension<T>,
}

impl<T: Scalar> DistanceChart<T> {
    pub fn new(set: Arc<CantorSet<T>>, extension: Extension<T>) -> Result<Self, CantorError> {
        extension.validate()?;
        Ok(Self { set, extension })
    }

    pub fn set(&self) -> &Arc<CantorSet<T>> {
        &self.set
    }

    pub fn extension(&self) -> Extension<T> {
        self.extension
    }

    /// `(∫_lo^y ψ, ψ(y), ψ'(y))`.
    pub fn eval(&self, y: T) -> (T, T, T) {
        let lo = self.set.lo();
        let hi = self.set.hi();
        if y < lo {
            let (i, v, sl) = self.extension.outside(lo - y);
            (-i, v, -sl)
        } else if y > hi {
            let (i, v, sl) = self.extension.outside(y - hi);
            (self.set.total_distance_integral() + i, v, sl)
        } else {
            let loc = self.set.locate(y);
            (loc.distance_integral, loc.distance, loc.slope)
        }
    }

    pub fn position(&self, y: T) -> T {
        self.eval(y).0
    }

    pub fn inverse(&self, x: T) -> T {
        let total = self.set.total_distance_integral();
        if x < T::zero() {
            self.set.lo() - self.extension.outside_inverse(-x)
        } else if x > total {
            self.set.hi() + self.extension.outside_inverse(x - total)
        } else {
            self.set.invert_distance_integral(x)
        }
    }
}

/// Coordinates in which a singular measure's Cantor set lives.
#[derive(Debug, Clone)]
pub enum Chart<T> {
    /// The set lives directly on the state line.
    Identity,
    /// The set lives in the `y` coordinate of a [`DistanceChart`]; states are `x(y)`.
    Distance(DistanceChart<T>),
}

impl<T: Scalar> Chart<T> {
    pub fn to_param(&self, x: T) -> T {
        match self {
            Chart::Identity => x,
            Chart::Distance(c) => c.inverse(x),
        }
    }

    pub fn to_state(&self, y: T) -> T {
        match self {
            Chart::Identity => y,
            Chart::Distance(c) => c.position(y),
        }
    }
}

/// Transformations applied to a Cantor measure's cumulative function, in order.
/// Locations are in the chart's parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureOp<T> {
    /// Keep only the mass inside `[lo, hi]`.
    Window { lo: T, hi: T },
    /// Multiply mass left of `split` by `left`, the rest by `right`.
    Skew { split: T, left: T, right: T },
}

/// Atomless measure: `mass` times the Cantor splitting measure of `set`, carried to the
/// state line by `chart`, followed by restrictions and piecewise rescalings.
///
/// Evaluation always descends in the parameter coordinate. For fat sets seen through a
/// [`DistanceChart`] the state-space image is a null set whose CDF is only Hölder-1/4,
/// so descending there would lose most of the precision.
#[derive(Debug, Clone)]
pub struct SingularMeasure<T> {
    set: Arc<CantorSet<T>>,
    chart: Chart<T>,
    mass: T,
    ops: Vec<MeasureOp<T>>,
}

impl<T: Scalar> SingularMeasure<T> {
    pub fn new(set: Arc<CantorSet<T>>, chart: Chart<T>, mass: T) -> Self {
        Self {
            set,
            chart,
            mass,
            ops: Vec::new(),
        }
    }

    pub fn with_op(mut self, op: MeasureOp<T>) -> Self {
        self.ops.push(op);
        self
    }

    /// Construction recipe of the support on the state line.
    pub fn support_spec(&self) -> GeneralizedCantorSpec<T> {
        match &self.chart {
            Chart::Identity => *self.set.spec(),
            Chart::Distance(c) => c
                .set()
                .distance_integral_image(T::zero())
                .map(|img| *img.spec())
                .unwrap_or(*self.set.spec()),
        }
    }

    pub fn set(&self) -> &CantorSet<T> {
        &self.set
    }

    pub fn chart(&self) -> &Chart<T> {
        &self.chart
    }

    pub fn ops(&self) -> &[MeasureOp<T>] {
        &self.ops
    }

    /// Cumulative function at parameter `y`, defined up to an additive constant.
    pub fn cumulative_param(&self, y: T) -> T {
        self.apply(y, self.ops.len())
    }

    /// Cumulative function at state `x`, defined up to an additive constant.
    pub fn cumulative(&self, x: T) -> T {
        self.cumulative_param(self.chart.to_param(x))
    }

    fn apply(&self, y: T, upto: usize) -> T {
        if upto == 0 {
            return self.mass * self.set.cdf(y);
        }
        match self.ops[upto - 1] {
            MeasureOp::Window { lo, hi } => self.apply(y.max(lo).min(hi), upto - 1),
            MeasureOp::Skew { split, left, right } => {
                let k = self.apply(y, upto - 1) - self.apply(split, upto - 1);
                if y < split {
                    left * k
                } else {
                    right * k
                }
            }
        }
    }

    /// Mass of `(a, b]` (state coordinates).
    pub fn mass_between(&self, a: T, b: T) -> T {
        self.cumulative(b) - self.cumulative(a)
    }

    /// CDF normalized to vanish left of the support.
    pub fn cdf(&self, x: T) -> T {
        self.cumulative(x) - self.cumulative_param(self.set.lo())
    }

    pub fn total_mass(&self) -> T {
        self.cumulative_param(self.set.hi()) - self.cumulative_param(self.set.lo())
    }
}
