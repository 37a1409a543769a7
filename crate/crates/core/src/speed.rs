//! Speed measures and the `(s, m)` pair defining a diffusion.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::interval::Interval;
use crate::orey::{DriftFn, OreyTable};
use crate::quadrature::{integrate_pieces, Quadrature, QuadratureOptions};
use crate::scalar::Scalar;
use crate::scale::{InverseScale, ScaleError, ScaleFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error("speed measure lives on {speed} but the scale function on {scale}")]
    DomainMismatch { speed: String, scale: String },
    #[error("speed measure has neither a density nor atoms")]
    EmptySpeed,
    #[error("speed density factor must be positive and finite, got {0}")]
    BadFactor(f64),
    #[error("atom at {at} has invalid mass {mass}")]
    BadAtom { at: f64, mass: f64 },
}

pub type DensityFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Lebesgue density of a speed measure.
#[derive(Clone)]
pub enum SpeedDensity<T> {
    Constant(T),
    /// `t'∘s` of the given scale function, i.e. the measure `m̃` of that scale.
    Energy(ScaleFunction<T>),
    Function { label: String, f: DensityFn<T> },
    /// `left·inner` left of `split`, `right·inner` from `split` on.
    Scaled {
        inner: Box<SpeedDensity<T>>,
        split: T,
        left: T,
        right: T,
    },
}

impl<T: fmt::Debug> fmt::Debug for SpeedDensity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedDensity::Constant(c) => write!(f, "Constant({c:?})"),
            SpeedDensity::Energy(_) => write!(f, "Energy"),
            SpeedDensity::Function { label, .. } => write!(f, "Function({label})"),
            SpeedDensity::Scaled {
                inner,
                split,
                left,
                right,
            } => write!(f, "Scaled({inner:?}, split {split:?}, {left:?}/{right:?})"),
        }
    }
}

impl<T: Scalar> SpeedDensity<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            SpeedDensity::Constant(c) => *c,
            SpeedDensity::Energy(s) => s.tprime_of_state(x),
            SpeedDensity::Function { f, .. } => f(x),
            SpeedDensity::Scaled {
                inner,
                split,
                left,
                right,
            } => {
                let g = if x < *split { *left } else { *right };
                g * inner.eval(x)
            }
        }
    }

    /// `h(x(u))·x'(u)` for a point of `scale`'s parameterization.
    pub fn param_density(&self, scale: &ScaleFunction<T>, u: T) -> T {
        match self {
            SpeedDensity::Energy(s) if s.param_id() == scale.param_id() => {
                s.tprime_at_param(u) * scale.state(u).dx
            }
            SpeedDensity::Scaled {
                inner,
                split,
                left,
                right,
            } => {
                let x = scale.state(u).x;
                let g = if x < *split { *left } else { *right };
                g * inner.param_density(scale, u)
            }
            other => {
                let p = scale.state(u);
                other.eval(p.x) * p.dx
            }
        }
    }

    fn splits(&self, out: &mut Vec<T>) {
        if let SpeedDensity::Scaled { inner, split, .. } = self {
            out.push(*split);
            inner.splits(out);
        }
    }

    /// Whether the density is a.e. positive, decided from its structure; black-box
    /// functions are probed on the supplied points.
    pub fn positive_ae(&self, probes: &[T]) -> bool {
        match self {
            SpeedDensity::Constant(c) => *c > T::zero(),
            // t'∘s > 0 a.e. for every scale function with g < ∞ a.e.
            SpeedDensity::Energy(_) => true,
            SpeedDensity::Function { f, .. } => probes.iter().all(|&x| f(x) > T::zero()),
            SpeedDensity::Scaled {
                inner, left, right, ..
            } => *left > T::zero() && *right > T::zero() && inner.positive_ae(probes),
        }
    }
}

/// Radon measure `m(dx) = h(x)dx + Σ w_i δ_{a_i}` on the state interval.
#[derive(Debug, Clone)]
pub struct SpeedMeasure<T> {
    domain: Interval<T>,
    density: Option<SpeedDensity<T>>,
    atoms: Vec<(T, T)>,
}

impl<T: Scalar> SpeedMeasure<T> {
    pub fn new(
        domain: Interval<T>,
        density: Option<SpeedDensity<T>>,
        mut atoms: Vec<(T, T)>,
    ) -> Result<Self, SpecError> {
        if density.is_none() && atoms.is_empty() {
            return Err(SpecError::EmptySpeed);
        }
        for &(at, mass) in &atoms {
            if !(mass > T::zero() && mass.is_finite() && domain.contains(at)) {
                return Err(SpecError::BadAtom {
                    at: at.to_f64_lossy(),
                    mass: mass.to_f64_lossy(),
                });
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Ok(Self {
            domain,
            density,
            atoms,
        })
    }

    /// Lebesgue measure on `domain`.
    pub fn lebesgue(domain: Interval<T>) -> Self {
        Self {
            domain,
            density: Some(SpeedDensity::Constant(T::one())),
            atoms: Vec::new(),
        }
    }

    /// `m̃(dx) = t'∘s(x) dx`.
    pub fn energy_of(s: &ScaleFunction<T>) -> Self {
        Self {
            domain: s.domain(),
            density: Some(SpeedDensity::Energy(s.clone())),
            atoms: Vec::new(),
        }
    }

    pub fn from_density(
        domain: Interval<T>,
        label: impl Into<String>,
        f: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            density: Some(SpeedDensity::Function {
                label: label.into(),
                f: Arc::new(f),
            }),
            atoms: Vec::new(),
        }
    }

    pub fn domain(&self) -> Interval<T> {
        self.domain
    }

    pub fn density(&self) -> Option<&SpeedDensity<T>> {
        self.density.as_ref()
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    /// `h(x)`, 0 when there is no density.
    pub fn density_at(&self, x: T) -> T {
        self.density
            .as_ref()
            .map(|d| d.eval(x))
            .unwrap_or_else(T::zero)
    }

    /// `h` at the state with parameter `u` of `scale`, avoiding the inversion `x ↦ u`
    /// where the chart is regular.
    pub fn density_at_param(&self, scale: &ScaleFunction<T>, u: T) -> T {
        let Some(d) = self.density.as_ref() else {
            return T::zero();
        };
        let p = scale.state(u);
        if p.dx > T::zero() {
            d.param_density(scale, u) / p.dx
        } else {
            d.eval(p.x)
        }
    }

    /// `m̂ = left·m` left of `split` and `right·m` from `split` on.
    pub fn scaled(&self, split: T, left: T, right: T) -> Result<Self, SpecError> {
        for g in [left, right] {
            if !(g > T::zero() && g.is_finite()) {
                return Err(SpecError::BadFactor(g.to_f64_lossy()));
            }
        }
        Ok(Self {
            domain: self.domain,
            density: self.density.clone().map(|d| SpeedDensity::Scaled {
                inner: Box::new(d),
                split,
                left,
                right,
            }),
            atoms: self
                .atoms
                .iter()
                .map(|&(a, w)| (a, if a < split { left * w } else { right * w }))
                .collect(),
        })
    }

    /// Points where the density is only piecewise smooth.
    pub fn kinks(&self) -> Vec<T> {
        let mut out = Vec::new();
        if let Some(d) = &self.density {
            d.splits(&mut out);
        }
        out
    }
}

/// `(s, m)` on an open interval, with `t = s^{-1}` and `J = s(I)`.
#[derive(Debug, Clone)]
pub struct DiffusionSpec<T> {
    scale: ScaleFunction<T>,
    inverse: InverseScale<T>,
    speed: SpeedMeasure<T>,
}

impl<T: Scalar> DiffusionSpec<T> {
    pub fn new(scale: ScaleFunction<T>, speed: SpeedMeasure<T>) -> Result<Self, SpecError> {
        if scale.domain() != speed.domain() {
            return Err(SpecError::DomainMismatch {
                speed: speed.domain().to_string(),
                scale: scale.domain().to_string(),
            });
        }
        let inverse = scale.inverse();
        Ok(Self {
            scale,
            inverse,
            speed,
        })
    }

    /// Standard Brownian motion: `s(x) = x`, `m` = Lebesgue.
    pub fn brownian() -> Self {
        Self::new(
            ScaleFunction::identity(),
            SpeedMeasure::lebesgue(Interval::real_line()),
        )
        .expect("matching domains")
    }

    /// `(s, m̃)`.
    pub fn with_energy_speed(scale: ScaleFunction<T>) -> Self {
        let speed = SpeedMeasure::energy_of(&scale);
        Self::new(scale, speed).expect("matching domains")
    }

    pub fn interval(&self) -> Interval<T> {
        self.scale.domain()
    }

    pub fn scale(&self) -> &ScaleFunction<T> {
        &self.scale
    }

    pub fn inverse(&self) -> &InverseScale<T> {
        &self.inverse
    }

    pub fn speed(&self) -> &SpeedMeasure<T> {
        &self.speed
    }

    /// Same speed measure, different scale function.
    pub fn with_scale(&self, scale: ScaleFunction<T>) -> Result<Self, SpecError> {
        Self::new(scale, self.speed.clone())
    }

    /// Breakpoints for integrals over `[ua, ub]` in the scale's parameter: construction
    /// gaps down to a millionth of the range and the speed density kinks.
    pub fn breakpoints(&self, ua: T, ub: T) -> Vec<T> {
        let min_len = (ub - ua) * T::lit(1e-6);
        let mut pts = vec![ua, ub];
        pts.extend(self.scale.param_breakpoints(ua, ub, min_len));
        for x in self.speed.kinks() {
            let u = self.scale.param(x);
            if u > ua && u < ub {
                pts.push(u);
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        pts.dedup();
        pts
    }

    /// `∫ f dm` over the states with parameter in `(ua, ub]`, where `f` receives `(u, x)`.
    pub fn integrate_speed<F: FnMut(T, T) -> T>(
        &self,
        ua: T,
        ub: T,
        mut f: F,
        opts: &QuadratureOptions<T>,
    ) -> Quadrature<T> {
        let mut q = Quadrature {
            value: T::zero(),
            error: T::zero(),
            evaluations: 0,
            converged: true,
        };
        if let Some(d) = self.speed.density() {
            let pts = self.breakpoints(ua, ub);
            q = integrate_pieces(
                |u| {
                    let h = d.param_density(&self.scale, u);
                    if h == T::zero() {
                        T::zero()
                    } else {
                        f(u, self.scale.state(u).x) * h
                    }
                },
                &pts,
                opts,
            );
        }
        if !self.speed.atoms().is_empty() {
            let xa = self.scale.state(ua).x;
            let xb = self.scale.state(ub).x;
            for &(a, w) in self.speed.atoms() {
                if a > xa && a <= xb {
                    q.value = q.value + w * f(self.scale.param(a), a);
                }
            }
        }
        q
    }
}

/// Orey-type scale `s(x) = ∫_0^x exp(-2∫_0^y b)` with speed density `exp(2∫_0^x b)`.
/// The speed measure is `m̃` of the returned scale.
pub fn build_orey_scale<T: Scalar>(
    b: DriftFn<T>,
    tol: T,
) -> Result<(ScaleFunction<T>, SpeedMeasure<T>), SpecError> {
    build_orey_scale_on(b, tol, T::lit(24.0), T::lit(0.0625))
}

/// As [`build_orey_scale`] with an explicit table range and panel width.
pub fn build_orey_scale_on<T: Scalar>(
    b: DriftFn<T>,
    tol: T,
    range: T,
    width: T,
) -> Result<(ScaleFunction<T>, SpeedMeasure<T>), SpecError> {
    let table = OreyTable::new(b, tol, range, width).map_err(ScaleError::from)?;
    let s = ScaleFunction::orey(Arc::new(table));
    let m = SpeedMeasure::energy_of(&s);
    Ok((s, m))
}

/// `dŝ = γ1 ds` left of `x0`, `γ2 ds` from `x0` on; `m̂ = m/γ1` and `m/γ2` likewise.
pub fn skew_transform<T: Scalar>(
    s: &ScaleFunction<T>,
    m: &SpeedMeasure<T>,
    x0: T,
    gamma1: T,
    gamma2: T,
) -> Result<(ScaleFunction<T>, SpeedMeasure<T>), SpecError> {
    if !s.domain().contains(x0) {
        return Err(ScaleError::OutsideDomain {
            x: x0.to_f64_lossy(),
            domain: s.domain().to_string(),
        }
        .into());
    }
    for g in [gamma1, gamma2] {
        if !(g > T::zero() && g.is_finite()) {
            return Err(ScaleError::BadSkew(gamma1.to_f64_lossy(), gamma2.to_f64_lossy()).into());
        }
    }
    let hat_s = s.skewed(x0, gamma1, gamma2);
    let hat_m = m.scaled(x0, T::one() / gamma1, T::one() / gamma2)?;
    Ok((hat_s, hat_m))
}

/// The α-skew Brownian motion: skew transform of `(x, λ)` at 0 with `γ1 = 1/α`,
/// `γ2 = 1/(1-α)`.
pub fn skew_brownian_spec<T: Scalar>(alpha: T) -> Result<DiffusionSpec<T>, SpecError> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(ScaleError::BadSkew(alpha.to_f64_lossy(), (T::one() - alpha).to_f64_lossy()).into());
    }
    let id = ScaleFunction::identity();
    let leb = SpeedMeasure::lebesgue(Interval::real_line());
    let (s, m) = skew_transform(&id, &leb, T::zero(), T::one() / alpha, T::one() / (T::one() - alpha))?;
    DiffusionSpec::new(s, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{Extension, GeneralizedCantorSpec};
    use crate::scale::build_cantor_scale;
    use approx::assert_relative_eq;

    #[test]
    fn constant_drift_orey() {
        let beta = 0.2;
        let (s, m) = build_orey_scale(Arc::new(move |_: f64| beta), 1e-11).unwrap();
        for x in [-3.0, -0.5, 0.4, 2.0] {
            let exact = (1.0 - (-2.0 * beta * x).exp()) / (2.0 * beta);
            assert_relative_eq!(s.eval(x), exact, max_relative = 1e-10);
            assert_relative_eq!(m.density_at(x), (2.0 * beta * x).exp(), max_relative = 1e-10);
        }
        let (s0, _) = build_orey_scale(Arc::new(|_: f64| 0.0), 1e-10).unwrap();
        assert_relative_eq!(s0.eval(1.7), 1.7, max_relative = 1e-12);
    }

    #[test]
    fn skew_identity_and_half() {
        let id = ScaleFunction::<f64>::identity();
        let leb = SpeedMeasure::lebesgue(Interval::real_line());
        let (s, m) = skew_transform(&id, &leb, 0.0, 1.0, 1.0).unwrap();
        for x in [-2.0, 0.3, 5.0] {
            assert_eq!(s.eval(x), x);
            assert_eq!(m.density_at(x), 1.0);
        }
        let half = skew_brownian_spec(0.5).unwrap();
        for x in [-2.0, 0.3, 5.0] {
            assert_relative_eq!(half.scale().eval(x), 2.0 * x);
        }
        assert!(skew_transform(&id, &leb, f64::INFINITY, 1.0, 1.0).is_err());
        assert!(skew_transform(&id, &leb, 0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn speed_integral_matches_closed_forms() {
        let bm = DiffusionSpec::<f64>::brownian();
        let opts = QuadratureOptions::default();
        let q = bm.integrate_speed(-1.0, 2.0, |_, x| x * x, &opts);
        assert_relative_eq!(q.value, 3.0, max_relative = 1e-12);

        // m̃ of the fat-Cantor scale integrates to t(b) - t(a) against ds
        let (s, _) = build_cantor_scale(GeneralizedCantorSpec::quarter(12), Extension::Distance).unwrap();
        let spec = DiffusionSpec::with_energy_speed(s.clone());
        let (ua, ub) = (-0.5, 1.5);
        let q = spec.integrate_speed(ua, ub, |_, _| 1.0, &opts);
        // ∫ t'∘s dx = ∫ ψ² du
        let exact_outside = 0.5f64.powi(3) / 3.0 * 2.0;
        let inside = 0.25f64.powi(3) / 12.0 / (1.0 - 2.0 * 0.25f64.powi(3));
        assert_relative_eq!(q.value, exact_outside + inside, max_relative = 1e-8);
    }
}
