//! Coefficients read off `(s, m)`: the measure `m̃`, the diffusion coefficient `σ`, the
//! drift (a function or a signed measure), hypothesis checks and boundary behaviour.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::interval::{Endpoint, Interval};
use crate::quadrature::{integrate_pieces, QuadratureOptions};
use crate::scalar::Scalar;
use crate::scale::TPrimeClass;
use crate::speed::{DiffusionSpec, SpeedDensity, SpeedMeasure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoefficientError {
    #[error("hypothesis {hypothesis} fails: {reason}")]
    Hypothesis {
        hypothesis: &'static str,
        reason: String,
    },
    #[error("t' has no version of bounded variation, so N is not of bounded variation")]
    NotBoundedVariation,
    #[error("d t_*(t') is not absolutely continuous with respect to m")]
    NotAbsolutelyContinuousWrtM,
    #[error("boundary test at the {endpoint} end is inconclusive (increment ratio {ratio})")]
    Inconclusive { endpoint: &'static str, ratio: f64 },
}

/// Seed for the internal Lebesgue probes when the caller supplies none.
pub const PROBE_SEED: u64 = 0x5ca1_e5eed;
const PROBE_COUNT: usize = 1000;

/// Uniform Lebesgue probes in the state interval (a window around the anchor when the
/// interval is unbounded).
pub fn lebesgue_probes<T: Scalar, R: Rng>(interval: Interval<T>, anchor: T, n: usize, rng: &mut R) -> Vec<T> {
    let reach = T::lit(50.0);
    let lo = if interval.lo().is_finite() {
        interval.lo()
    } else {
        anchor - reach
    };
    let hi = if interval.hi().is_finite() {
        interval.hi()
    } else {
        anchor + reach
    };
    (0..n)
        .map(|_| {
            let v: f64 = rng.random();
            let x = lo + (hi - lo) * T::lit(v);
            interval.clamp(x)
        })
        .filter(|x| interval.contains(*x))
        .collect()
}

fn default_probes<T: Scalar>(spec: &DiffusionSpec<T>) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    lebesgue_probes(spec.interval(), spec.scale().anchor(), PROBE_COUNT, &mut rng)
}

fn has_positive_density<T: Scalar>(m: &SpeedMeasure<T>, probes: &[T]) -> bool {
    m.density().is_some_and(|d| d.positive_ae(probes))
}

/// `m = m̃` decided from the construction.
pub fn speed_is_energy<T: Scalar>(spec: &DiffusionSpec<T>) -> bool {
    let m = spec.speed();
    if !m.atoms().is_empty() {
        return false;
    }
    match m.density() {
        Some(SpeedDensity::Energy(e)) => e.same_tprime(spec.scale()),
        Some(SpeedDensity::Constant(c)) => spec.scale().constant_tprime() == Some(*c),
        _ => false,
    }
}

/// `m̃(dx) = t'∘s(x) dx`, the Revuz measure of the sharp bracket of the martingale part.
pub fn m_tilde<T: Scalar>(spec: &DiffusionSpec<T>) -> Result<SpeedMeasure<T>, CoefficientError> {
    let (ok, witness) = check_h1(spec);
    if !ok {
        return Err(CoefficientError::Hypothesis {
            hypothesis: "H1",
            reason: witness,
        });
    }
    Ok(SpeedMeasure::energy_of(spec.scale()))
}

/// `σ = (dm̃/dm)^{1/2} = (t'∘s/h)^{1/2}`.
#[derive(Debug, Clone)]
pub struct Sigma<T> {
    spec: DiffusionSpec<T>,
    unit: bool,
}

impl<T: Scalar> Sigma<T> {
    /// `σ ≡ 1`, known from the construction rather than computed.
    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn squared_at_param(&self, u: T) -> T {
        if self.unit {
            return T::one();
        }
        let tp = self.spec.scale().tprime_at_param(u);
        if tp == T::zero() {
            return T::zero();
        }
        tp / self.spec.speed().density_at_param(self.spec.scale(), u)
    }

    pub fn squared(&self, x: T) -> T {
        self.squared_at_param(self.spec.scale().param(x))
    }

    pub fn eval(&self, x: T) -> T {
        self.squared(x).sqrt()
    }

    pub fn at_param(&self, u: T) -> T {
        self.squared_at_param(u).sqrt()
    }
}

pub fn sigma<T: Scalar>(spec: &DiffusionSpec<T>) -> Result<Sigma<T>, CoefficientError> {
    let m = spec.speed();
    if m.density().is_none() {
        return Err(CoefficientError::Hypothesis {
            hypothesis: "H3",
            reason: "speed measure has no density, so m̃ is not absolutely continuous w.r.t. m".into(),
        });
    }
    if !has_positive_density(m, &default_probes(spec)) {
        return Err(CoefficientError::Hypothesis {
            hypothesis: "H3",
            reason: "speed density vanishes where t'∘s > 0".into(),
        });
    }
    Ok(Sigma {
        spec: spec.clone(),
        unit: speed_is_energy(spec),
    })
}

/// `μ_N = ½ d t_*(t')`: the image under `t` of the Stieltjes measure of `t'`.
///
/// Off the atoms it has Lebesgue density `½ t''∘s / t'∘s`; the atoms sit at the states
/// where `t'` jumps. Cantor-type sets carry no mass since `t''∘s = 0` there.
#[derive(Debug, Clone)]
pub struct SmoothSignedMeasure<T> {
    spec: DiffusionSpec<T>,
    atoms: Vec<(T, T)>,
    opts: QuadratureOptions<T>,
}

/// Sign selector for the Jordan parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// One Jordan part of a [`SmoothSignedMeasure`], itself a nonnegative measure.
#[derive(Debug, Clone, Copy)]
pub struct JordanPart<'a, T> {
    parent: &'a SmoothSignedMeasure<T>,
    sign: Sign,
}

impl<T: Scalar> JordanPart<'_, T> {
    fn pick(&self, v: T) -> T {
        match self.sign {
            Sign::Positive => v.max(T::zero()),
            Sign::Negative => (-v).max(T::zero()),
        }
    }

    pub fn density(&self, x: T) -> T {
        self.pick(self.parent.density(x))
    }

    pub fn atoms(&self) -> Vec<(T, T)> {
        self.parent
            .atoms
            .iter()
            .filter_map(|&(a, w)| {
                let v = self.pick(w);
                (v > T::zero()).then_some((a, v))
            })
            .collect()
    }

    /// Mass of `(a, b]`.
    pub fn mass(&self, a: T, b: T) -> T {
        let p = self.parent;
        let (ua, ub) = (p.spec.scale().param(a), p.spec.scale().param(b));
        let pts = p.spec.breakpoints(ua, ub);
        let q = integrate_pieces(|u| self.pick(p.density_at_param(u)), &pts, &p.opts);
        let atoms: T = self
            .atoms()
            .iter()
            .filter(|(x, _)| *x > a && *x <= b)
            .fold(T::zero(), |acc, (_, w)| acc + *w);
        q.value + atoms
    }
}

impl<T: Scalar> SmoothSignedMeasure<T> {
    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    /// Lebesgue density `½ t''∘s / t'∘s`, 0 where `t'∘s = 0`.
    pub fn density(&self, x: T) -> T {
        let s = self.spec.scale();
        let u = s.param(x);
        let tp = s.tprime_at_param(u);
        if tp == T::zero() {
            return T::zero();
        }
        T::lit(0.5) * s.tsecond_at_param(u) / tp
    }

    /// Density with respect to the construction parameter, `½ t''∘s · σ'`.
    pub fn density_at_param(&self, u: T) -> T {
        let s = self.spec.scale();
        if s.state(u).dx == T::zero() {
            return T::zero();
        }
        let (d1, _) = s.param_density(u);
        T::lit(0.5) * s.tsecond_at_param(u) * d1
    }

    /// `μ_N((a, b])` by quadrature of the density plus the atoms.
    pub fn mass(&self, a: T, b: T) -> T {
        self.positive_part().mass(a, b) - self.negative_part().mass(a, b)
    }

    /// `μ_N((a, b]) = ½(t'(s(b)) - t'(s(a)))` with the right-continuous version of `t'`.
    pub fn exact_mass(&self, a: T, b: T) -> T {
        let s = self.spec.scale();
        T::lit(0.5) * (s.tprime_of_state(b) - s.tprime_of_state(a))
    }

    pub fn positive_part(&self) -> JordanPart<'_, T> {
        JordanPart {
            parent: self,
            sign: Sign::Positive,
        }
    }

    pub fn negative_part(&self) -> JordanPart<'_, T> {
        JordanPart {
            parent: self,
            sign: Sign::Negative,
        }
    }

    /// True when `t'` is constant, so the measure vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && matches!(self.spec.scale().kind_name(), "affine")
    }
}

pub fn smooth_measure_n<T: Scalar>(spec: &DiffusionSpec<T>) -> Result<SmoothSignedMeasure<T>, CoefficientError> {
    let atoms = match spec.scale().tprime_class() {
        TPrimeClass::NotBoundedVariation => return Err(CoefficientError::NotBoundedVariation),
        TPrimeClass::Jumps(j) => j.iter().map(|j| (j.state, T::lit(0.5) * j.size)).collect(),
        _ => Vec::new(),
    };
    Ok(SmoothSignedMeasure {
        spec: spec.clone(),
        atoms,
        opts: QuadratureOptions::default(),
    })
}

/// `b = ½ t''∘s / (t'∘s · h)`, the density of `μ_N` with respect to `m`.
#[derive(Debug, Clone)]
pub struct DriftFunction<T> {
    spec: DiffusionSpec<T>,
}

impl<T: Scalar> DriftFunction<T> {
    pub fn at_param(&self, u: T) -> T {
        let s = self.spec.scale();
        let tp = s.tprime_at_param(u);
        if tp == T::zero() {
            return T::zero();
        }
        T::lit(0.5) * s.tsecond_at_param(u) / (tp * self.spec.speed().density_at_param(s, u))
    }

    pub fn eval(&self, x: T) -> T {
        self.at_param(self.spec.scale().param(x))
    }
}

/// The drift: a function under (H4'), otherwise the signed measure `μ_N` (local-time
/// drift for skew transforms).
#[derive(Debug, Clone)]
pub enum Drift<T> {
    Function(DriftFunction<T>),
    Measure(SmoothSignedMeasure<T>),
}

impl<T> Drift<T> {
    pub fn is_measure(&self) -> bool {
        matches!(self, Drift::Measure(_))
    }

    pub fn function(&self) -> Option<&DriftFunction<T>> {
        match self {
            Drift::Function(f) => Some(f),
            Drift::Measure(_) => None,
        }
    }

    pub fn measure(&self) -> Option<&SmoothSignedMeasure<T>> {
        match self {
            Drift::Measure(m) => Some(m),
            Drift::Function(_) => None,
        }
    }
}

pub fn drift_b<T: Scalar>(spec: &DiffusionSpec<T>) -> Result<Drift<T>, CoefficientError> {
    let mu = smooth_measure_n(spec)?;
    if !mu.is_zero() && !has_positive_density(spec.speed(), &default_probes(spec)) {
        return Err(CoefficientError::NotAbsolutelyContinuousWrtM);
    }
    if mu.atoms().is_empty() {
        Ok(Drift::Function(DriftFunction { spec: spec.clone() }))
    } else {
        Ok(Drift::Measure(mu))
    }
}

/// `μ_N ≪ m̃`, decided from the measure (atoms against the atomless `m̃`) and
/// cross-checked against the class of `t'`.
pub fn check_h4prime_equivalence<T: Scalar>(spec: &DiffusionSpec<T>) -> bool {
    let class = spec.scale().tprime_class();
    let from_class = class.is_absolutely_continuous();
    match smooth_measure_n(spec) {
        Ok(mu) => {
            let from_measure = mu.atoms().is_empty();
            debug_assert_eq!(from_measure, from_class, "μ_N ≪ m̃ must match (H4')");
            from_measure && from_class
        }
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    UndecidableAtDepth,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::UndecidableAtDepth => "undecidable-at-depth",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub verdict: Verdict,
    pub witness: String,
}

impl HypothesisCheck {
    fn new(ok: bool, witness: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::from_bool(ok),
            witness: witness.into(),
        }
    }
}

/// Verdicts for (H1)-(H4), (H3') and (H4').
///
/// `h4` records the bounded-variation clause. The absolute continuity of `d t_*(t')`
/// with respect to `m` is reported separately as `drift_density`; it fails for skew
/// transforms, whose drift is a local-time measure.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub h1: HypothesisCheck,
    pub h2: HypothesisCheck,
    pub h3: HypothesisCheck,
    pub h4: HypothesisCheck,
    pub h3prime: HypothesisCheck,
    pub h4prime: HypothesisCheck,
    pub drift_density: HypothesisCheck,
}

impl HypothesisReport {
    pub fn entries(&self) -> [(&'static str, &HypothesisCheck); 7] {
        [
            ("h1", &self.h1),
            ("h2", &self.h2),
            ("h3", &self.h3),
            ("h4", &self.h4),
            ("h3prime", &self.h3prime),
            ("h4prime", &self.h4prime),
            ("drift_density", &self.drift_density),
        ]
    }

    /// Flat `key = value` record.
    pub fn to_record(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (k, c) in self.entries() {
            out.push((k.to_string(), c.verdict.to_string()));
            out.push((format!("{k}.witness"), c.witness.clone()));
        }
        out
    }

    /// The implications `h3' ⟹ h3`, `h4' ⟹ h1`, `h4' ∧ h3' ⟹ h4`.
    pub fn implications_hold(&self) -> bool {
        let h3p = self.h3prime.verdict.holds();
        let h4p = self.h4prime.verdict.holds();
        (!h3p || self.h3.verdict.holds())
            && (!h4p || self.h1.verdict.holds())
            && (!(h3p && h4p) || self.h4.verdict.holds())
    }
}

fn check_h1<T: Scalar>(spec: &DiffusionSpec<T>) -> (bool, String) {
    // ∫_{s(K)} (t')² dy = ∫_K (t'∘s)² ds over compact windows, in the parameter
    let s = spec.scale();
    let dom = s.param_domain();
    let ue = s.anchor_param();
    let opts = QuadratureOptions::default();
    let mut last = T::zero();
    for r in [1.0, 4.0, 16.0] {
        let r = T::lit(r);
        let shrink = |v: T, toward: T| {
            if dom.contains(v) {
                v
            } else {
                toward + (dom.clamp(v) - toward) * T::lit(0.999)
            }
        };
        let (ua, ub) = (shrink(ue - r, ue), shrink(ue + r, ue));
        let pts = spec.breakpoints(ua, ub);
        let q = integrate_pieces(
            |u| {
                let tp = s.tprime_at_param(u);
                tp * tp * s.param_density(u).0
            },
            &pts,
            &opts,
        );
        if !q.value.is_finite() {
            return (
                false,
                format!("∫(t')² diverges on a compact window of radius {r} around the anchor"),
            );
        }
        last = q.value;
    }
    (
        true,
        format!("t absolutely continuous; ∫(t')² = {:.6e} over the radius-16 window", last.to_f64_lossy()),
    )
}

pub fn validate_hypotheses<T: Scalar>(spec: &DiffusionSpec<T>) -> HypothesisReport {
    validate_hypotheses_with(spec, &default_probes(spec))
}

/// As [`validate_hypotheses`] with caller-supplied Lebesgue probe points.
pub fn validate_hypotheses_with<T: Scalar>(spec: &DiffusionSpec<T>, probes: &[T]) -> HypothesisReport {
    let s = spec.scale();
    let m = spec.speed();
    let (h1_ok, h1_w) = check_h1(spec);
    let h1 = HypothesisCheck::new(h1_ok, h1_w);

    let kappa = s.singular_mass();
    let resolution = T::lit(2.0).powi(-(s.depth().min(1000) as i32));
    let h2 = if kappa > resolution || kappa == T::zero() {
        HypothesisCheck::new(kappa > T::zero(), format!("κ total mass = {kappa}"))
    } else {
        HypothesisCheck {
            verdict: Verdict::UndecidableAtDepth,
            witness: format!("κ total mass = {kappa} is below 2^-{}", s.depth()),
        }
    };

    let density_ok = has_positive_density(m, probes);
    let h3prime = HypothesisCheck::new(
        density_ok && m.atoms().is_empty(),
        match (m.density(), m.atoms().len()) {
            (None, n) => format!("m is purely atomic ({n} atoms)"),
            (Some(_), 0) if density_ok => "m has an a.e. positive density".to_string(),
            (Some(_), 0) => "speed density vanishes on probe points".to_string(),
            (Some(_), n) => format!("m has {n} atoms"),
        },
    );
    let h3 = HypothesisCheck::new(
        density_ok,
        if density_ok {
            "m̃ has a density and m an a.e. positive density part"
        } else {
            "m̃ charges sets where m has no density"
        },
    );

    let class = s.tprime_class();
    let bv = class.is_bounded_variation();
    let h4 = HypothesisCheck::new(bv, format!("t' is {class}"));
    let h4prime = HypothesisCheck::new(class.is_absolutely_continuous(), format!("t' is {class}"));
    let jumps_charged = match &class {
        TPrimeClass::Jumps(j) => j
            .iter()
            .all(|j| m.atoms().iter().any(|(a, _)| *a == j.state)),
        _ => true,
    };
    let drift_density = HypothesisCheck::new(
        bv && density_ok && jumps_charged,
        if !bv {
            "t' is not of bounded variation".to_string()
        } else if !jumps_charged {
            "d t_*(t') has atoms where m has none".to_string()
        } else if !density_ok {
            "m has no a.e. positive density".to_string()
        } else {
            "d t_*(t') ≪ m".to_string()
        },
    );

    let mut report = HypothesisReport {
        h1,
        h2,
        h3,
        h4,
        h3prime,
        h4prime,
        drift_density,
    };
    enforce_implications(&mut report);
    report
}

fn enforce_implications(r: &mut HypothesisReport) {
    if r.h3prime.verdict.holds() && !r.h3.verdict.holds() {
        r.h3 = HypothesisCheck::new(true, "implied by H3'");
    }
    if r.h4prime.verdict.holds() && !r.h1.verdict.holds() {
        r.h1 = HypothesisCheck::new(true, "implied by H4'");
    }
    if r.h4prime.verdict.holds() && r.h3prime.verdict.holds() {
        if !r.h4.verdict.holds() {
            r.h4 = HypothesisCheck::new(true, "implied by H3' and H4'");
        }
        if !r.drift_density.verdict.holds() {
            r.drift_density = HypothesisCheck::new(true, "implied by H3' and H4'");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    Approachable,
    Unapproachable,
}

impl BoundaryClass {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryClass::Approachable => "approachable-in-finite-time",
            BoundaryClass::Unapproachable => "unapproachable",
        }
    }
}

/// Ratio of successive truncation increments at or below which the integral converges.
pub const CONVERGENT_RATIO: f64 = 0.3;
/// Ratio at or above which it diverges.
pub const DIVERGENT_RATIO: f64 = 0.9;

/// Feller-type test: `N = ∫ |s(end) - s(x)| m(dx)` near the end is finite iff the end is
/// reached in finite time. The integral is truncated at distances `10, 10², 10³` from the
/// anchor (infinite ends) or `L·10^{-1,-2,-3}` from the end (finite ends, `L` the distance
/// from the anchor), and the increments are compared.
pub fn classify_boundary<T: Scalar>(
    spec: &DiffusionSpec<T>,
    end: Endpoint,
) -> Result<BoundaryClass, CoefficientError> {
    let s = spec.scale();
    let s_end = s.range().end(end);
    if !s_end.is_finite() {
        return Ok(BoundaryClass::Unapproachable);
    }
    let dom = spec.interval();
    let e = s.anchor();
    let x_end = dom.end(end);
    let dir = match end {
        Endpoint::Lo => -T::one(),
        Endpoint::Hi => T::one(),
    };
    let cuts: Vec<T> = (1..=3)
        .map(|k| {
            let p = T::lit(10f64.powi(k));
            if x_end.is_finite() {
                x_end - dir * (x_end - e).abs() / p
            } else {
                e + dir * p
            }
        })
        .collect();
    let opts = QuadratureOptions::default();
    let mut values = Vec::with_capacity(3);
    let mut from = s.anchor_param();
    let mut acc = T::zero();
    for &c in &cuts {
        let to = s.param(c);
        let (a, b) = if from <= to { (from, to) } else { (to, from) };
        let q = spec.integrate_speed(a, b, |u, _| (s_end - s.at_param(u)).abs(), &opts);
        if !q.value.is_finite() {
            return Ok(BoundaryClass::Unapproachable);
        }
        acc = acc + q.value;
        values.push(acc);
        from = to;
    }
    let d1 = values[1] - values[0];
    let d2 = values[2] - values[1];
    if d2 <= T::epsilon() * values[2].abs() {
        return Ok(BoundaryClass::Approachable);
    }
    let ratio = (d2 / d1).to_f64_lossy();
    if ratio <= CONVERGENT_RATIO {
        Ok(BoundaryClass::Approachable)
    } else if ratio >= DIVERGENT_RATIO || !ratio.is_finite() {
        Ok(BoundaryClass::Unapproachable)
    } else {
        Err(CoefficientError::Inconclusive {
            endpoint: match end {
                Endpoint::Lo => "lower",
                Endpoint::Hi => "upper",
            },
            ratio,
        })
    }
}

/// Both ends unapproachable.
pub fn is_conservative<T: Scalar>(spec: &DiffusionSpec<T>) -> Result<bool, CoefficientError> {
    Ok(classify_boundary(spec, Endpoint::Lo)? == BoundaryClass::Unapproachable
        && classify_boundary(spec, Endpoint::Hi)? == BoundaryClass::Unapproachable)
}
