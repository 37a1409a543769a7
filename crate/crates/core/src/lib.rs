//! Simulation and verification of one-dimensional diffusions given by a scale function
//! and a speed measure, with emphasis on scale functions carrying a singular
//! (Cantor-type) part.
//!
//! The scale machinery is generic over [`Scalar`] (`f32` or `f64`); simulation and the
//! statistical checks run in `f64`. The aliases below fix the `f64` instantiation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cantor;
pub mod coefficients;
pub mod interval;
pub mod orey;
pub mod quadrature;
pub mod root;
pub mod scalar;
pub mod scale;
pub mod simulate;
pub mod speed;
pub mod verify;

pub use cantor::{
    CantorError, CantorSet, Chart, DistanceChart, Extension, GeneralizedCantorSpec, MeasureOp,
    SingularMeasure,
};
pub use coefficients::{
    check_h4prime_equivalence, classify_boundary, drift_b, is_conservative, m_tilde, sigma,
    smooth_measure_n, validate_hypotheses, validate_hypotheses_with, BoundaryClass,
    CoefficientError, Drift, DriftFunction, HypothesisCheck, HypothesisReport, Sigma,
    SmoothSignedMeasure, Verdict,
};
pub use interval::{Endpoint, Interval, IntervalError};
pub use orey::{DriftFn, OreyError, OreyTable, ScaleLimit};
pub use scalar::Scalar;
pub use scale::{
    abs_cont_part, build_cantor_scale, build_devils_staircase_scale, invert, lebesgue_decompose,
    subspace_scale, AuditSummary, InverseScale, LebesgueDecomposition, ParamId, ScaleError,
    ScaleFunction, StatePoint, TPrimeClass, TPrimeJump,
};
pub use speed::{
    build_orey_scale, build_orey_scale_on, skew_brownian_spec, skew_transform, DensityFn,
    DiffusionSpec, SpecError, SpeedDensity, SpeedMeasure,
};
pub use verify::{Provenance, TestReport, VerifyError};

pub type Interval64 = Interval<f64>;
pub type GeneralizedCantorSpec64 = GeneralizedCantorSpec<f64>;
pub type SingularMeasure64 = SingularMeasure<f64>;
pub type ScaleFunction64 = ScaleFunction<f64>;
pub type InverseScale64 = InverseScale<f64>;
pub type LebesgueDecomposition64 = LebesgueDecomposition<f64>;
pub type SpeedMeasure64 = SpeedMeasure<f64>;
pub type DiffusionSpec64 = DiffusionSpec<f64>;
pub type SmoothSignedMeasure64 = SmoothSignedMeasure<f64>;
pub type Sigma64 = Sigma<f64>;
pub type Drift64 = Drift<f64>;
pub type DriftFunction64 = DriftFunction<f64>;
