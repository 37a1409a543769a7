//! Statistical and exact checks on simulated paths: exit laws that tell the subspace
//! family apart, the Brownian martingale part, the drift compensator and the skew
//! local-time drift.
//!
//! Every check yields [`TestReport`]s whose pass flag is membership of the observed
//! value in the stated band.

mod exits;
mod martingale;
mod skew;
mod stats;

pub use exits::{
    distinctness_test, exit_frequency, exit_law_check, exit_probability, DistinctnessOutcome, ExitExperiment,
    ExitLawOutcome, ExitWindow, Member,
};
pub use martingale::{drift_consistency_test, qv_test, DriftOutcome, QvOutcome};
pub use skew::{skew_localtime_test, SkewOutcome};
pub use stats::{ks_two_sample, normal_upper_tail, two_proportion_z, MeanSe};

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::coefficients::CoefficientError;
use crate::simulate::SimError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("degenerate exit window (a, x, b) = ({a}, {x}, {b}): {reason}")]
    Window { a: f64, x: f64, b: f64, reason: String },
    #[error("window cannot separate the family at this sample size: {0}; widen the window or raise the path count")]
    Validator(String),
    #[error("test not applicable: {0}")]
    NotApplicable(String),
    #[error("sample is empty")]
    EmptySample,
    #[error("skew parameter must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("experiment needs at least one member and one path")]
    EmptyExperiment,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
}

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Stated in the source text.
    Paper,
    /// Holds by definition.
    Trivial,
    /// Computed from an independent oracle.
    Derived,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Paper => "[PAPER]",
            Provenance::Trivial => "[TRIVIAL]",
            Provenance::Derived => "[DERIVED]",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One check. `pass` is true exactly when `band.0 <= observed <= band.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub name: String,
    pub observed: f64,
    pub reference: f64,
    pub provenance: Provenance,
    pub band: (f64, f64),
    pub pass: bool,
    pub note: String,
}

impl TestReport {
    pub fn new(
        name: impl Into<String>,
        observed: f64,
        reference: f64,
        provenance: Provenance,
        band: (f64, f64),
        note: impl Into<String>,
    ) -> Self {
        let pass = observed >= band.0 && observed <= band.1;
        Self {
            name: name.into(),
            observed,
            reference,
            provenance,
            band,
            pass,
            note: note.into(),
        }
    }

    /// Header of [`TestReport::record`].
    pub const RECORD_HEADER: [&'static str; 8] =
        ["name", "observed", "reference", "provenance", "band_lo", "band_hi", "pass", "note"];

    /// Flat record; numbers carry 17 significant digits.
    pub fn record(&self) -> [String; 8] {
        [
            self.name.clone(),
            sig17(self.observed),
            sig17(self.reference),
            self.provenance.tag().to_string(),
            sig17(self.band.0),
            sig17(self.band.1),
            self.pass.to_string(),
            self.note.clone(),
        ]
    }
}

/// `x` with 17 significant digits, enough to round-trip any `f64`.
pub fn sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Fixed-width table for terminals.
pub fn render_table(reports: &[TestReport]) -> String {
    let w = reports.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<w$}  {:>14}  {:>14}  {:<9}  {:>31}  result",
        "test", "observed", "reference", "source", "band"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<w$}  {:>14.6e}  {:>14.6e}  {:<9}  [{:>13.6e}, {:>13.6e}]  {}",
            r.name,
            r.observed,
            r.reference,
            r.provenance.tag(),
            r.band.0,
            r.band.1,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    out
}

/// Independent seed for sub-experiment `stream` of `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_is_band_membership() {
        let r = TestReport::new("x", 1.0, 1.0, Provenance::Trivial, (0.5, 1.0), "");
        assert!(r.pass);
        let r = TestReport::new("x", 1.0 + 1e-12, 1.0, Provenance::Trivial, (0.5, 1.0), "");
        assert!(!r.pass);
        let r = TestReport::new("x", f64::NAN, 1.0, Provenance::Trivial, (0.5, 1.0), "");
        assert!(!r.pass);
    }

    #[test]
    fn records_round_trip() {
        let v = 0.1 + 0.2;
        assert_eq!(sig17(v).parse::<f64>().unwrap(), v);
        let r = TestReport::new("qv", v, 1.0, Provenance::Paper, (0.98, 1.02), "n");
        assert_eq!(r.record()[3], "[PAPER]");
        assert!(render_table(&[r]).contains("FAIL"));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
