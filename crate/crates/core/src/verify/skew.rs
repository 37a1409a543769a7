use rayon::prelude::*;

use crate::simulate::{build_chain, path_rng, ChainGrid, SimConfig};
use crate::speed::skew_brownian_spec;

use super::stats::{normal_upper_tail, MeanSe};
use super::{Provenance, TestReport, VerifyError};

/// Confidence demanded of the sign check.
const SIGN_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct SkewOutcome {
    pub reports: Vec<TestReport>,
    /// `X_T` per path, in path-index order.
    pub finals: Vec<f64>,
    pub mean: MeanSe,
    pub reference: f64,
}

impl SkewOutcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Mean displacement of α-skew Brownian motion from 0 against `(1 - 2α)√(2T/π)`,
/// within 3 standard errors. Unless `α = 1/2`, also checks that the sample mean has the
/// sign of `1 - 2α` with one-sided confidence 0.99.
///
/// The local time itself is never estimated; the mean displacement is its
/// convention-free consequence.
pub fn skew_localtime_test(alpha: f64, config: &SimConfig) -> Result<SkewOutcome, VerifyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(VerifyError::BadAlpha(alpha));
    }
    config.validate()?;
    let spec = skew_brownian_spec(alpha).map_err(crate::simulate::SimError::from)?;
    let grid = ChainGrid::build(spec.scale(), config.window, config.spacing, &[0.0], config.structure_depth)?;
    let model = build_chain(&spec, grid)?;
    let k0 = model.start_index(0.0)?;
    let xs = model.grid().states();
    let finals: Vec<f64> = (0..config.paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            let mut k = k0;
            model.walk(k0, config.horizon, &mut rng, |ev| k = ev.to);
            xs[k]
        })
        .collect();
    let mean = MeanSe::of(&finals);
    let drift = 1.0 - 2.0 * alpha;
    let reference = drift * (2.0 * config.horizon / std::f64::consts::PI).sqrt();
    let se = mean.se();
    let symmetric = drift.abs() < 1e-12;
    let mut reports = vec![TestReport::new(
        format!("skew mean displacement alpha={alpha}"),
        mean.mean,
        reference,
        if symmetric { Provenance::Paper } else { Provenance::Derived },
        (reference - 3.0 * se, reference + 3.0 * se),
        format!("{} paths, T = {}, se {:.3e}", mean.n, config.horizon, se),
    )];
    if !symmetric {
        // confidence that the true mean has the sign of 1 - 2α
        let confidence = 1.0 - normal_upper_tail(drift.signum() * mean.mean / se);
        reports.push(TestReport::new(
            format!("skew displacement sign alpha={alpha}"),
            confidence,
            SIGN_CONFIDENCE,
            Provenance::Derived,
            (SIGN_CONFIDENCE, 1.0),
            format!("sign of 1 - 2α is {}", if drift > 0.0 { "+" } else { "-" }),
        ));
    }
    Ok(SkewOutcome {
        reports,
        finals,
        mean,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::Spacing;

    #[test]
    fn skew_mean_and_sign() {
        let cfg = SimConfig {
            spacing: Spacing::State(0.1),
            window: (-6.0, 6.0),
            paths: 20_000,
            seed: 3,
            ..SimConfig::default()
        };
        let out = skew_localtime_test(0.2, &cfg).unwrap();
        assert!(out.pass(), "{:?}", out.reports);
        assert_eq!(out.reports.len(), 2);
        let half = skew_localtime_test(0.5, &cfg).unwrap();
        assert_eq!(half.reports.len(), 1);
        assert!(skew_localtime_test(1.0, &cfg).is_err());
    }
}
