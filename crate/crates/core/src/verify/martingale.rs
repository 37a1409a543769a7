use rayon::prelude::*;

use crate::coefficients::{drift_b, sigma, speed_is_energy, Drift};
use crate::simulate::{build_chain, path_rng, ChainGrid, ChainModel, SimConfig, WalkEnd};
use crate::speed::DiffusionSpec;

use super::stats::MeanSe;
use super::{Provenance, TestReport, VerifyError};

const QV_TOLERANCE: f64 = 0.02;
const DRIFT_QV_TOLERANCE: f64 = 0.05;

fn model_for(spec: &DiffusionSpec<f64>, config: &SimConfig, x_start: f64) -> Result<(ChainModel, usize), VerifyError> {
    config.validate()?;
    let grid = ChainGrid::build(spec.scale(), config.window, config.spacing, &[x_start], config.structure_depth)?;
    let model = build_chain(spec, grid)?;
    let k0 = model.start_index(x_start)?;
    Ok((model, k0))
}

fn elapsed(end: WalkEnd, horizon: f64) -> f64 {
    match end {
        WalkEnd::Horizon => horizon,
        WalkEnd::Absorbed { time, .. } => time,
    }
}

#[derive(Debug, Clone)]
pub struct QvOutcome {
    pub report: TestReport,
    /// Realized quadratic variation per path, in path-index order.
    pub samples: Vec<f64>,
    /// `T ∧ ζ` per path, where `ζ` is absorption at the grid ends.
    pub elapsed: Vec<f64>,
}

/// Realized quadratic variation over `[0, T ∧ ζ]`, summed over the chain's exit events,
/// against `T ∧ ζ`. Requires `m = m̃`, where the martingale part is a Brownian motion.
pub fn qv_test(spec: &DiffusionSpec<f64>, config: &SimConfig, x_start: f64) -> Result<QvOutcome, VerifyError> {
    if !speed_is_energy(spec) {
        return Err(VerifyError::NotApplicable(
            "the speed measure is not m̃, so ⟨M⟩ is not t ∧ ζ".into(),
        ));
    }
    let (model, k0) = model_for(spec, config, x_start)?;
    let xs = model.grid().states();
    let runs: Vec<(f64, f64)> = (0..config.paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            let mut qv = 0.0;
            let end = model.walk(k0, config.horizon, &mut rng, |ev| {
                qv += (xs[ev.to] - xs[ev.from]).powi(2);
            });
            (qv, elapsed(end, config.horizon))
        })
        .collect();
    let (samples, elapsed): (Vec<f64>, Vec<f64>) = runs.into_iter().unzip();
    let qv = MeanSe::of(&samples);
    let reference = MeanSe::of(&elapsed).mean;
    let report = TestReport::new(
        "realized QV vs T∧ζ",
        qv.mean,
        reference,
        Provenance::Paper,
        (reference * (1.0 - QV_TOLERANCE), reference * (1.0 + QV_TOLERANCE)),
        format!(
            "{} paths, QV sd {:.4}, se {:.2e}, {} grid points",
            qv.n,
            qv.sd,
            qv.se(),
            xs.len()
        ),
    );
    Ok(QvOutcome {
        report,
        samples,
        elapsed,
    })
}

#[derive(Debug, Clone)]
pub struct DriftOutcome {
    /// Mean of `R_T`, then the QV ratio of `R`.
    pub reports: Vec<TestReport>,
    pub residual: MeanSe,
    pub qv_ratio: f64,
}

impl DriftOutcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// `R_t = X_t - X_0 - ∫_0^t b(X_u) du` must be a centered martingale with quadratic
/// variation `∫ σ²(X_u) du`.
///
/// While the chain holds at `x_k` the drift integral accrues at the rate
/// `D_k / τ_k`, where `D_k = ∫ G_k b dm` is the expected drift integral over one
/// holding period and `τ_k = ∫ G_k dm` its expected length; `∫σ²` accrues at
/// `∫ G_k σ² dm / τ_k`. Both rates are Green-weighted cell averages computed by
/// quadrature from the formulas for `b` and `σ`, independently of the chain's moves.
pub fn drift_consistency_test(
    spec: &DiffusionSpec<f64>,
    config: &SimConfig,
    x_start: f64,
) -> Result<DriftOutcome, VerifyError> {
    let b = match drift_b(spec)? {
        Drift::Function(b) => b,
        Drift::Measure(_) => {
            return Err(VerifyError::NotApplicable(
                "the drift is a measure; no function b to integrate along paths".into(),
            ))
        }
    };
    let sig = sigma(spec)?;
    let (model, k0) = model_for(spec, config, x_start)?;
    let density = spec.speed().density().cloned().ok_or_else(|| {
        VerifyError::NotApplicable("speed measure has no density".into())
    })?;
    let scale = spec.scale();
    let n = model.grid().len();
    let rates: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            if k == 0 || k == n - 1 {
                return (0.0, 0.0);
            }
            let tau = model.tau()[k];
            let d = model.green_integral(
                k,
                &|u| {
                    let w = b.at_param(u);
                    if w == 0.0 {
                        0.0
                    } else {
                        w * density.param_density(scale, u)
                    }
                },
                &[],
            );
            let q = model.green_integral(
                k,
                &|u| sig.squared_at_param(u) * density.param_density(scale, u),
                &[],
            );
            (d / tau, q / tau)
        })
        .collect();
    let xs = model.grid().states();
    let horizon = config.horizon;
    let runs: Vec<(f64, f64, f64)> = (0..config.paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, i);
            let (mut comp, mut isig, mut qv) = (0.0, 0.0, 0.0);
            let mut last = 0.0;
            let mut k = k0;
            let end = model.walk(k0, horizon, &mut rng, |ev| {
                let hold = ev.time - last;
                comp += hold * rates[ev.from].0;
                isig += hold * rates[ev.from].1;
                qv += (xs[ev.to] - xs[ev.from]).powi(2);
                last = ev.time;
                k = ev.to;
            });
            if end == WalkEnd::Horizon {
                let hold = horizon - last;
                comp += hold * rates[k].0;
                isig += hold * rates[k].1;
            }
            (xs[k] - xs[k0] - comp, qv, isig)
        })
        .collect();
    let r: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let residual = MeanSe::of(&r);
    let mean_qv = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    let mean_sig = runs.iter().map(|r| r.2).sum::<f64>() / runs.len() as f64;
    let qv_ratio = mean_qv / mean_sig;
    let band = 3.0 * residual.se();
    let reports = vec![
        TestReport::new(
            "drift residual mean E[R_T]",
            residual.mean,
            0.0,
            Provenance::Derived,
            (-band, band),
            format!("{} paths, se {:.3e}", residual.n, residual.se()),
        ),
        TestReport::new(
            "drift residual QV / ∫σ²",
            qv_ratio,
            1.0,
            Provenance::Derived,
            (1.0 - DRIFT_QV_TOLERANCE, 1.0 + DRIFT_QV_TOLERANCE),
            format!("mean QV {mean_qv:.5}, mean ∫σ² {mean_sig:.5}"),
        ),
    ];
    Ok(DriftOutcome {
        reports,
        residual,
        qv_ratio,
    })
}
