use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::coefficients::{drift_b, sigma, CoefficientError, Drift, DriftFunction, Sigma};
use crate::interval::Endpoint;
use crate::speed::DiffusionSpec;

use super::{path_rng, PathSample, Recorder, Scheme, SimConfig, SimError};

fn coefficients(spec: &DiffusionSpec<f64>) -> Result<(DriftFunction<f64>, Sigma<f64>), SimError> {
    let b = match drift_b(spec)? {
        Drift::Function(f) => f,
        Drift::Measure(_) => {
            return Err(CoefficientError::Hypothesis {
                hypothesis: "H4'",
                reason: "the drift is a measure, not a function; use the chain".into(),
            }
            .into())
        }
    };
    Ok((b, sigma(spec)?))
}

fn euler_path(
    spec: &DiffusionSpec<f64>,
    b: &DriftFunction<f64>,
    sig: &Sigma<f64>,
    x_start: f64,
    config: &SimConfig,
    path_index: u64,
) -> PathSample {
    let dom = spec.interval();
    let mut rng = path_rng(config.seed, path_index);
    let mut rec = Recorder::new(x_start, config.observe_every);
    let steps = (config.horizon / config.euler_step).ceil() as u64;
    let mut x = x_start;
    let mut t = 0.0;
    let mut clamps = 0u64;
    let mut absorbed = None;
    for i in 0..steps {
        let t_next = ((i + 1) as f64 * config.euler_step).min(config.horizon);
        let h = t_next - t;
        let mut drift = b.eval(x);
        if drift.abs() > config.drift_cap || !drift.is_finite() {
            clamps += 1;
            drift = if drift.is_nan() {
                0.0
            } else {
                drift.clamp(-config.drift_cap, config.drift_cap)
            };
        }
        let z: f64 = rng.sample(StandardNormal);
        x += drift * h + sig.eval(x) * h.sqrt() * z;
        t = t_next;
        if !dom.contains(x) {
            let end = if x <= dom.lo() { Endpoint::Lo } else { Endpoint::Hi };
            x = dom.end(end);
            rec.jump(t, x);
            absorbed = Some((t, end));
            break;
        }
        rec.jump(t, x);
    }
    let (times, states) = rec.finish(config.horizon);
    PathSample {
        times,
        states,
        scheme: Scheme::Euler,
        seed: config.seed,
        path_index,
        absorbed,
        clamp_events: clamps,
    }
}

/// Euler-Maruyama path `path_index` of `dX = b(X)dt + σ(X)dB`. Refused when the drift
/// is a measure or `t'` is not of bounded variation.
pub fn simulate_euler(
    spec: &DiffusionSpec<f64>,
    x_start: f64,
    config: &SimConfig,
    path_index: u64,
) -> Result<PathSample, SimError> {
    config.validate()?;
    let (b, sig) = coefficients(spec)?;
    Ok(euler_path(spec, &b, &sig, x_start, config, path_index))
}

pub fn simulate_euler_paths(
    spec: &DiffusionSpec<f64>,
    x_start: f64,
    config: &SimConfig,
) -> Result<Vec<PathSample>, SimError> {
    config.validate()?;
    if !spec.interval().contains(x_start) {
        return Err(SimError::Config(format!("start {x_start} lies outside {}", spec.interval())));
    }
    let (b, sig) = coefficients(spec)?;
    Ok((0..config.paths as u64)
        .into_par_iter()
        .map(|i| euler_path(spec, &b, &sig, x_start, config, i))
        .collect())
}
