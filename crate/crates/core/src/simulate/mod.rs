//! Sample paths: an embedded birth-death chain on a grid whose exit laws are exact, an
//! Euler-Maruyama baseline for the coefficient SDE, and the skew Brownian motion wrapper.
//!
//! Simulation runs in `f64`. Each path owns a ChaCha8 stream selected by its index, so a
//! batch is reproducible bit for bit regardless of how rayon schedules it.

mod chain;
mod euler;
mod grid;

pub use chain::{build_chain, simulate_chain, simulate_chain_paths, ChainEvent, ChainModel, WalkEnd};
pub use euler::{simulate_euler, simulate_euler_paths};
pub use grid::{ChainGrid, Spacing};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coefficients::CoefficientError;
use crate::interval::Endpoint;
use crate::scale::ScaleError;
use crate::speed::{skew_brownian_spec, SpecError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("grid is degenerate at index {index}: scale values {left} and {right} do not increase")]
    DegenerateGrid { index: usize, left: f64, right: f64 },
    #[error("grid needs at least three points, got {0}")]
    GridTooSmall(usize),
    #[error("start {0} is not a grid state")]
    StartOffGrid(f64),
    #[error("skew parameter must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Chain,
    Euler,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Chain => "chain",
            Scheme::Euler => "euler",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Grid spacing for the chain.
    pub spacing: Spacing,
    /// State window covered by the chain grid; the grid absorbs at its ends.
    pub window: (f64, f64),
    /// Extra construction generations whose gap endpoints join the grid.
    pub structure_depth: u32,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub euler_step: f64,
    /// Cap on `|b|` in the Euler scheme; every capped step is counted.
    pub drift_cap: f64,
    /// Record the path on `0, dt, 2dt, ...` instead of at every event.
    pub observe_every: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            spacing: Spacing::State(0.05),
            window: (-6.0, 6.0),
            structure_depth: 0,
            horizon: 1.0,
            paths: 1000,
            seed: 0,
            scheme: Scheme::Chain,
            euler_step: 1e-3,
            drift_cap: 1e6,
            observe_every: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.spacing.value() > 0.0 && self.spacing.value().is_finite()) {
            return bad("grid spacing must be positive");
        }
        if !(self.window.0 < self.window.1) {
            return bad("grid window must satisfy lo < hi");
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be nonnegative and finite");
        }
        if self.paths == 0 {
            return bad("path count must be at least 1");
        }
        if !(self.euler_step > 0.0 && self.euler_step.is_finite()) {
            return bad("euler step must be positive");
        }
        if !(self.drift_cap > 0.0) {
            return bad("drift cap must be positive");
        }
        if let Some(dt) = self.observe_every {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("observation step must be positive");
            }
        }
        Ok(())
    }
}

/// One trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub scheme: Scheme,
    pub seed: u64,
    pub path_index: u64,
    /// Time and end at which the path was absorbed.
    pub absorbed: Option<(f64, Endpoint)>,
    /// Euler steps whose drift hit the cap.
    pub clamp_events: u64,
}

impl PathSample {
    pub fn final_state(&self) -> f64 {
        *self.states.last().expect("paths are never empty")
    }

    /// Sum of squared increments.
    pub fn realized_qv(&self) -> f64 {
        self.states.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
    }
}

/// The RNG of path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Records a piecewise-constant path either at events or on an observation grid.
pub(crate) struct Recorder {
    times: Vec<f64>,
    states: Vec<f64>,
    every: Option<f64>,
    next_obs: usize,
    current: f64,
}

impl Recorder {
    pub(crate) fn new(x0: f64, every: Option<f64>) -> Self {
        Self {
            times: vec![0.0],
            states: vec![x0],
            every,
            next_obs: 1,
            current: x0,
        }
    }

    /// The state changes to `x` at time `t`.
    pub(crate) fn jump(&mut self, t: f64, x: f64) {
        match self.every {
            None => {
                self.times.push(t);
                self.states.push(x);
            }
            Some(dt) => self.fill_until(t, dt, false),
        }
        self.current = x;
    }

    fn fill_until(&mut self, t: f64, dt: f64, inclusive: bool) {
        loop {
            let obs = self.next_obs as f64 * dt;
            if obs < t || (inclusive && obs <= t) {
                self.times.push(obs);
                self.states.push(self.current);
                self.next_obs += 1;
            } else {
                break;
            }
        }
    }

    pub(crate) fn finish(mut self, horizon: f64) -> (Vec<f64>, Vec<f64>) {
        match self.every {
            None => {
                if *self.times.last().unwrap() < horizon {
                    self.times.push(horizon);
                    self.states.push(self.current);
                }
            }
            Some(dt) => self.fill_until(horizon * (1.0 + 1e-12), dt, true),
        }
        (self.times, self.states)
    }
}

/// α-skew Brownian motion from `x_start`, simulated by the chain on a state grid.
pub fn simulate_skew_bm(alpha: f64, x_start: f64, config: &SimConfig) -> Result<Vec<PathSample>, SimError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SimError::BadAlpha(alpha));
    }
    config.validate()?;
    let spec = skew_brownian_spec(alpha)?;
    let grid = ChainGrid::build(spec.scale(), config.window, config.spacing, &[x_start], config.structure_depth)?;
    let model = build_chain(&spec, grid)?;
    simulate_chain_paths(&model, x_start, config)
}
