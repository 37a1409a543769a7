use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::interval::Endpoint;
use crate::quadrature::{integrate_pieces, QuadratureOptions};
use crate::speed::{DiffusionSpec, SpeedDensity};

use super::grid::ChainGrid;
use super::{path_rng, PathSample, Recorder, Scheme, SimConfig, SimError};

/// Birth-death chain on a grid: from `x_k` the diffusion leaves `(x_{k-1}, x_{k+1})`
/// upward with probability `p_up(k)` after a holding time of mean `τ(k)`.
#[derive(Debug, Clone)]
pub struct ChainModel {
    spec: DiffusionSpec<f64>,
    grid: ChainGrid,
    p_up: Vec<f64>,
    tau: Vec<f64>,
}

/// A jump of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WalkEnd {
    Horizon,
    Absorbed { time: f64, end: Endpoint },
}

pub fn build_chain(spec: &DiffusionSpec<f64>, grid: ChainGrid) -> Result<ChainModel, SimError> {
    let n = grid.len();
    let sv = grid.scale_values();
    let mut p_up = vec![0.0; n];
    for k in 1..n - 1 {
        p_up[k] = (sv[k] - sv[k - 1]) / (sv[k + 1] - sv[k - 1]);
    }
    let mut model = ChainModel {
        spec: spec.clone(),
        grid,
        p_up,
        tau: vec![0.0; n],
    };
    let tau: Vec<f64> = {
        let density = model.spec.speed().density().cloned();
        let atoms = model.spec.speed().atoms().to_vec();
        let m = &model;
        let exact = match &density {
            Some(SpeedDensity::Constant(c)) if m.spec.scale().param_antiderivative(0.0).is_some() => Some(*c),
            _ => None,
        };
        (0..n)
            .into_par_iter()
            .map(|k| {
                if k == 0 || k == n - 1 {
                    return 0.0;
                }
                if let Some(c) = exact {
                    return m.green_integral_constant(k, c, &atoms);
                }
                let f = |u: f64| {
                    density
                        .as_ref()
                        .map_or(0.0, |d| d.param_density(m.spec.scale(), u))
                };
                m.green_integral(k, &f, &atoms)
            })
            .collect()
    };
    model.tau = tau;
    Ok(model)
}

impl ChainModel {
    pub fn spec(&self) -> &DiffusionSpec<f64> {
        &self.spec
    }

    pub fn grid(&self) -> &ChainGrid {
        &self.grid
    }

    pub fn p_up(&self) -> &[f64] {
        &self.p_up
    }

    /// Mean holding times; zero at the absorbing ends.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// `∫ G_k(x_k, y) ν(dy)` over the cell `(x_{k-1}, x_{k+1})`, where `ν` has density
    /// `density(u)` in the construction parameter and point masses `atoms` (in state).
    /// `G_k(x, y) = 2(s(x∧y) - s(a))(s(b) - s(x∨y)) / (s(b) - s(a))`.
    pub fn green_integral(&self, k: usize, density: &dyn Fn(f64) -> f64, atoms: &[(f64, f64)]) -> f64 {
        let u = self.grid.params();
        let sv = self.grid.scale_values();
        let (ua, ux, ub) = (u[k - 1], u[k], u[k + 1]);
        let (sa, sx, sb) = (sv[k - 1], sv[k], sv[k + 1]);
        let span = sb - sa;
        let scale = self.spec.scale();
        let opts = QuadratureOptions::default().with_abs_tol(1e-18);
        let left = integrate_pieces(
            |v| {
                let w = density(v);
                if w == 0.0 {
                    return 0.0;
                }
                2.0 * (scale.at_param(v) - sa) * (sb - sx) / span * w
            },
            &self.pieces(ua, ux),
            &opts,
        );
        let right = integrate_pieces(
            |v| {
                let w = density(v);
                if w == 0.0 {
                    return 0.0;
                }
                2.0 * (sx - sa) * (sb - scale.at_param(v)) / span * w
            },
            &self.pieces(ux, ub),
            &opts,
        );
        left.value + right.value + self.green_atoms(k, atoms)
    }

    /// `green_integral` for a constant density `c` in the parameter, in closed form.
    fn green_integral_constant(&self, k: usize, c: f64, atoms: &[(f64, f64)]) -> f64 {
        let u = self.grid.params();
        let sv = self.grid.scale_values();
        let (ua, ux, ub) = (u[k - 1], u[k], u[k + 1]);
        let (sa, sx, sb) = (sv[k - 1], sv[k], sv[k + 1]);
        let scale = self.spec.scale();
        let anti = |v: f64| scale.param_antiderivative(v).unwrap_or(f64::NAN);
        let (fa, fx, fb) = (anti(ua), anti(ux), anti(ub));
        // ∫_a^x (s - s(a)) and ∫_x^b (s(b) - s)
        let left = (fx - fa - sa * (ux - ua)).max(0.0);
        let right = (sb * (ub - ux) - (fb - fx)).max(0.0);
        let span = sb - sa;
        2.0 * c * ((sb - sx) * left + (sx - sa) * right) / span + self.green_atoms(k, atoms)
    }

    fn green_atoms(&self, k: usize, atoms: &[(f64, f64)]) -> f64 {
        let sv = self.grid.scale_values();
        let xs = self.grid.states();
        let (sa, sx, sb) = (sv[k - 1], sv[k], sv[k + 1]);
        let span = sb - sa;
        let scale = self.spec.scale();
        let mut total = 0.0;
        for &(a, w) in atoms {
            if a > xs[k - 1] && a < xs[k + 1] {
                let s = scale.eval(a);
                total += w * 2.0 * (s.min(sx) - sa) * (sb - s.max(sx)) / span;
            }
        }
        total
    }

    fn pieces(&self, a: f64, b: f64) -> Vec<f64> {
        self.spec.breakpoints(a, b)
    }

    /// Index of the grid state `x`.
    pub fn start_index(&self, x: f64) -> Result<usize, SimError> {
        self.grid.index_of(x).ok_or(SimError::StartOffGrid(x))
    }

    /// Runs the chain from index `k0` until `horizon` or absorption, reporting each jump.
    pub fn walk<R: Rng>(&self, k0: usize, horizon: f64, rng: &mut R, mut visit: impl FnMut(ChainEvent)) -> WalkEnd {
        let last = self.grid.len() - 1;
        let mut k = k0;
        let mut t = 0.0;
        loop {
            if k == 0 || k == last {
                let end = if k == 0 { Endpoint::Lo } else { Endpoint::Hi };
                return WalkEnd::Absorbed { time: t, end };
            }
            let e: f64 = rng.sample(Exp1);
            let hold = self.tau[k] * e;
            if t + hold > horizon {
                return WalkEnd::Horizon;
            }
            t += hold;
            let to = if rng.random::<f64>() < self.p_up[k] { k + 1 } else { k - 1 };
            visit(ChainEvent { time: t, from: k, to });
            k = to;
        }
    }

    /// Runs the jump chain from `k0` until it reaches index `lo` or `hi`; true at `hi`.
    pub fn exits_up<R: Rng>(&self, k0: usize, lo: usize, hi: usize, rng: &mut R) -> bool {
        let mut k = k0;
        while k > lo && k < hi {
            k = if rng.random::<f64>() < self.p_up[k] { k + 1 } else { k - 1 };
        }
        k >= hi
    }
}

/// Path `path_index` of the chain from the grid state `x_start`.
pub fn simulate_chain(
    model: &ChainModel,
    x_start: f64,
    config: &SimConfig,
    path_index: u64,
) -> Result<PathSample, SimError> {
    config.validate()?;
    let k0 = model.start_index(x_start)?;
    let states = model.grid.states();
    let mut rng = path_rng(config.seed, path_index);
    let mut rec = Recorder::new(states[k0], config.observe_every);
    let end = model.walk(k0, config.horizon, &mut rng, |ev| rec.jump(ev.time, states[ev.to]));
    let (times, states) = rec.finish(config.horizon);
    Ok(PathSample {
        times,
        states,
        scheme: Scheme::Chain,
        seed: config.seed,
        path_index,
        absorbed: match end {
            WalkEnd::Absorbed { time, end } => Some((time, end)),
            WalkEnd::Horizon => None,
        },
        clamp_events: 0,
    })
}

/// `config.paths` chain paths, in path-index order.
pub fn simulate_chain_paths(model: &ChainModel, x_start: f64, config: &SimConfig) -> Result<Vec<PathSample>, SimError> {
    config.validate()?;
    model.start_index(x_start)?;
    (0..config.paths as u64)
        .into_par_iter()
        .map(|i| simulate_chain(model, x_start, config, i))
        .collect()
}
