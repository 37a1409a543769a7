use crate::scale::ScaleFunction;

use super::SimError;

/// How the chain grid is spaced between its forced points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spacing {
    /// Uniform in the state `x`.
    State(f64),
    /// Uniform in the scale value `s(x)`.
    Scale(f64),
    /// Uniform in the construction parameter (the natural scale for fat-Cantor scales).
    Param(f64),
}

impl Spacing {
    pub fn value(self) -> f64 {
        match self {
            Spacing::State(d) | Spacing::Scale(d) | Spacing::Param(d) => d,
        }
    }
}

/// Grid states `x_0 < ... < x_K` with their scale values; the chain absorbs at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainGrid {
    params: Vec<f64>,
    states: Vec<f64>,
    scale_values: Vec<f64>,
}

impl ChainGrid {
    /// Grid from construction parameters, which must be strictly increasing.
    pub fn from_params(scale: &ScaleFunction<f64>, params: Vec<f64>) -> Result<Self, SimError> {
        if params.len() < 3 {
            return Err(SimError::GridTooSmall(params.len()));
        }
        let states: Vec<f64> = params.iter().map(|&u| scale.state(u).x).collect();
        let scale_values: Vec<f64> = params.iter().map(|&u| scale.at_param(u)).collect();
        for k in 1..params.len() {
            let ok = params[k] > params[k - 1] && scale_values[k] > scale_values[k - 1];
            if !ok || !scale_values[k].is_finite() {
                return Err(SimError::DegenerateGrid {
                    index: k,
                    left: scale_values[k - 1],
                    right: scale_values[k],
                });
            }
        }
        Ok(Self {
            params,
            states,
            scale_values,
        })
    }

    pub fn from_states(scale: &ScaleFunction<f64>, states: &[f64]) -> Result<Self, SimError> {
        Self::from_params(scale, states.iter().map(|&x| scale.param(x)).collect())
    }

    /// Lattice through the anchor with the given spacing, cut to `window`, plus the window
    /// ends, the `extra` states and the construction points down to `structure_depth`.
    pub fn build(
        scale: &ScaleFunction<f64>,
        window: (f64, f64),
        spacing: Spacing,
        extra: &[f64],
        structure_depth: u32,
    ) -> Result<Self, SimError> {
        let dom = scale.domain();
        let (lo, hi) = window;
        if !(lo < hi && dom.contains_closed(lo) && dom.contains_closed(hi)) {
            return Err(SimError::Config(format!(
                "grid window ({lo}, {hi}) must lie in the domain {dom}"
            )));
        }
        let (ulo, uhi) = (scale.param(lo), scale.param(hi));
        let d = spacing.value();
        if !(d > 0.0) {
            return Err(SimError::Config("grid spacing must be positive".into()));
        }
        let mut pts: Vec<(f64, bool)> = vec![(ulo, true), (uhi, true)];
        match spacing {
            Spacing::Param(_) => {
                let ue = scale.anchor_param();
                lattice(ue, d, ulo, uhi, |u| pts.push((u, false)));
            }
            Spacing::State(_) => {
                let e = scale.anchor();
                lattice(e, d, lo, hi, |x| pts.push((scale.param(x), false)));
            }
            Spacing::Scale(_) => {
                let (ylo, yhi) = (scale.at_param(ulo), scale.at_param(uhi));
                lattice(0.0, d, ylo, yhi, |y| pts.push((scale.param_of_scale(y), false)));
            }
        }
        for &x in extra {
            if x >= lo && x <= hi {
                pts.push((scale.param(x), true));
            }
        }
        for x in scale.structural_points(structure_depth) {
            if x > lo && x < hi {
                pts.push((scale.param(x), true));
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tol = 1e-9 * d.min(1.0);
        let mut kept: Vec<(f64, bool)> = Vec::with_capacity(pts.len());
        for p in pts {
            if p.0 < ulo || p.0 > uhi {
                continue;
            }
            match kept.last_mut() {
                Some(last) if (p.0 - last.0).abs() <= tol * (1.0 + p.0.abs()) => {
                    if p.1 && !last.1 {
                        *last = p;
                    }
                }
                _ => kept.push(p),
            }
        }
        Self::from_params(scale, kept.into_iter().map(|p| p.0).collect())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn scale_values(&self) -> &[f64] {
        &self.scale_values
    }

    /// Index of the grid state equal to `x` up to rounding.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let i = self.states.partition_point(|&s| s < x);
        let close = |j: usize| {
            let s = self.states[j];
            (s - x).abs() <= 1e-12 * (1.0 + x.abs())
        };
        if i < self.states.len() && close(i) {
            Some(i)
        } else if i > 0 && close(i - 1) {
            Some(i - 1)
        } else {
            None
        }
    }
}

/// Calls `push` for `origin + i·d` strictly inside `(lo, hi)`.
fn lattice(origin: f64, d: f64, lo: f64, hi: f64, mut push: impl FnMut(f64)) {
    let first = ((lo - origin) / d).floor() as i64;
    let last = ((hi - origin) / d).ceil() as i64;
    for i in first..=last {
        let v = origin + i as f64 * d;
        if v > lo && v < hi {
            push(v);
        }
    }
}
