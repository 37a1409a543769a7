//! Turning a spec block into diffusion specs.

use std::sync::Arc;

use scalesim_core::*;

use crate::config::{ExperimentConfig, ExtensionChoice, OreyDrift, SpecConfig, SpeedChoice};
use crate::CliError;

/// One simulated diffusion and its label in outputs.
#[derive(Clone)]
pub struct Member {
    pub label: String,
    pub spec: DiffusionSpec64,
}

/// The configured spec and the members of its family (the spec itself when no family
/// is configured).
pub struct Built {
    pub base: DiffusionSpec64,
    pub members: Vec<Member>,
}

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn build_spec(spec: &SpecConfig) -> Result<DiffusionSpec64, CliError> {
    match spec {
        SpecConfig::Brownian => Ok(DiffusionSpec::brownian()),
        SpecConfig::Cantor {
            depth,
            first_gap,
            ratio,
            base,
            extension,
            cap,
            speed,
        } => {
            let base = Interval64::new(base[0], base[1]).map_err(cfg_err)?;
            let set = GeneralizedCantorSpec64::geometric(base, *first_gap, *ratio, *depth);
            let ext = match extension {
                ExtensionChoice::Distance => Extension::Distance,
                ExtensionChoice::Saturating => Extension::Saturating(cap.unwrap_or(f64::NAN)),
            };
            let (s, _) = build_cantor_scale(set, ext).map_err(cfg_err)?;
            with_speed(s, *speed)
        }
        SpecConfig::Staircase { depth, speed } => {
            let (s, _) = build_devils_staircase_scale::<f64>(*depth).map_err(cfg_err)?;
            with_speed(s, *speed)
        }
        SpecConfig::Orey {
            drift,
            beta,
            amplitude,
            frequency,
            tolerance,
        } => {
            let b: DriftFn<f64> = match drift {
                OreyDrift::Constant => {
                    let beta = *beta;
                    Arc::new(move |_| beta)
                }
                OreyDrift::Sin => {
                    let (a, w) = (*amplitude, *frequency);
                    Arc::new(move |x: f64| a * (w * x).sin())
                }
            };
            let (s, m) = build_orey_scale(b, *tolerance).map_err(cfg_err)?;
            DiffusionSpec::new(s, m).map_err(cfg_err)
        }
        SpecConfig::Skew { alpha } => skew_brownian_spec(*alpha).map_err(cfg_err),
        SpecConfig::SubspaceOf { c, parent } => {
            let parent = build_spec(parent)?;
            let s = parent.scale();
            let sc = subspace_scale(s, c.resolve(s.singular_mass())?).map_err(cfg_err)?;
            parent.with_scale(sc).map_err(cfg_err)
        }
    }
}

fn with_speed(s: ScaleFunction64, speed: SpeedChoice) -> Result<DiffusionSpec64, CliError> {
    match speed {
        SpeedChoice::Energy => Ok(DiffusionSpec::with_energy_speed(s)),
        SpeedChoice::Lebesgue => {
            let m = SpeedMeasure::lebesgue(s.domain());
            DiffusionSpec::new(s, m).map_err(cfg_err)
        }
    }
}

/// Members `s_c` share the speed measure of the base spec.
pub fn build(cfg: &ExperimentConfig) -> Result<Built, CliError> {
    let base = build_spec(&cfg.spec)?;
    let members = match &cfg.family {
        None => vec![Member {
            label: cfg.spec.kind().to_string(),
            spec: base.clone(),
        }],
        Some(family) => {
            if family.c.is_empty() {
                return Err(CliError::Config("family.c is empty".into()));
            }
            let s = base.scale();
            let kappa = s.singular_mass();
            family
                .c
                .iter()
                .map(|c| {
                    let sc = subspace_scale(s, c.resolve(kappa)?)
                        .map_err(|e| CliError::Config(format!("family member {}: {e}", c.label())))?;
                    Ok(Member {
                        label: c.label(),
                        spec: base.with_scale(sc).map_err(cfg_err)?,
                    })
                })
                .collect::<Result<_, CliError>>()?
        }
    };
    Ok(Built { base, members })
}

/// A pair of construction-parameter values mapped to states.
pub fn param_pair(s: &ScaleFunction64, p: [f64; 2]) -> (f64, f64) {
    (s.state(p[0]).x, s.state(p[1]).x)
}

pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for ch in label.chars() {
        match ch {
            'κ' => out.push_str("kappa"),
            c if c.is_ascii_alphanumeric() => out.push(c.to_ascii_lowercase()),
            '.' => out.push('p'),
            _ => {
                if !out.ends_with('_') {
                    out.push('_');
                }
            }
        }
    }
    out.trim_matches('_').to_string()
}
