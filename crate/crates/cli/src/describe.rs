//! Analytic summary of a configured spec, without simulation.

use std::fmt::Write as _;

use scalesim_core::coefficients::speed_is_energy;
use scalesim_core::verify::exit_probability;
use scalesim_core::*;

use crate::config::{ExperimentConfig, OreyDrift, SpecConfig};
use crate::run::{distinctness_window, sim_window};
use crate::specs::{self, Member};
use crate::CliError;

pub fn describe(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let built = specs::build(cfg)?;
    let mut out = String::new();
    let _ = writeln!(out, "spec: {}", cfg.spec.kind());
    let _ = writeln!(out, "seed: {}", cfg.seed);
    let window = sim_window(cfg, &built.base);
    let _ = writeln!(out, "simulation window: [{}, {}]", window.0, window.1);
    let exit_window = distinctness_window(cfg, &built.base);
    for m in &built.members {
        let _ = writeln!(out);
        member(&mut out, cfg, m, exit_window)?;
    }
    Ok(out)
}

fn member(out: &mut String, cfg: &ExperimentConfig, m: &Member, exit_window: Option<(f64, f64, f64)>) -> Result<(), CliError> {
    let spec = &m.spec;
    let s = spec.scale();
    let _ = writeln!(out, "[{}]", m.label);
    let _ = writeln!(out, "  scale: {} on {}, anchor {}", s.kind_name(), spec.interval(), s.anchor());
    let _ = writeln!(out, "  κ mass: {}", s.singular_mass());
    let _ = writeln!(out, "  m = m̃: {}", if speed_is_energy(spec) { "yes" } else { "no" });

    let r = validate_hypotheses(spec);
    for (name, c) in r.entries() {
        let mark = if c.verdict.holds() { "✓" } else { "✗" };
        let _ = writeln!(out, "  {name}: {mark} {} ({})", c.verdict, c.witness);
    }

    let _ = writeln!(out, "  σ: {}", sigma_text(spec));
    let _ = writeln!(out, "  b: {}", drift_text(&cfg.spec, spec));

    for end in [Endpoint::Lo, Endpoint::Hi] {
        let class = match classify_boundary(spec, end) {
            Ok(c) => c.as_str().to_string(),
            Err(e) => format!("inconclusive ({e})"),
        };
        let side = if end == Endpoint::Lo { "lower" } else { "upper" };
        let _ = writeln!(out, "  {side} boundary: {class}");
    }

    if let Some((a, x, b)) = exit_window {
        match exit_probability(spec, a, x, b) {
            Ok(p) => {
                let _ = writeln!(out, "  P_x(exit at b) on (a, x, b) = ({a}, {x}, {b}): {p}");
            }
            Err(e) => {
                let _ = writeln!(out, "  exit window ({a}, {x}, {b}): {e}");
            }
        }
    }
    Ok(())
}

fn sigma_text(spec: &DiffusionSpec64) -> String {
    match sigma(spec) {
        Ok(sig) if sig.is_unit() => "σ ≡ 1".into(),
        Ok(sig) => {
            let e = spec.scale().anchor();
            format!("σ² = (t′∘s)/h; σ({e}) = {}", sig.eval(e))
        }
        Err(e) => format!("undefined ({e})"),
    }
}

fn drift_text(cfg: &SpecConfig, spec: &DiffusionSpec64) -> String {
    let closed = match cfg {
        SpecConfig::Brownian => Some("b = 0".to_string()),
        SpecConfig::Orey {
            drift: OreyDrift::Constant,
            beta,
            ..
        } => Some(format!("b ≡ {beta}")),
        SpecConfig::Orey {
            drift: OreyDrift::Sin,
            amplitude,
            frequency,
            ..
        } => Some(format!("b(x) = {amplitude}·sin({frequency}·x)")),
        _ => None,
    };
    match drift_b(spec) {
        Ok(Drift::Function(b)) => {
            let e = spec.scale().anchor();
            match closed {
                Some(c) => c,
                None => format!("b = ½ (t″/t′)∘s off the singular support; b({}) = {}", e + 1.0, b.eval(e + 1.0)),
            }
        }
        Ok(Drift::Measure(mu)) => {
            let atoms: Vec<String> = mu.atoms().iter().map(|(x, w)| format!("{w}·δ_{x}")).collect();
            format!("a measure, b·m = {} (local-time drift)", atoms.join(" + "))
        }
        Err(e) => format!("undefined ({e})"),
    }
}
