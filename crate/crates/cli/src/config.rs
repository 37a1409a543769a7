//! Experiment configuration: TOML with a mandatory `format_version` and `seed`.

use std::path::Path;

use scalesim_core::simulate::{Scheme, SimConfig, Spacing};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Names accepted in `verify.tests`.
pub const TEST_NAMES: [&str; 5] = ["qv", "drift", "distinctness", "exit_law", "skew_mean"];
/// Names accepted in `verify.require`.
pub const HYPOTHESIS_NAMES: [&str; 7] = ["h1", "h2", "h3", "h4", "h3prime", "h4prime", "drift_density"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub seed: u64,
    pub spec: SpecConfig,
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedChoice {
    /// `m̃`, the energy measure of the scale.
    Energy,
    Lebesgue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionChoice {
    Distance,
    Saturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OreyDrift {
    /// `b ≡ beta`
    Constant,
    /// `b(x) = amplitude · sin(frequency · x)`
    Sin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpecConfig {
    Brownian,
    Cantor {
        #[serde(default = "default_cantor_depth")]
        depth: u32,
        #[serde(default = "quarter")]
        first_gap: f64,
        #[serde(default = "quarter")]
        ratio: f64,
        #[serde(default = "unit_base")]
        base: [f64; 2],
        #[serde(default = "distance")]
        extension: ExtensionChoice,
        cap: Option<f64>,
        #[serde(default = "energy")]
        speed: SpeedChoice,
    },
    Staircase {
        #[serde(default = "default_staircase_depth")]
        depth: u32,
        #[serde(default = "lebesgue")]
        speed: SpeedChoice,
    },
    Orey {
        drift: OreyDrift,
        #[serde(default)]
        beta: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default = "default_orey_tolerance")]
        tolerance: f64,
    },
    Skew {
        alpha: f64,
    },
    SubspaceOf {
        c: CValue,
        parent: Box<SpecConfig>,
    },
}

impl SpecConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            SpecConfig::Brownian => "brownian",
            SpecConfig::Cantor { .. } => "cantor",
            SpecConfig::Staircase { .. } => "staircase",
            SpecConfig::Orey { .. } => "orey",
            SpecConfig::Skew { .. } => "skew",
            SpecConfig::SubspaceOf { .. } => "subspace-of",
        }
    }
}

/// Singular mass of a subspace member: a number, or `kappa`, `kappa/D`, `F*kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CValue {
    Number(f64),
    Expr(String),
}

impl CValue {
    pub fn resolve(&self, kappa: f64) -> Result<f64, CliError> {
        let bad = |s: &str| CliError::Config(format!("cannot read c value `{s}`: use a number, kappa, kappa/D or F*kappa"));
        match self {
            CValue::Number(c) => Ok(*c),
            CValue::Expr(raw) => {
                let s = raw.trim().replace('κ', "kappa");
                let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(raw));
                if s == "kappa" {
                    Ok(kappa)
                } else if let Some(d) = s.strip_prefix("kappa/") {
                    Ok(kappa / num(d)?)
                } else if let Some(f) = s.strip_suffix("*kappa") {
                    Ok(num(f)? * kappa)
                } else {
                    num(&s)
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            CValue::Number(c) => format!("c={c}"),
            CValue::Expr(s) => format!("c={}", s.trim()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// Singular masses of the members `s_c`.
    pub c: Vec<CValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingKind {
    State,
    Scale,
    Param,
}

impl SpacingKind {
    pub fn with(self, d: f64) -> Spacing {
        match self {
            SpacingKind::State => Spacing::State(d),
            SpacingKind::Scale => Spacing::Scale(d),
            SpacingKind::Param => Spacing::Param(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Chain,
    Euler,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub scheme: SchemeChoice,
    pub spacing: f64,
    pub spacing_kind: SpacingKind,
    /// State window; `window_param` gives it in the construction parameter instead.
    pub window: Option<[f64; 2]>,
    pub window_param: Option<[f64; 2]>,
    pub structure_depth: u32,
    pub horizon: f64,
    pub paths: usize,
    pub euler_step: f64,
    pub drift_cap: f64,
    /// Start state; the anchor of the scale when absent.
    pub x_start: Option<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            scheme: SchemeChoice::Chain,
            spacing: d.spacing.value(),
            spacing_kind: SpacingKind::State,
            window: None,
            window_param: None,
            structure_depth: d.structure_depth,
            horizon: d.horizon,
            paths: d.paths,
            euler_step: d.euler_step,
            drift_cap: d.drift_cap,
            x_start: None,
        }
    }
}

impl SimulationConfig {
    /// The simulator's config, with the window already in state coordinates.
    pub fn to_sim(&self, window: (f64, f64), seed: u64) -> SimConfig {
        SimConfig {
            spacing: self.spacing_kind.with(self.spacing),
            window,
            structure_depth: self.structure_depth,
            horizon: self.horizon,
            paths: self.paths,
            seed,
            scheme: match self.scheme {
                SchemeChoice::Chain => Scheme::Chain,
                SchemeChoice::Euler => Scheme::Euler,
            },
            euler_step: self.euler_step,
            drift_cap: self.drift_cap,
            observe_every: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub tests: Vec<String>,
    /// Hypotheses every member must satisfy before anything is simulated.
    pub require: Vec<String>,
    pub qv: QvConfig,
    pub distinctness: DistinctnessConfig,
    pub exit_law: ExitLawConfig,
    pub skew_mean: SkewMeanConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QvConfig {
    pub histogram_bins: usize,
}

impl Default for QvConfig {
    fn default() -> Self {
        Self { histogram_bins: 40 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistinctnessConfig {
    /// `(a, x, b)` in state coordinates, or in the construction parameter.
    pub window: Option<[f64; 3]>,
    pub window_param: Option<[f64; 3]>,
    pub spacing: f64,
    pub spacing_kind: SpacingKind,
    pub paths: u64,
}

impl Default for DistinctnessConfig {
    fn default() -> Self {
        Self {
            window: None,
            window_param: None,
            spacing: 0.05,
            spacing_kind: SpacingKind::Param,
            paths: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExitLawConfig {
    pub region: Option<[f64; 2]>,
    pub region_param: Option<[f64; 2]>,
    pub windows: usize,
    pub paths: u64,
}

impl Default for ExitLawConfig {
    fn default() -> Self {
        Self {
            region: None,
            region_param: None,
            windows: 20,
            paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkewMeanConfig {
    pub alphas: Vec<f64>,
    pub paths: usize,
    pub spacing: f64,
    pub window: [f64; 2],
}

impl Default for SkewMeanConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            paths: 100_000,
            spacing: 0.05,
            window: [-6.0, 6.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Left out of the copy written next to the results, so that runs differing only in
    /// where they write produce identical files.
    #[serde(skip_serializing)]
    pub dir: String,
    /// Path records written per member.
    pub paths: usize,
    pub observe_every: f64,
    pub plot_points: usize,
    pub plot_window: Option<[f64; 2]>,
    pub plot_window_param: Option<[f64; 2]>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            paths: 10,
            observe_every: 0.01,
            plot_points: 401,
            plot_window: None,
            plot_window_param: None,
        }
    }
}

fn default_cantor_depth() -> u32 {
    12
}
fn default_staircase_depth() -> u32 {
    20
}
fn default_orey_tolerance() -> f64 {
    1e-11
}
fn quarter() -> f64 {
    0.25
}
fn one() -> f64 {
    1.0
}
fn unit_base() -> [f64; 2] {
    [0.0, 1.0]
}
fn distance() -> ExtensionChoice {
    ExtensionChoice::Distance
}
fn energy() -> SpeedChoice {
    SpeedChoice::Energy
}
fn lebesgue() -> SpeedChoice {
    SpeedChoice::Lebesgue
}

/// Reads `path`, applies `KEY=VALUE` overrides (dotted keys, TOML values, bare words
/// taken as strings) and checks the result.
pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text, overrides).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    // typed parse of the file alone, so errors carry file line numbers
    toml::from_str::<ExperimentConfig>(text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let cfg = ExperimentConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| CliError::Config(format!("after overrides: {e}")))?;
    cfg.check()?;
    Ok(cfg)
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not KEY=VALUE")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let next = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Checks that serde cannot express.
    pub fn check(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::Config(m));
        if self.format_version != FORMAT_VERSION {
            return err(format!(
                "format_version = {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        for t in &self.verify.tests {
            if !TEST_NAMES.contains(&t.as_str()) {
                return err(format!("verify.tests: unknown test `{t}` (known: {})", TEST_NAMES.join(", ")));
            }
        }
        for h in &self.verify.require {
            if !HYPOTHESIS_NAMES.contains(&h.as_str()) {
                return err(format!(
                    "verify.require: unknown hypothesis `{h}` (known: {})",
                    HYPOTHESIS_NAMES.join(", ")
                ));
            }
        }
        if self.simulation.window.is_some() && self.simulation.window_param.is_some() {
            return err("simulation: give window or window_param, not both".into());
        }
        let d = &self.verify.distinctness;
        if d.window.is_some() && d.window_param.is_some() {
            return err("verify.distinctness: give window or window_param, not both".into());
        }
        let e = &self.verify.exit_law;
        if e.region.is_some() && e.region_param.is_some() {
            return err("verify.exit_law: give region or region_param, not both".into());
        }
        if self.output.plot_window.is_some() && self.output.plot_window_param.is_some() {
            return err("output: give plot_window or plot_window_param, not both".into());
        }
        if !(self.output.observe_every > 0.0) {
            return err("output.observe_every must be positive".into());
        }
        if self.output.plot_points < 2 {
            return err("output.plot_points must be at least 2".into());
        }
        if self.verify.qv.histogram_bins == 0 {
            return err("verify.qv.histogram_bins must be positive".into());
        }
        check_spec(&self.spec, "spec")
    }
}

fn check_spec(spec: &SpecConfig, at: &str) -> Result<(), CliError> {
    match spec {
        SpecConfig::Cantor {
            extension: ExtensionChoice::Saturating,
            cap: None,
            ..
        } => Err(CliError::Config(format!("{at}: extension = \"saturating\" needs cap"))),
        SpecConfig::Cantor {
            extension: ExtensionChoice::Distance,
            cap: Some(_),
            ..
        } => Err(CliError::Config(format!("{at}: cap only applies to extension = \"saturating\""))),
        SpecConfig::Skew { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => {
            Err(CliError::Config(format!("{at}.alpha = {alpha} must lie in (0, 1)")))
        }
        SpecConfig::SubspaceOf { parent, .. } => check_spec(parent, &format!("{at}.parent")),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "format_version = 1\nseed = 7\n[spec]\nkind = \"brownian\"\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.simulation.paths, SimConfig::default().paths);
        assert!(cfg.family.is_none());
    }

    #[test]
    fn seed_is_mandatory() {
        let e = parse("format_version = 1\n[spec]\nkind = \"brownian\"\n", &[]).unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = format!("{MINIMAL}[simulation]\npaths = \"many\"\n");
        let e = parse(&text, &[]).unwrap_err().to_string();
        assert!(e.contains("line 6"), "{e}");
        let e = parse("format_version = 1\nseed = 1\n[spec]\nkind = \"spiral\"\n", &[]).unwrap_err();
        assert!(e.to_string().contains("spiral"), "{e}");
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = parse(
            MINIMAL,
            &["simulation.paths=17".into(), "verify.tests=[\"qv\"]".into(), "output.dir=elsewhere".into()],
        )
        .unwrap();
        assert_eq!(cfg.simulation.paths, 17);
        assert_eq!(cfg.verify.tests, vec!["qv".to_string()]);
        assert_eq!(cfg.output.dir, "elsewhere");
        assert!(parse(MINIMAL, &["seed".into()]).is_err());
        assert!(parse(MINIMAL, &["verify.tests=[\"bogus\"]".into()]).is_err());
    }

    #[test]
    fn c_values() {
        let k = 0.5;
        assert_eq!(CValue::Expr("kappa/4".into()).resolve(k).unwrap(), 0.125);
        assert_eq!(CValue::Expr("κ".into()).resolve(k).unwrap(), 0.5);
        assert_eq!(CValue::Expr("0.5*kappa".into()).resolve(k).unwrap(), 0.25);
        assert_eq!(CValue::Number(0.1).resolve(k).unwrap(), 0.1);
        assert!(CValue::Expr("half".into()).resolve(k).is_err());
    }

    #[test]
    fn wrong_version_is_refused() {
        let e = parse("format_version = 2\nseed = 1\n[spec]\nkind = \"brownian\"\n", &[]).unwrap_err();
        assert!(e.to_string().contains("format_version"));
    }
}
