//! The `run` pipeline: construct, validate hypotheses, simulate, verify, write.

use std::path::Path;

use scalesim_core::simulate::{build_chain, simulate_chain_paths, simulate_euler_paths, ChainGrid, PathSample, Scheme, SimConfig, Spacing};
use scalesim_core::verify::{
    derive_seed, distinctness_test, drift_consistency_test, exit_law_check, qv_test, sig17,
    skew_localtime_test, ExitExperiment, Member as ExitMember,
};
use scalesim_core::*;

use crate::config::ExperimentConfig;
use crate::output::{Meta, Writer};
use crate::specs::{self, param_pair, slug, Built, Member};
use crate::CliError;

// seed streams of the sub-experiments
const QV_STREAM: u64 = 1000;
const DRIFT_STREAM: u64 = 2000;
const DISTINCT_STREAM: u64 = 3000;
const EXIT_STREAM: u64 = 4000;
const SKEW_STREAM: u64 = 5000;
const PATH_STREAM: u64 = 6000;

pub enum Outcome {
    /// Reports were produced; `pass` is true iff every one passed.
    Finished { reports: Vec<TestReport>, pass: bool },
    /// A required hypothesis failed for some member.
    Refused(Vec<String>),
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Window { .. }
            | VerifyError::Validator(_)
            | VerifyError::NotApplicable(_)
            | VerifyError::BadAlpha(_)
            | VerifyError::EmptyExperiment => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Simulation window in state coordinates.
pub fn sim_window(cfg: &ExperimentConfig, base: &DiffusionSpec64) -> (f64, f64) {
    match (cfg.simulation.window, cfg.simulation.window_param) {
        (Some(w), _) => (w[0], w[1]),
        (None, Some(p)) => param_pair(base.scale(), p),
        (None, None) => SimConfig::default().window,
    }
}

pub fn distinctness_window(cfg: &ExperimentConfig, base: &DiffusionSpec64) -> Option<(f64, f64, f64)> {
    let d = &cfg.verify.distinctness;
    match (d.window, d.window_param) {
        (Some(w), _) => Some((w[0], w[1], w[2])),
        (None, Some(p)) => {
            let s = base.scale();
            Some((s.state(p[0]).x, s.state(p[1]).x, s.state(p[2]).x))
        }
        (None, None) => None,
    }
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let built = specs::build(cfg)?;
    let mut w = Writer::new(out, Meta::of(cfg)?)?;
    let effective = toml::to_string(cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.text("config.toml", &effective)?;

    let hyp = hypothesis_records(&built, &Meta::of(cfg)?);
    w.text("hypotheses.txt", &hyp.0)?;
    let failures: Vec<String> = hyp
        .1
        .iter()
        .flat_map(|(label, r)| {
            r.entries()
                .into_iter()
                .filter(|(name, c)| cfg.verify.require.iter().any(|q| q == name) && !c.verdict.holds())
                .map(move |(name, c)| format!("{label}: hypothesis {name} {}: {}", c.verdict, c.witness))
        })
        .collect();
    if !failures.is_empty() {
        return Ok(Outcome::Refused(failures));
    }

    let window = sim_window(cfg, &built.base);
    let x_start = cfg.simulation.x_start.unwrap_or_else(|| built.base.scale().anchor());
    write_paths(cfg, &built, window, x_start, &mut w)?;
    write_scale_plots(cfg, &built, window, &mut w)?;

    let mut reports = Vec::new();
    for test in &cfg.verify.tests {
        match test.as_str() {
            "qv" => qv(cfg, &built, window, x_start, &mut w, &mut reports)?,
            "drift" => {
                for (j, m) in built.members.iter().enumerate() {
                    let sim = cfg.simulation.to_sim(window, derive_seed(cfg.seed, DRIFT_STREAM + j as u64));
                    let out = drift_consistency_test(&m.spec, &sim, x_start)?;
                    reports.extend(labelled(&m.label, out.reports));
                }
            }
            "distinctness" => distinctness(cfg, &built, &mut w, &mut reports)?,
            "exit_law" => exit_law(cfg, &built, window, &mut w, &mut reports)?,
            "skew_mean" => skew_mean(cfg, &mut w, &mut reports)?,
            other => return Err(CliError::Config(format!("unknown test `{other}`"))),
        }
    }

    let mut rows = vec![];
    for r in &reports {
        rows.push(r.record());
    }
    w.csv("reports.csv", &TestReport::RECORD_HEADER, rows)?;
    let mut table = Meta::of(cfg)?.lines();
    table.push_str(&scalesim_core::verify::render_table(&reports));
    w.text("reports.txt", &table)?;
    let pass = reports.iter().all(|r| r.pass);
    Ok(Outcome::Finished { reports, pass })
}

fn labelled(label: &str, reports: Vec<TestReport>) -> Vec<TestReport> {
    reports
        .into_iter()
        .map(|mut r| {
            r.name = format!("{label}: {}", r.name);
            r
        })
        .collect()
}

fn hypothesis_records(built: &Built, meta: &Meta) -> (String, Vec<(String, HypothesisReport)>) {
    let mut text = meta.lines();
    let mut reports = Vec::new();
    for m in &built.members {
        let r = validate_hypotheses(&m.spec);
        text.push_str(&format!("\n[{}]\n", m.label));
        text.push_str(&format!("kappa_mass = {}\n", sig17(m.spec.scale().singular_mass())));
        for (k, v) in r.to_record() {
            text.push_str(&format!("{k} = {v}\n"));
        }
        reports.push((m.label.clone(), r));
    }
    (text, reports)
}

fn simulate(member: &Member, sim: &SimConfig, x_start: f64) -> Result<Vec<PathSample>, CliError> {
    let paths = match sim.scheme {
        Scheme::Chain => {
            let s = member.spec.scale();
            let grid = ChainGrid::build(s, sim.window, sim.spacing, &[x_start], sim.structure_depth)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let model = build_chain(&member.spec, grid).map_err(|e| CliError::Runtime(e.to_string()))?;
            simulate_chain_paths(&model, x_start, sim)
        }
        Scheme::Euler => simulate_euler_paths(&member.spec, x_start, sim),
    };
    paths.map_err(|e| CliError::Runtime(format!("{}: {e}", member.label)))
}

fn write_paths(
    cfg: &ExperimentConfig,
    built: &Built,
    window: (f64, f64),
    x_start: f64,
    w: &mut Writer,
) -> Result<(), CliError> {
    if cfg.output.paths == 0 {
        return Ok(());
    }
    let mut rows = Vec::new();
    for (j, m) in built.members.iter().enumerate() {
        let mut sim = cfg.simulation.to_sim(window, derive_seed(cfg.seed, PATH_STREAM + j as u64));
        sim.paths = cfg.output.paths;
        sim.observe_every = Some(cfg.output.observe_every);
        for p in simulate(m, &sim, x_start)? {
            for (t, x) in p.times.iter().zip(&p.states) {
                rows.push([m.label.clone(), p.path_index.to_string(), sig17(*t), sig17(*x)]);
            }
        }
    }
    w.csv("paths.csv", &["member", "path", "time", "state"], rows)
}

fn write_scale_plots(cfg: &ExperimentConfig, built: &Built, window: (f64, f64), w: &mut Writer) -> Result<(), CliError> {
    let s = built.base.scale();
    let (ua, ub) = match (cfg.output.plot_window, cfg.output.plot_window_param) {
        (Some(p), _) => (s.param(p[0]), s.param(p[1])),
        (None, Some(p)) => (p[0], p[1]),
        (None, None) => (s.param(window.0), s.param(window.1)),
    };
    let n = cfg.output.plot_points;
    let xs: Vec<f64> = (0..n)
        .map(|i| s.state(ua + (ub - ua) * i as f64 / (n - 1) as f64).x)
        .collect();
    let curve = |sc: &ScaleFunction64| xs.iter().map(|&x| (x, sc.eval(x))).collect::<Vec<_>>();
    w.plot("scale_curve", ("x", "s"), &curve(s))?;
    if cfg.family.is_some() {
        for m in &built.members {
            w.plot(&format!("family_{}", slug(&m.label)), ("x", "s_c"), &curve(m.spec.scale()))?;
        }
    }
    Ok(())
}

fn qv(
    cfg: &ExperimentConfig,
    built: &Built,
    window: (f64, f64),
    x_start: f64,
    w: &mut Writer,
    reports: &mut Vec<TestReport>,
) -> Result<(), CliError> {
    for (j, m) in built.members.iter().enumerate() {
        let sim = cfg.simulation.to_sim(window, derive_seed(cfg.seed, QV_STREAM + j as u64));
        let out = qv_test(&m.spec, &sim, x_start)
            .map_err(|e| CliError::from(e).context(&format!("qv for {}", m.label)))?;
        w.plot(
            &format!("qv_histogram_{}", slug(&m.label)),
            ("qv", "density"),
            &histogram(&out.samples, cfg.verify.qv.histogram_bins),
        )?;
        reports.extend(labelled(&m.label, vec![out.report]));
    }
    Ok(())
}

/// Bin centers and normalized counts.
fn histogram(xs: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() || !(hi > lo) {
        return vec![(lo, 1.0)];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (lo + (k as f64 + 0.5) * width, c as f64 / (xs.len() as f64 * width)))
        .collect()
}

fn distinctness(cfg: &ExperimentConfig, built: &Built, w: &mut Writer, reports: &mut Vec<TestReport>) -> Result<(), CliError> {
    if built.members.len() < 2 {
        return Err(CliError::Config("distinctness needs a family with at least two members".into()));
    }
    let window = distinctness_window(cfg, &built.base).ok_or_else(|| {
        CliError::Config("distinctness needs verify.distinctness.window or window_param".into())
    })?;
    let d = &cfg.verify.distinctness;
    let exp = ExitExperiment {
        members: built
            .members
            .iter()
            .map(|m| ExitMember::new(m.label.clone(), m.spec.clone()))
            .collect(),
        window,
        n_paths: d.paths,
        seed: derive_seed(cfg.seed, DISTINCT_STREAM),
        spacing: d.spacing_kind.with(d.spacing),
    };
    let out = distinctness_test(&exp)?;
    let points: Vec<(f64, f64)> = out.analytic.iter().copied().zip(out.empirical()).collect();
    w.plot("exit_distinctness", ("analytic", "empirical"), &points)?;
    reports.extend(out.reports);
    Ok(())
}

fn exit_law(
    cfg: &ExperimentConfig,
    built: &Built,
    window: (f64, f64),
    w: &mut Writer,
    reports: &mut Vec<TestReport>,
) -> Result<(), CliError> {
    let e = &cfg.verify.exit_law;
    for (j, m) in built.members.iter().enumerate() {
        let region = match (e.region, e.region_param) {
            (Some(r), _) => (r[0], r[1]),
            (None, Some(p)) => param_pair(built.base.scale(), p),
            (None, None) => window,
        };
        let out = exit_law_check(&m.spec, region, e.windows, e.paths, derive_seed(cfg.seed, EXIT_STREAM + j as u64))?;
        let points: Vec<(f64, f64)> = out.windows.iter().map(|w| (w.analytic, w.empirical)).collect();
        w.plot(&format!("exit_law_{}", slug(&m.label)), ("analytic", "empirical"), &points)?;
        reports.extend(labelled(&m.label, vec![out.report]));
    }
    Ok(())
}

fn skew_mean(cfg: &ExperimentConfig, w: &mut Writer, reports: &mut Vec<TestReport>) -> Result<(), CliError> {
    let k = &cfg.verify.skew_mean;
    let horizon = cfg.simulation.horizon;
    let mut points = Vec::new();
    for (i, &alpha) in k.alphas.iter().enumerate() {
        let sim = SimConfig {
            spacing: Spacing::State(k.spacing),
            window: (k.window[0], k.window[1]),
            horizon,
            paths: k.paths,
            seed: derive_seed(cfg.seed, SKEW_STREAM + i as u64),
            ..SimConfig::default()
        };
        let out = skew_localtime_test(alpha, &sim)?;
        points.push((alpha, out.mean.mean));
        reports.extend(out.reports);
    }
    w.plot("skew_mean", ("alpha", "mean_displacement"), &points)?;
    let scale = (2.0 * horizon / std::f64::consts::PI).sqrt();
    let curve: Vec<(f64, f64)> = (1..100)
        .map(|i| {
            let a = i as f64 / 100.0;
            (a, (1.0 - 2.0 * a) * scale)
        })
        .collect();
    w.plot("skew_mean_analytic", ("alpha", "mean_displacement"), &curve)
}
