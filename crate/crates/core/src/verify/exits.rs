use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::simulate::{build_chain, path_rng, ChainGrid, Spacing};
use crate::speed::DiffusionSpec;

use super::stats::{normal_upper_tail, two_proportion_z};
use super::{derive_seed, Provenance, TestReport, VerifyError};

/// Significance level of the distinctness z-tests.
const LEVEL: f64 = 0.01;
/// Analytic gap, in binomial standard errors, the window validator demands.
const VALIDATOR_SE: f64 = 5.0;

/// `P_x(hit b before a) = (s(x) - s(a)) / (s(b) - s(a))`.
pub fn exit_probability(spec: &DiffusionSpec<f64>, a: f64, x: f64, b: f64) -> Result<f64, VerifyError> {
    check_window(spec, (a, x, b))?;
    let s = spec.scale();
    let (sa, sx, sb) = (s.eval(a), s.eval(x), s.eval(b));
    if !(sa < sx && sx < sb) {
        return Err(VerifyError::Window {
            a,
            x,
            b,
            reason: "scale values do not increase across the window".into(),
        });
    }
    Ok((sx - sa) / (sb - sa))
}

fn check_window(spec: &DiffusionSpec<f64>, (a, x, b): (f64, f64, f64)) -> Result<(), VerifyError> {
    let dom = spec.interval();
    if !(a < x && x < b) {
        return Err(VerifyError::Window {
            a,
            x,
            b,
            reason: "need a < x < b".into(),
        });
    }
    if !(dom.contains(a) && dom.contains(b)) {
        return Err(VerifyError::Window {
            a,
            x,
            b,
            reason: format!("window leaves the interval {dom}"),
        });
    }
    Ok(())
}

/// Number of `n_paths` chain paths from `x` that leave `(a, b)` at `b`.
///
/// The chain lives on a grid through `a`, `x` and `b`, so the count is exactly
/// binomial with the analytic exit probability.
pub fn exit_frequency(
    spec: &DiffusionSpec<f64>,
    window: (f64, f64, f64),
    spacing: Spacing,
    n_paths: u64,
    seed: u64,
) -> Result<u64, VerifyError> {
    check_window(spec, window)?;
    let (a, x, b) = window;
    let grid = ChainGrid::build(spec.scale(), (a, b), spacing, &[x], 0)?;
    let model = build_chain(spec, grid)?;
    let k0 = model.start_index(x)?;
    let top = model.grid().len() - 1;
    Ok((0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            u64::from(model.exits_up(k0, 0, top, &mut rng))
        })
        .sum())
}

#[derive(Debug, Clone)]
pub struct Member {
    pub label: String,
    pub spec: DiffusionSpec<f64>,
}

impl Member {
    pub fn new(label: impl Into<String>, spec: DiffusionSpec<f64>) -> Self {
        Self {
            label: label.into(),
            spec,
        }
    }
}

/// Exit events of several specs from one window `(a, x_start, b)`.
#[derive(Debug, Clone)]
pub struct ExitExperiment {
    pub members: Vec<Member>,
    pub window: (f64, f64, f64),
    pub n_paths: u64,
    pub seed: u64,
    pub spacing: Spacing,
}

impl ExitExperiment {
    /// Analytic exit probabilities of the members.
    pub fn analytic(&self) -> Result<Vec<f64>, VerifyError> {
        let (a, x, b) = self.window;
        self.members
            .iter()
            .map(|m| exit_probability(&m.spec, a, x, b))
            .collect()
    }

    /// Refuses windows where some pair of distinct analytic probabilities is closer
    /// than five binomial standard errors of their difference.
    pub fn validate(&self) -> Result<Vec<f64>, VerifyError> {
        if self.members.is_empty() || self.n_paths == 0 {
            return Err(VerifyError::EmptyExperiment);
        }
        let p = self.analytic()?;
        let n = self.n_paths as f64;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                if same_probability(p[i], p[j]) {
                    continue;
                }
                let se = (p[i] * (1.0 - p[i]) / n + p[j] * (1.0 - p[j]) / n).sqrt();
                let gap = (p[i] - p[j]).abs();
                if gap < VALIDATOR_SE * se {
                    return Err(VerifyError::Validator(format!(
                        "{} and {} differ by {gap:.3e}, only {:.2} standard errors at {} paths",
                        self.members[i].label,
                        self.members[j].label,
                        gap / se,
                        self.n_paths
                    )));
                }
            }
        }
        Ok(p)
    }
}

fn same_probability(p: f64, q: f64) -> bool {
    (p - q).abs() <= 1e-12
}

#[derive(Debug, Clone)]
pub struct DistinctnessOutcome {
    pub analytic: Vec<f64>,
    /// Exits at `b` per member.
    pub ups: Vec<u64>,
    pub n_paths: u64,
    /// One report per pair `(i, j)`, `i < j`, in lexicographic order.
    pub reports: Vec<TestReport>,
}

impl DistinctnessOutcome {
    pub fn empirical(&self) -> Vec<f64> {
        self.ups.iter().map(|&k| k as f64 / self.n_paths as f64).collect()
    }

    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Pairwise two-proportion z-tests on exit events.
///
/// Pairs with different analytic probabilities must be separated at level 0.01 by the
/// one-sided test in the analytic direction; pairs with equal probabilities must not be
/// separated by the two-sided test at the same level. Each member draws from its own
/// seed stream.
pub fn distinctness_test(exp: &ExitExperiment) -> Result<DistinctnessOutcome, VerifyError> {
    let analytic = exp.validate()?;
    let ups = exp
        .members
        .iter()
        .enumerate()
        .map(|(j, m)| exit_frequency(&m.spec, exp.window, exp.spacing, exp.n_paths, derive_seed(exp.seed, j as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let n = exp.n_paths;
    let mut reports = Vec::new();
    for i in 0..analytic.len() {
        for j in i + 1..analytic.len() {
            let z = two_proportion_z(ups[i], n, ups[j], n);
            let name = format!("distinctness {} vs {}", exp.members[i].label, exp.members[j].label);
            let freq = |k: u64| k as f64 / n as f64;
            let note = format!(
                "exit at b: {:.5} vs {:.5} (analytic {:.5} vs {:.5}), z = {z:.3}",
                freq(ups[i]),
                freq(ups[j]),
                analytic[i],
                analytic[j]
            );
            let report = if same_probability(analytic[i], analytic[j]) {
                let p = (2.0 * normal_upper_tail(z.abs())).min(1.0);
                TestReport::new(name, p, LEVEL, Provenance::Trivial, (LEVEL, 1.0), note)
            } else {
                let dir = (analytic[i] - analytic[j]).signum();
                let p = normal_upper_tail(dir * z);
                TestReport::new(name, p, LEVEL, Provenance::Derived, (0.0, LEVEL), note)
            };
            reports.push(report);
        }
    }
    Ok(DistinctnessOutcome {
        analytic,
        ups,
        n_paths: n,
        reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitWindow {
    pub a: f64,
    pub x: f64,
    pub b: f64,
    pub analytic: f64,
    pub empirical: f64,
    pub inside: bool,
}

#[derive(Debug, Clone)]
pub struct ExitLawOutcome {
    pub windows: Vec<ExitWindow>,
    pub report: TestReport,
}

/// Exit frequencies on `n_windows` random windows inside the state region `region`
/// against the 3σ binomial band of the analytic probability. At most one window in ten
/// may miss.
pub fn exit_law_check(
    spec: &DiffusionSpec<f64>,
    region: (f64, f64),
    n_windows: usize,
    n_paths: u64,
    seed: u64,
) -> Result<ExitLawOutcome, VerifyError> {
    let (lo, hi) = region;
    if !(lo < hi) || n_windows == 0 || n_paths == 0 {
        return Err(VerifyError::EmptyExperiment);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let min_gap = (hi - lo) / 20.0;
    let mut windows = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let (a, x, b) = loop {
            let mut v = [0.0f64; 3];
            for p in &mut v {
                *p = lo + (hi - lo) * rng.random::<f64>();
            }
            v.sort_by(f64::total_cmp);
            if v[1] - v[0] >= min_gap && v[2] - v[1] >= min_gap {
                break (v[0], v[1], v[2]);
            }
        };
        let p = exit_probability(spec, a, x, b)?;
        let spacing = Spacing::State((b - a) / 20.0);
        let k = exit_frequency(spec, (a, x, b), spacing, n_paths, derive_seed(seed, w as u64))?;
        let f = k as f64 / n_paths as f64;
        let band = 3.0 * (p * (1.0 - p) / n_paths as f64).sqrt();
        windows.push(ExitWindow {
            a,
            x,
            b,
            analytic: p,
            empirical: f,
            inside: (f - p).abs() <= band,
        });
    }
    let hits = windows.iter().filter(|w| w.inside).count() as f64;
    let total = n_windows as f64;
    let allowed = (n_windows / 10) as f64;
    let report = TestReport::new(
        "exit law windows inside 3σ",
        hits,
        total,
        Provenance::Derived,
        (total - allowed, total),
        format!("{n_windows} random windows in ({lo}, {hi}), {n_paths} paths each"),
    );
    Ok(ExitLawOutcome { windows, report })
}
