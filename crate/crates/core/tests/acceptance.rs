//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scalesim_core::coefficients::lebesgue_probes;
use scalesim_core::simulate::*;
use scalesim_core::verify::*;
use scalesim_core::*;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn failing(reports: &[TestReport]) -> String {
    reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} = {:.4e} outside [{:.4e}, {:.4e}]", r.name, r.observed, r.band.0, r.band.1))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Window `(a, 0, b)` in state coordinates with `a = x(-0.2)`, `b = x(1.2)` in the
/// natural-scale parameter of the fat-Cantor scale.
fn distinctness_window(s: &ScaleFunction64) -> (f64, f64, f64) {
    (s.state(-0.2).x, 0.0, s.state(1.2).x)
}

fn cantor_sim_config(s: &ScaleFunction64, paths: usize, seed: u64) -> SimConfig {
    SimConfig {
        spacing: Spacing::Param(0.02),
        window: (s.state(-5.0).x, s.state(6.0).x),
        paths,
        seed,
        ..SimConfig::default()
    }
}

fn experiment(members: Vec<Member>, s: &ScaleFunction64, n_paths: u64, seed: u64) -> ExitExperiment {
    ExitExperiment {
        members,
        window: distinctness_window(s),
        n_paths,
        seed,
        spacing: Spacing::Param(0.05),
    }
}

fn criterion_1() -> Outcome {
    let family = cantor_family();
    let parent = cantor_spec();
    let s = parent.scale().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let probes = lebesgue_probes(Interval64::new(-3.0, 3.0).unwrap(), 0.0, 1000, &mut rng);

    // (a) identical coefficients
    let b0 = drift_b(&parent).unwrap();
    let b0 = b0.function().unwrap().clone();
    let sig0 = sigma(&parent).unwrap();
    let mut sup: f64 = 0.0;
    for (_, spec) in &family {
        let b = match drift_b(spec) {
            Ok(Drift::Function(b)) => b,
            other => return Outcome::new(false, format!("drift of a family member is {other:?}")),
        };
        let sig = sigma(spec).unwrap();
        for &x in &probes {
            sup = sup.max((b.eval(x) - b0.eval(x)).abs());
            sup = sup.max((sig.eval(x) - sig0.eval(x)).abs());
        }
    }
    let coeff_ok = sup <= 1e-8;

    // (b) drift consistency per member
    let mut notes = String::new();
    let mut drift_ok = true;
    for (j, (label, spec)) in family.iter().enumerate() {
        let cfg = cantor_sim_config(&s, 10_000, 200 + j as u64);
        let out = drift_consistency_test(spec, &cfg, 0.0).unwrap();
        if !out.pass() {
            drift_ok = false;
            let _ = write!(notes, " [{label}: {}]", failing(&out.reports));
        }
    }

    // (c) pairwise distinctness
    let members = family.iter().map(|(l, spec)| Member::new(l.clone(), spec.clone())).collect();
    let exp = experiment(members, &s, 100_000, 300);
    let distinct = match distinctness_test(&exp) {
        Ok(out) => {
            if !out.pass() {
                let _ = write!(notes, " [distinctness: {}]", failing(&out.reports));
            }
            let _ = write!(notes, " exit freqs {:?} vs analytic {:?};", round4(&out.empirical()), round4(&out.analytic));
            out.pass()
        }
        Err(e) => {
            let _ = write!(notes, " [distinctness: {e}]");
            false
        }
    };
    Outcome::new(
        coeff_ok && drift_ok && distinct,
        format!("sup |Δb|,|Δσ| = {sup:.1e} (≤ 1e-8); drift consistency {}; distinctness {};{notes}",
            pass_word(drift_ok), pass_word(distinct)),
    )
}

fn round4(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn criterion_2() -> Outcome {
    let s = cantor_scale();
    let fam = cantor_family();
    let cases: Vec<(String, DiffusionSpec64, SimConfig)> = vec![
        ("brownian".into(), DiffusionSpec::brownian(), SimConfig { paths: 10_000, seed: 401, ..SimConfig::default() }),
        ("cantor c=κ".into(), cantor_spec(), cantor_sim_config(&s, 10_000, 402)),
        (format!("cantor {}", fam[2].0), fam[2].1.clone(), cantor_sim_config(&s, 10_000, 403)),
        // the grid must resolve the Cantor gaps: the QV deficit decays like (2/3)^depth
        (
            "staircase".into(),
            staircase_spec(),
            SimConfig { paths: 10_000, seed: 404, structure_depth: 8, ..SimConfig::default() },
        ),
        ("orey b=0.3".into(), orey_spec(|_| 0.3), SimConfig { paths: 10_000, seed: 405, ..SimConfig::default() }),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (label, spec, cfg) in cases {
        match qv_test(&spec, &cfg, 0.0) {
            Ok(q) => {
                ok &= q.report.pass;
                let _ = write!(detail, "{label}: {:.4} vs {:.4}; ", q.report.observed, q.report.reference);
            }
            Err(e) => {
                ok = false;
                let _ = write!(detail, "{label}: {e}; ");
            }
        }
    }
    Outcome::new(ok, detail)
}

fn criterion_3() -> Outcome {
    let s = cantor_scale();
    let specs: Vec<(&str, DiffusionSpec64, (f64, f64))> = vec![
        ("brownian", DiffusionSpec::brownian(), (-3.0, 3.0)),
        ("cantor", cantor_spec(), (s.state(-2.0).x, s.state(3.0).x)),
        ("staircase", staircase_spec(), (-0.5, 1.5)),
        ("skew", skew_spec(0.3), (-2.0, 2.0)),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (j, (label, spec, region)) in specs.into_iter().enumerate() {
        let out = exit_law_check(&spec, region, 20, 10_000, 500 + j as u64).unwrap();
        ok &= out.report.pass;
        let _ = write!(detail, "{label}: {}/20; ", out.report.observed);
    }
    Outcome::new(ok, detail)
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    for alpha in [0.2, 0.5, 0.8] {
        let spec = skew_spec(alpha);
        let mu = smooth_measure_n(&spec).unwrap();
        let want = 0.5 * (1.0 - 2.0 * alpha);
        let atoms_ok = if want == 0.0 {
            mu.atoms().iter().all(|&(_, w)| w == 0.0)
        } else {
            mu.atoms().len() == 1 && mu.atoms()[0].0 == 0.0 && (mu.atoms()[0].1 - want).abs() <= 1e-15
        };
        ok &= atoms_ok;
        let cfg = SimConfig {
            paths: 100_000,
            spacing: Spacing::State(0.05),
            seed: 600 + (alpha * 10.0) as u64,
            ..SimConfig::default()
        };
        let out = skew_localtime_test(alpha, &cfg).unwrap();
        ok &= out.pass();
        let _ = write!(
            detail,
            "α={alpha}: atoms {} mean {:.4} vs {:.4} (se {:.1e}) {}; ",
            if atoms_ok { "ok" } else { "WRONG" },
            out.mean.mean,
            out.reference,
            out.mean.se(),
            pass_word(out.pass())
        );
    }
    // KS of α = 1/2 against Brownian chain marginals on the same grid
    let cfg = SimConfig {
        paths: 10_000,
        spacing: Spacing::State(0.05),
        seed: 650,
        ..SimConfig::default()
    };
    let finals = |spec: &DiffusionSpec64, seed: u64| -> Vec<f64> {
        let grid = ChainGrid::build(spec.scale(), cfg.window, cfg.spacing, &[0.0], 0).unwrap();
        let model = build_chain(spec, grid).unwrap();
        simulate_chain_paths(&model, 0.0, &SimConfig { seed, ..cfg.clone() })
            .unwrap()
            .iter()
            .map(PathSample::final_state)
            .collect()
    };
    let half = finals(&skew_spec(0.5), 651);
    let bm = finals(&DiffusionSpec::brownian(), 652);
    let (d, p) = ks_two_sample(&half, &bm).unwrap();
    ok &= p > 0.01;
    let _ = write!(detail, "KS α=0.5 vs BM: D = {d:.4}, p = {p:.3}");
    Outcome::new(ok, detail)
}

fn criterion_5() -> Outcome {
    let hv = |r: &HypothesisReport| {
        [&r.h1, &r.h2, &r.h3, &r.h4, &r.h4prime].map(|c| c.verdict)
    };
    use Verdict::{Fails as F, Holds as H};
    let mut ok = true;
    let mut detail = String::new();
    let mut check = |label: &str, spec: &DiffusionSpec64, want: &[(usize, Verdict)], extra: bool| {
        let r = validate_hypotheses(spec);
        let v = hv(&r);
        let good = want.iter().all(|&(i, w)| v[i] == w) && extra && r.implications_hold();
        ok &= good;
        let _ = write!(
            detail,
            "{label}: H1 {} H2 {} H3 {} H4 {} H4' {} {}; ",
            v[0], v[1], v[2], v[3], v[4],
            pass_word(good)
        );
    };
    check("brownian", &DiffusionSpec::brownian(), &[(0, H), (1, F)], true);
    let orey = orey_spec(|_| 0.25);
    check("orey", &orey, &[(0, H), (1, F)], coefficients::speed_is_energy(&orey));
    check("cantor", &cantor_spec(), &[(0, H), (1, H), (2, H), (3, H), (4, H)], true);
    check("staircase", &staircase_spec(), &[(0, H), (1, H), (3, F)], true);
    let skew = skew_spec(0.3);
    check("skew", &skew, &[(3, H)], !check_h4prime_equivalence(&skew));
    Outcome::new(ok, detail)
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let probes = lebesgue_probes(Interval64::new(-5.0, 5.0).unwrap(), 0.0, 1000, &mut rng);

    // Orey drift round trip
    type B = fn(f64) -> f64;
    let drifts: [(&str, B); 2] = [("b≡0.3", |_| 0.3), ("b=sin", f64::sin)];
    for (label, f) in drifts {
        let spec = orey_spec(f);
        let b = drift_b(&spec).unwrap();
        let b = b.function().unwrap();
        let err = probes.iter().map(|&x| (b.eval(x) - f(x)).abs()).fold(0.0, f64::max);
        ok &= err <= 1e-6;
        let _ = write!(detail, "orey {label}: {err:.1e}; ");
    }

    // inversion and decomposition audit
    let specs = [cantor_spec(), staircase_spec(), orey_spec(f64::sin), skew_spec(0.3)];
    let mut inv: f64 = 0.0;
    let mut audit_ok = true;
    for spec in &specs {
        for &x in &probes {
            let back = spec.inverse().eval(spec.scale().eval(x)).unwrap();
            inv = inv.max((back - x).abs() / (1.0 + x.abs()));
        }
        let intervals: Vec<(f64, f64)> = probes.windows(2).take(200).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect();
        audit_ok &= lebesgue_decompose(spec.scale()).audit(&intervals, 1e-8, 1e-12).is_ok();
    }
    ok &= inv <= 1e-9 && audit_ok;
    let _ = write!(detail, "t∘s = id to {inv:.1e}; audit {}; ", pass_word(audit_ok));

    // identical seeds, identical bytes, under different thread counts
    let spec = cantor_spec();
    let s = spec.scale().clone();
    let cfg = SimConfig { observe_every: Some(0.01), ..cantor_sim_config(&s, 200, 7) };
    let grid = ChainGrid::build(&s, cfg.window, cfg.spacing, &[0.0], 0).unwrap();
    let model = build_chain(&spec, grid).unwrap();
    let render = |threads: usize| -> Vec<u8> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let paths = pool.install(|| simulate_chain_paths(&model, 0.0, &cfg)).unwrap();
        let mut out = String::new();
        for p in &paths {
            for (t, x) in p.times.iter().zip(&p.states) {
                let _ = writeln!(out, "{},{},{}", p.path_index, sig17(*t), sig17(*x));
            }
        }
        out.into_bytes()
    };
    let same = render(1) == render(3);
    ok &= same;
    let _ = write!(detail, "byte-identical reruns {}", pass_word(same));
    Outcome::new(ok, detail)
}

fn criterion_7() -> Outcome {
    let spec = cantor_spec();
    let s = spec.scale().clone();
    let reps = 50u64;
    let mut rejections = 0;
    for r in 0..reps {
        let members = vec![Member::new("s", spec.clone()), Member::new("s'", spec.clone())];
        let out = distinctness_test(&experiment(members, &s, 100_000, derive_seed(800, r))).unwrap();
        if !out.pass() {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    Outcome::new(rate <= 0.05, format!("{rejections}/{reps} false rejections at level 0.01 (rate {rate:.3} ≤ 0.05)"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("headline: same coefficients, same SDE, distinct laws", criterion_1),
        ("Brownian martingale part: realized QV", criterion_2),
        ("exit-law oracle equivalence", criterion_3),
        ("skew Brownian motion", criterion_4),
        ("hypothesis classifiers", criterion_5),
        ("round trips and determinism", criterion_6),
        ("degenerate-family control", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!(
            "ACCEPTANCE {} {} ({name}) [{:.1}s]: {}",
            i + 1,
            pass_word(out.pass),
            t.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
