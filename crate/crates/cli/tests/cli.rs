//! End-to-end runs of the `scalesim` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scalesim"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("exp.cfg");
    fs::write(&p, body).unwrap();
    p
}

/// Every file below `dir`, relative path and contents, sorted.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const SMALL_FAMILY: [&str; 6] = [
    "--override",
    "simulation.paths=400",
    "--override",
    "verify.distinctness.paths=20000",
    "--override",
    "output.paths=3",
];

#[test]
fn version_names_the_config_format() {
    let out = run(&["version"]);
    assert!(out.status.success());
    assert!(text(&out).contains("format_version 1"), "{}", text(&out));
}

#[test]
fn describe_reports_analytic_facts() {
    let out = run(&["describe", "--config", config("brownian.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let t = text(&out);
    assert!(t.contains("b: b = 0") && t.contains("σ ≡ 1"), "{t}");

    let out = run(&["describe", "--config", config("staircase.cfg").to_str().unwrap()]);
    let t = text(&out);
    assert!(t.contains("h4: ✗ fails (t' is not of bounded variation)"), "{t}");
    assert!(t.contains("h1: ✓") && t.contains("h2: ✓"), "{t}");

    let out = run(&[
        "describe",
        "--config",
        config("cantor_family.cfg").to_str().unwrap(),
        "--override",
        "family.c=[\"kappa\"]",
    ]);
    let t = text(&out);
    assert!(t.contains("κ mass: 0.5"), "{t}");
    for h in ["h1", "h2", "h3", "h4"] {
        assert!(t.contains(&format!("{h}: ✓")), "{t}");
    }
    assert!(t.contains("P_x(exit at b)"), "{t}");
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("cantor_family.cfg");
    let mut snaps = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let dir = tmp.path().join(name);
        let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", dir.to_str().unwrap()];
        args.extend(SMALL_FAMILY);
        let out = bin().args(&args).env("SCALESIM_THREADS", threads).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        snaps.push(snapshot(&dir));
    }
    assert!(snaps[0].len() >= 10);
    for (x, y) in snaps[0].iter().zip(&snaps[1]) {
        assert_eq!(x.0, y.0);
        assert!(x.1 == y.1, "{} differs between runs", x.0);
    }
    assert_eq!(snaps[0].len(), snaps[1].len());

    // a different seed changes the paths but not the spec hash
    let dir = tmp.path().join("c");
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--seed", "2", "--out", dir.to_str().unwrap()];
    args.extend(SMALL_FAMILY);
    assert_eq!(run(&args).status.code(), Some(0));
    let a = fs::read_to_string(tmp.path().join("a/paths.csv")).unwrap();
    let c = fs::read_to_string(dir.join("paths.csv")).unwrap();
    assert_ne!(a, c);
    let hash = |s: &str| s.lines().find(|l| l.starts_with("# spec_hash")).unwrap().to_string();
    assert_eq!(hash(&a), hash(&c));
}

#[test]
fn csv_files_carry_header_metadata_and_lossless_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = run(&[
        "run",
        "--config",
        config("brownian.cfg").to_str().unwrap(),
        "--paths",
        "500",
        "--out",
        dir.to_str().unwrap(),
        "--override",
        "verify.tests=[\"qv\"]",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let paths = fs::read_to_string(dir.join("paths.csv")).unwrap();
    let mut lines = paths.lines();
    assert_eq!(lines.next(), Some("member,path,time,state"));
    let meta: Vec<&str> = paths.lines().filter(|l| l.starts_with('#')).collect();
    assert_eq!(meta.len(), 4);
    assert!(meta.contains(&"# seed = 1"));
    let row = paths.lines().find(|l| !l.starts_with('#') && l.starts_with("brownian,0,")).unwrap();
    let state = row.split(',').nth(3).unwrap();
    let mantissa = state.split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{state}");
    let v: f64 = state.parse().unwrap();
    assert_eq!(format!("{v:.16e}"), state);

    let reports = fs::read_to_string(dir.join("reports.csv")).unwrap();
    assert!(reports.starts_with("name,observed,reference,provenance,band_lo,band_hi,pass,note\n"));
    assert!(reports.contains("[PAPER]"));
    let hist = fs::read_to_string(dir.join("plot/qv_histogram_brownian.csv")).unwrap();
    assert!(hist.starts_with("qv,density\n"));
    let effective = fs::read_to_string(dir.join("config.toml")).unwrap();
    assert!(effective.contains("paths = 500"), "{effective}");
}

#[test]
fn failed_test_exits_one() {
    // a coarse staircase grid under-reports the quadratic variation
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--config",
        config("staircase.cfg").to_str().unwrap(),
        "--paths",
        "2000",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
        "--override",
        "simulation.structure_depth=0",
        "--override",
        "verify.tests=[\"qv\"]",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("FAIL"));
}

#[test]
fn failed_required_hypothesis_exits_one_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--config",
        config("brownian.cfg").to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
        "--override",
        "verify.require=[\"h2\"]",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hypothesis h2 fails"));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "format_version = 1\nseed = 1\n[spec]\nkind = \"brownian\"\n[simulation]\npaths = -3\n");
    let out = run(&["run", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));

    let p = write_config(tmp.path(), "format_version = 1\n[spec]\nkind = \"brownian\"\n");
    let out = run(&["describe", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    // the QV identity needs m = m̃, which the skew transform does not have
    let out = run(&[
        "run",
        "--config",
        config("skew_sweep.cfg").to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
        "--override",
        "verify.tests=[\"qv\"]",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args(["run", "--config", config("brownian.cfg").to_str().unwrap()])
        .env("SCALESIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = run(&[
        "run",
        "--config",
        config("brownian.cfg").to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn skew_sweep_emits_the_displacement_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = run(&[
        "run",
        "--config",
        config("skew_sweep.cfg").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--override",
        "verify.skew_mean.paths=20000",
        "--override",
        "verify.tests=[\"skew_mean\"]",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let curve = fs::read_to_string(dir.join("plot/skew_mean.csv")).unwrap();
    let points: Vec<(f64, f64)> = curve
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let (a, m) = l.split_once(',').unwrap();
            (a.parse().unwrap(), m.parse().unwrap())
        })
        .collect();
    assert_eq!(points.len(), 7);
    for w in points.windows(2) {
        assert!(w[1].1 < w[0].1, "mean displacement decreases in α: {points:?}");
    }
}
