//! End-to-end CLI tests against the compiled binary: exit codes, output
//! layout, determinism, and report auditability.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_langevin-anneal"))
}

fn run_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "expected exit 0, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

/// Fast exp_contraction invocation with few pairs.
fn quick_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("quick.cfg");
    fs::write(
        &path,
        "experiment = exp_contraction\nn_pairs = 8\nn_records = 20\nhorizon = 1.0\n",
    )
    .unwrap();
    path
}

#[test]
fn list_shows_catalogs() {
    let out = bin().arg("list").output().unwrap();
    let text = run_ok(&out);
    let section = |name: &str, until: Option<&str>| -> usize {
        let start = text.find(name).unwrap_or_else(|| panic!("missing section {name}"));
        let rest = &text[start + name.len()..];
        let rest = match until {
            Some(u) => &rest[..rest.find(u).unwrap()],
            None => rest,
        };
        rest.lines().filter(|l| l.starts_with("  ")).count()
    };
    assert!(section("experiments:", Some("potentials:")) >= 6);
    assert!(section("potentials:", Some("fields:")) >= 6, "need >= 6 potentials");
    assert!(section("fields:", None) >= 4, "need >= 4 fields");
}

#[test]
fn run_is_deterministic_and_lays_out_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let run = |tag: &str| {
        let out = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--seed", "9", "--tag", tag, "--outdir"])
            .arg(tmp.path())
            .output()
            .unwrap();
        let text = run_ok(&out);
        assert!(text.contains("VERDICT: PASS"), "{text}");
        tmp.path().join("exp_contraction").join(tag)
    };
    let d1 = run("a");
    let d2 = run("b");
    for name in ["metrics.csv", "config.echo", "verdict.txt"] {
        assert!(d1.join(name).exists(), "missing {name}");
    }
    assert!(d1.join("distance_semilog.svg").exists());
    let c1 = fs::read(d1.join("metrics.csv")).unwrap();
    let c2 = fs::read(d2.join("metrics.csv")).unwrap();
    assert_eq!(c1, c2, "same config + seed must be byte-identical");
}

#[test]
fn env_var_sets_outdir_and_flag_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let env_dir = tmp.path().join("from_env");
    let flag_dir = tmp.path().join("from_flag");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .env("LANGEVIN_ANNEAL_OUTDIR", &env_dir)
        .output()
        .unwrap();
    run_ok(&out);
    assert!(env_dir.join("exp_contraction").exists());
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--outdir")
        .arg(&flag_dir)
        .env("LANGEVIN_ANNEAL_OUTDIR", tmp.path().join("ignored"))
        .output()
        .unwrap();
    run_ok(&out);
    assert!(flag_dir.join("exp_contraction").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn bad_config_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    // unknown key
    let p = tmp.path().join("bad.cfg");
    fs::write(&p, "experiment = exp_contraction\nno_such_key = 1\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&p).output().unwrap();
    assert_eq!(code(&out), 2);
    // unknown experiment
    let out = bin().args(["run", "no_such_experiment"]).output().unwrap();
    assert_eq!(code(&out), 2);
    // missing config file
    let out = bin()
        .args(["run", "--config"])
        .arg(tmp.path().join("absent.cfg"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn divergent_steps_are_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("diverge.cfg");
    // γ₁ far above the stability limit of the stiff well, started off the
    // minimum so the explicit scheme oscillates outward past the guard
    fs::write(
        &p,
        "experiment = exp_anneal\nsteps.gamma1 = 10.0\nx0 = 3.0\nn_chains = 8\n\
         aux_chains = 8\nsens_chains = 8\nn_plateaus = 8\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&p)
        .arg("--outdir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_recomputes_flags_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--tag", "audit", "--outdir"])
        .arg(tmp.path())
        .output()
        .unwrap();
    run_ok(&out);
    let dir = tmp.path().join("exp_contraction").join("audit");

    let out = bin().arg("report").arg(&dir).output().unwrap();
    let text = run_ok(&out);
    assert!(text.contains("VERDICT: PASS"), "{text}");

    // tamper with the measured rate so the relative-error flag flips
    let csv = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let tampered: String = csv
        .lines()
        .map(|l| {
            if l.starts_with("fitted_rate,") { "fitted_rate,0,17.0".to_string() } else { l.to_string() }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.join("metrics.csv"), tampered + "\n").unwrap();
    let out = bin().arg("report").arg(&dir).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("VERDICT: FAIL"));

    // missing directory is a usage error
    let out = bin().arg("report").arg(tmp.path().join("nope")).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn validate_reports_assumptions() {
    let out = bin().args(["validate", "exp_anneal"]).output().unwrap();
    let text = run_ok(&out);
    assert!(text.contains("dissipativity"), "{text}");
    assert!(text.contains("varpi estimate"), "{text}");
    assert!(text.contains("validate: OK"), "{text}");

    // α ≤ 1/2 breaks the square-summability condition on the steps
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("alpha.cfg");
    fs::write(&p, "experiment = exp_anneal\nsteps.alpha = 0.4\n").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("H_gamma1 VIOLATION"));
}
