use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn equicantor(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_equicantor"))
        .current_dir(cwd)
        .args(args)
        .env_remove("EQUICANTOR_SEED")
        .env_remove("EQUICANTOR_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&read(&dir.join("manifest.json"))).unwrap()
}

#[test]
fn calibrate_writes_a_trace_row_per_generation_and_export_plots_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = equicantor(tmp.path(), &["calibrate", "--n", "12", "--out", "cal"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("generation 12/12"));
    let trace = read(&tmp.path().join("cal/trace.csv"));
    assert_eq!(trace.lines().count(), 13);
    assert!(!trace.lines().next().unwrap().contains("wall_ms"));

    let out = equicantor(tmp.path(), &["export", "cal", "--out", "plots"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let osc = read(&tmp.path().join("plots/oscillation.csv"));
    let mut lines = osc.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,osc,log10_osc,osc_normalized,budget,log10_budget,within_budget"
    );
    assert_eq!(lines.count(), 12);
}

#[test]
fn manifest_hashes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = equicantor(tmp.path(), &["calibrate", "--n", "5", "--out", "run"]);
    assert_eq!(code(&out), 0);
    let dir = tmp.path().join("run");
    let m = manifest(&dir);
    assert_eq!(m["subcommand"], "calibrate");
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 5);
    for a in outputs {
        let bytes = fs::read(dir.join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(
            a["sha256"].as_str().unwrap(),
            hex::encode(Sha256::digest(&bytes))
        );
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    assert!(!dir.join(".equicantor.lock").exists());
}

#[test]
fn manifest_replays_as_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = equicantor(
        tmp.path(),
        &[
            "wos", "--walks", "3000", "--depth", "2", "--seed", "11", "--out", "first",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = equicantor(
        tmp.path(),
        &["wos", "--config", "first/manifest.json", "--out", "second"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["wos_counts.csv", "comparison.csv", "summary.json"] {
        assert_eq!(
            read(&tmp.path().join("first").join(f)),
            read(&tmp.path().join("second").join(f)),
            "{f}"
        );
    }
    assert_eq!(manifest(&tmp.path().join("second"))["seed"], 11);
}

#[test]
fn seeded_runs_repeat_exactly_at_any_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["wos", "--walks", "3000", "--depth", "2", "--seed", "5"];
    let a = equicantor(tmp.path(), &[&args[..], &["--out", "a"]].concat());
    assert_eq!(code(&a), 0);
    let b = Command::new(env!("CARGO_BIN_EXE_equicantor"))
        .current_dir(tmp.path())
        .args(args)
        .args(["--out", "b"])
        .env("EQUICANTOR_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&b), 0);
    assert_eq!(
        read(&tmp.path().join("a/wos_counts.csv")),
        read(&tmp.path().join("b/wos_counts.csv"))
    );
    assert_eq!(manifest(&tmp.path().join("b"))["threads"], 1);
}

#[test]
fn seed_precedence_is_flag_then_environment_then_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), r#"{"seed": 3, "n": 4}"#).unwrap();
    let run = |env: Option<&str>, flag: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_equicantor"));
        cmd.current_dir(tmp.path())
            .args(["ahlfors", "--config", "cfg.json", "--out", out])
            .env_remove("EQUICANTOR_SEED");
        if let Some(e) = env {
            cmd.env("EQUICANTOR_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        let o = cmd.output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        manifest(&tmp.path().join(out))["seed"].as_u64().unwrap()
    };
    assert_eq!(run(None, None, "c"), 3);
    assert_eq!(run(Some("8"), None, "e"), 8);
    assert_eq!(run(Some("8"), Some("9"), "f"), 9);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    // usage
    assert_eq!(code(&equicantor(p, &["calibrate", "--bogus"])), 2);
    assert_eq!(
        code(&equicantor(
            p,
            &["bounds", "--alphabet", "square", "--out", "x"]
        )),
        2
    );
    assert_eq!(
        code(&equicantor(
            p,
            &["calibrate", "--method", "fast", "--out", "y"]
        )),
        2
    );
    fs::write(p.join("bad.json"), r#"{"colour": 1}"#).unwrap();
    assert_eq!(
        code(&equicantor(
            p,
            &["bounds", "--config", "bad.json", "--out", "z"]
        )),
        2
    );
    fs::create_dir(p.join("empty")).unwrap();
    assert_eq!(code(&equicantor(p, &["export", "empty"])), 2);
    fs::create_dir(p.join("busy")).unwrap();
    fs::write(p.join("busy/.equicantor.lock"), "").unwrap();
    assert_eq!(code(&equicantor(p, &["bounds", "--out", "busy"])), 2);
    // infeasible calibration
    let out = equicantor(
        p,
        &[
            "calibrate",
            "--a",
            "1",
            "--r",
            "0.05",
            "--n",
            "5",
            "--out",
            "flat",
        ],
    );
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    // the control is a measurement and always succeeds
    let out = equicantor(p, &["calibrate", "--control", "--n", "8", "--out", "ctl"]);
    assert_eq!(code(&out), 0);
    // bounds reports, it does not judge
    assert_eq!(
        code(&equicantor(
            p,
            &["bounds", "--a", "2.9", "--r", "0.06", "--out", "b"]
        )),
        0
    );
}

#[test]
fn export_compares_calibrated_and_control_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(
        code(&equicantor(p, &["calibrate", "--n", "8", "--out", "cal"])),
        0
    );
    assert_eq!(
        code(&equicantor(
            p,
            &["calibrate", "--n", "8", "--control", "--out", "ctl"]
        )),
        0
    );
    let out = equicantor(p, &["export", "cal", "--compare", "ctl", "--out", "cmp"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cmp = read(&p.join("cmp/oscillation_comparison.csv"));
    let mut lines = cmp.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,calibrated_osc_normalized,control_osc_normalized,control_over_calibrated"
    );
    assert_eq!(lines.count(), 8);
}

#[test]
fn tampered_artifacts_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(
        code(&equicantor(p, &["calibrate", "--n", "4", "--out", "run"])),
        0
    );
    fs::write(p.join("run/trace.csv"), "n\n1\n").unwrap();
    assert_eq!(code(&equicantor(p, &["export", "run"])), 1);
}

#[test]
fn nothing_is_written_outside_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path().join("cwd");
    let out = tmp.path().join("out");
    fs::create_dir(&cwd).unwrap();
    let o = out.to_str().unwrap();
    for args in [
        vec!["bounds", "--search", "--out", o],
        vec![
            "green",
            "--n",
            "8",
            "--samples",
            "4",
            "--out",
            &format!("{o}/g"),
        ],
        vec!["calibrate", "--n", "6", "--out", &format!("{o}/c")],
    ] {
        let r = equicantor(&cwd, &args);
        assert_eq!(
            code(&r),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&r.stderr)
        );
    }
    assert_eq!(fs::read_dir(&cwd).unwrap().count(), 0);
    let mut top: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    top.sort();
    assert_eq!(top, ["cwd", "out"]);
}
