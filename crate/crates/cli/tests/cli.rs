use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twostate"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn result(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

#[test]
fn epr_z_reports_certain_anticorrelation() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&bundled("epr_z.json"), tmp.path(), &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = result(tmp.path());
    assert_eq!(r["scalars"]["prob_minus"], json!(1.0));
    let keys: Vec<&str> = r.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in [
        "config_echo",
        "scalars",
        "distributions",
        "assertions",
        "seeds",
        "versions",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
    for a in r["assertions"].as_array().unwrap() {
        for k in ["name", "expected", "actual", "tolerance", "pass"] {
            assert!(a.get(k).is_some());
        }
    }
    assert!(tmp.path().join("summary.txt").exists());
}

#[test]
fn orthogonal_conditions_exit_one_and_name_the_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &json!({"scenario": "custom", "seed": 1, "params": {"pre": [1, 0], "post": [0, 1], "operator": "sigma_z"}}),
    );
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("/params/pre") && err.contains("/params/post"),
        "{err}"
    );
    assert!(err.contains("non-orthogonality"), "{err}");
}

#[test]
fn seed_changes_samples_not_closed_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = bundled("collapse_disturbed.json");
    assert_eq!(run(&cfg, &a, &["--trials", "2000"]).status.code(), Some(0));
    assert_eq!(
        run(&cfg, &b, &["--trials", "2000", "--seed", "99"])
            .status
            .code(),
        Some(0)
    );
    let (ra, rb) = (result(&a), result(&b));
    assert_eq!(
        ra["scalars"]["prob_jump_exact"],
        rb["scalars"]["prob_jump_exact"]
    );
    assert_eq!(
        ra["distributions"]["delta_pi_exact"],
        rb["distributions"]["delta_pi_exact"]
    );
    assert_ne!(ra["scalars"]["prob_jump_mc"], rb["scalars"]["prob_jump_mc"]);
    assert_eq!(rb["seeds"]["root"], json!(99));
}

#[test]
fn config_echo_reproduces_payload() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    assert_eq!(
        run(
            &bundled("collapse_qubit.json"),
            &first,
            &["--trials", "3000", "--set", "seed=5"]
        )
        .status
        .code(),
        Some(0)
    );
    let r1 = result(&first);
    let echo = write_config(tmp.path(), &r1["config_echo"]);
    let second = tmp.path().join("second");
    assert_eq!(run(&echo, &second, &[]).status.code(), Some(0));
    let a = std::fs::read_to_string(first.join("result.json")).unwrap();
    let b = std::fs::read_to_string(second.join("result.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn failed_assertion_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &bundled("collapse_disturbed.json"),
        tmp.path(),
        &["--trials", "1000", "--set", "tolerances.mc_matches_exact=0"],
    );
    assert_eq!(o.status.code(), Some(2));
    let summary = std::fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(summary.contains("FAIL mc_matches_exact"));
}

#[test]
fn validate_accepts_every_bundled_scenario() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let o = bin().arg("validate").arg(&path).output().unwrap();
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&o.stderr)
        );
        count += 1;
    }
    assert!(count >= 5);
}

#[test]
fn validate_reports_missing_seed_pointer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &json!({"scenario": "epr", "params": {"n1": [0, 0, 1], "n2": [0, 0, 1]}}),
    );
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/seed"));
}

#[test]
fn validate_rejects_non_hermitian_operator() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &json!({"scenario": "custom", "seed": 1, "params": {
            "pre": [1, 0], "post": [1, 1], "operator": [[0, 1], [0, 0]]}}),
    );
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Hermitian"));
}

#[test]
fn ambiguous_spin_window_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &bundled("spin_weak.json"),
        tmp.path(),
        &["--set", "params.s2n2=0.1"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("window"));
}
