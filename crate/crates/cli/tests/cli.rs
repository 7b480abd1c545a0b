use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gsc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsc"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = gsc(dir, args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    summary(dir)
}

#[test]
fn thresholds_table_has_the_bcc_row() {
    let tmp = tempfile::tempdir().unwrap();
    let s = ok(tmp.path(), &["lattice", "thresholds", "--k0", "6.2831853"]);
    assert_eq!(s["passed"], true);
    let k0 = 6.2831853f64;
    let oracle = (k0 / PI).powi(3) / (8.0 * 2f64.sqrt());
    let table = std::fs::read_to_string(tmp.path().join("thresholds.csv")).unwrap();
    let row = table.lines().find(|l| l.starts_with("bcc,")).expect("bcc row");
    let computed: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((computed - oracle).abs() < 1e-12 * oracle);
    assert!(row.contains(",0.7071"));
}

#[test]
fn triangle_potential_at_the_origin() {
    let tmp = tempfile::tempdir().unwrap();
    let k0 = 3.0f64;
    let s = ok(tmp.path(), &["potential", "eval", "--profile", "triangle", "--k0", "3", "--r", "0"]);
    let phi = s["result"]["phi"][0].as_f64().unwrap();
    let oracle = k0 * k0 / (2.0 * PI);
    assert!((phi - oracle).abs() < 1e-12 * oracle, "{phi} vs {oracle}");
}

#[test]
fn bcc_at_threshold_sits_on_the_plateau() {
    let tmp = tempfile::tempdir().unwrap();
    let s = ok(
        tmp.path(),
        &["energy", "density", "--profile", "longrange", "--lattice", "bcc", "--threshold-multiple", "1"],
    );
    let r = &s["result"];
    let rho3 = (2.0f64).powi(3) / (8.0 * 2f64.sqrt());
    let (rho, phi_hat0, phi0) = (
        r["density"].as_f64().unwrap(),
        r["phi_hat_at_zero"].as_f64().unwrap(),
        r["phi_at_zero"].as_f64().unwrap(),
    );
    assert!((rho - rho3).abs() < 1e-12 * rho3);
    let oracle = 0.5 * rho3 * (rho3 * phi_hat0 - phi0);
    let e = r["energy_density"].as_f64().unwrap();
    assert!((e - oracle).abs() < 1e-10 * oracle.abs(), "{e} vs {oracle}");
    assert_eq!(s["passed"], true);
    let shells = std::fs::read_to_string(tmp.path().join("shells.csv")).unwrap();
    assert_eq!(shells.lines().count(), 1, "no reciprocal vector inside the ball");
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["lattice", "thresholds", "--no-such-flag"],
        vec!["energy", "density", "--profile", "longrange"],
        vec!["energy", "density", "--profile", "nope", "--lattice", "bcc"],
        vec!["energy", "density", "--profile", "missing.json", "--lattice", "bcc"],
        vec!["energy", "density", "--profile", "longrange", "--lattice", "xyz"],
    ];
    for args in cases {
        let out = gsc(tmp.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn schema_violations_in_the_config_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_key = tmp.path().join("bad_key.json");
    std::fs::write(&bad_key, r#"{"profile": {"fixture": "longrange"}, "colour": 1}"#).unwrap();
    let bad_param = tmp.path().join("bad_param.json");
    std::fs::write(
        &bad_param,
        r#"{"profile": {"fixture": "longrange"}, "lattice": {"name": "bcc"}, "params": {"trails": 3}}"#,
    )
    .unwrap();
    for (file, cmd) in [(&bad_key, ["potential", "build"]), (&bad_param, ["verify", "perturb"])] {
        let out = gsc(&tmp.path().join("out"), &[cmd[0], cmd[1], "--config", file.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn failed_checks_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    // expanded sc has reciprocal vectors inside the ball, so its field is not constant
    let out = gsc(
        tmp.path(),
        &["energy", "field", "--profile", "longrange", "--lattice", "sc", "--threshold-multiple", "0.7"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(tmp.path())["passed"], false);
}

#[test]
fn flags_override_config_values() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("run.json");
    std::fs::write(
        &file,
        r#"{"profile": {"fixture": "longrange"}, "lattice": {"name": "bcc", "threshold_multiple": 1.0},
            "seed": 5, "params": {"trials": 40, "ensemble": "grand"}}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let s = ok(&out, &["verify", "perturb", "--config", file.to_str().unwrap(), "--seed", "6", "--trials", "30"]);
    assert_eq!(s["seed"], 6);
    assert_eq!(s["params"]["trials"], 30);
    assert_eq!(s["params"]["ensemble"]["mode"], "grand");
    let lines = std::fs::read_to_string(out.join("trials.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 30);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "verify", "perturb", "--profile", "mollified", "--lattice", "bcc", "--threshold-multiple", "1.2", "--trials",
        "200", "--seed", "9",
    ];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&a, &args);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "2"]);
    ok(&b, &threaded);
    for name in ["summary.json", "trials.jsonl"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(a.join("metadata.json")).unwrap()).unwrap();
    assert!(meta["started_unix"].as_f64().unwrap() > 0.0);
}

#[test]
fn optimizer_run_reports_the_floor() {
    let tmp = tempfile::tempdir().unwrap();
    let s = ok(
        tmp.path(),
        &[
            "optimize", "run", "--profile", "longrange", "--lattice", "bcc", "--conventional", "--threshold-multiple",
            "1", "--multipliers", "2,2,2", "--seed", "1",
        ],
    );
    let r = &s["result"];
    for key in ["seed", "N", "cell", "final_energy", "floor", "residual", "iterations"] {
        assert!(!r[key].is_null(), "{key}");
    }
    assert_eq!(r["N"], 16);
    let (e, floor) = (r["final_energy"].as_f64().unwrap(), r["floor"].as_f64().unwrap());
    assert!(e - floor < 1e-8 * floor.abs());
    let positions = std::fs::read_to_string(tmp.path().join("positions.csv")).unwrap();
    assert_eq!(positions.lines().count(), 17);

    // the final positions feed back into the structure-factor map
    let map_dir = tmp.path().join("map");
    let pos = tmp.path().join("positions.csv");
    let m = ok(
        &map_dir,
        &[
            "optimize", "sfmap", "--profile", "longrange", "--lattice", "bcc", "--conventional", "--threshold-multiple",
            "1", "--multipliers", "2,2,2", "--positions", pos.to_str().unwrap(),
        ],
    );
    let residual = m["result"]["residual"].as_f64().unwrap();
    assert!((residual - r["residual"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn csv_values_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let s = ok(tmp.path(), &["potential", "eval", "--profile", "mollified", "--r", "0.1,0.7,3.3"]);
    let table = std::fs::read_to_string(tmp.path().join("phi.csv")).unwrap();
    for (line, expected) in table.lines().skip(1).zip(s["result"]["phi"].as_array().unwrap()) {
        let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(value.to_bits(), expected.as_f64().unwrap().to_bits());
    }
}
