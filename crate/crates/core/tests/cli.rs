use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dirac_core::fixtures;
use dirac_core::problem::Problem;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn scratch(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn dirac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn check(file: &Path, extra: &[&str]) -> (i32, Value, String) {
    let mut args = vec!["check", file.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = dirac(&args);
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (
        out.status.code().unwrap(),
        report,
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn status<'a>(report: &'a Value, name: &str) -> &'a Value {
    let checks = report["checks"].as_array().unwrap();
    &checks.iter().find(|c| c["name"] == name).unwrap()["status"]
}

#[test]
fn fixture_exit_codes() {
    let cases = [
        ("example1-pinv.json", 0, "jacobi_and_casimir"),
        ("firstclass.json", 0, "jacobi_and_casimir"),
        ("dependent.json", 0, "jacobi_and_casimir"),
        ("counterexample.json", 1, "jacobi_only"),
        ("broken-jacobi.json", 1, "neither"),
        ("example1.json", 1, "jacobi_only"),
        ("obstructed.json", 2, "neither"),
    ];
    for (name, code, class) in cases {
        let (got, report, _) = check(&fixture(name), &["--points", "20"]);
        assert_eq!(got, code, "{name}");
        assert_eq!(report["classification"], class, "{name}");
    }
}

#[test]
fn example1_with_printed_d_reports_residual() {
    let (code, report, _) = check(&fixture("example1.json"), &["--points", "10"]);
    assert_eq!(code, 1);
    assert_eq!(status(&report, "d_residual"), "fail");
    assert_eq!(status(&report, "jacobi"), "pass");
    let d = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "d_residual")
        .unwrap();
    assert_eq!(d["witness"]["expression"], "z1*z3 - z3");
}

#[test]
fn counterexample_casimir_residual_is_two() {
    let (code, report, _) = check(&fixture("counterexample.json"), &["--points", "10"]);
    assert_eq!(code, 1);
    let casimir = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "casimir")
        .unwrap();
    assert_eq!(casimir["max_residual"], 2.0);
    let jacobi = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "jacobi")
        .unwrap();
    assert_eq!(jacobi["max_residual"], "exact-zero");
}

#[test]
fn obstruction_prints_witness() {
    let (code, report, stderr) = check(&fixture("obstructed.json"), &["--points", "10"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("witness"), "{stderr}");
    let k = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "kernel_condition")
        .unwrap();
    let v: Vec<f64> = serde_json::from_value(k["witness"]["vector"].clone()).unwrap();
    assert!(
        v[0].abs() < 1e-10 && v[1].abs() < 1e-10 && (v[2].abs() - 1.0).abs() < 1e-10,
        "{v:?}"
    );
}

#[test]
fn build_then_check_reproduces_report() {
    for name in [
        "example1-pinv.json",
        "counterexample.json",
        "dependent.json",
        "example1.json",
    ] {
        let out = scratch(&format!("built-{name}"));
        let built = dirac(&[
            "build",
            fixture(name).to_str().unwrap(),
            "--seed",
            "7",
            "--points",
            "15",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            built.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&built.stderr)
        );
        let direct = dirac(&[
            "check",
            fixture(name).to_str().unwrap(),
            "--seed",
            "7",
            "--points",
            "15",
        ]);
        let again = dirac(&["check", out.to_str().unwrap()]);
        assert_eq!(direct.stdout, again.stdout, "{name}");
        assert_eq!(direct.status.code(), again.status.code());
    }
}

#[test]
fn built_file_carries_assembled_matrices() {
    let out = scratch("built-firstclass.json");
    dirac(&[
        "build",
        fixture("firstclass.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["seed"], 0);
    assert_eq!(v["points"], 100);
    assert_eq!(v["tolerances"]["jacobi"], 1e-6);
    assert_eq!(v["assembled"]["d_provenance"], "pseudoinverse");
    assert_eq!(v["assembled"]["C"][0][1], "0");
}

#[test]
fn flags_override_file_settings() {
    let src = std::fs::read_to_string(fixture("firstclass.json")).unwrap();
    let mut v: Value = serde_json::from_str(&src).unwrap();
    v["seed"] = 5.into();
    v["points"] = 12.into();
    v["tolerances"] = serde_json::json!({"casimir": 1e-9});
    let path = scratch("firstclass-settings.json");
    std::fs::write(&path, v.to_string()).unwrap();

    let (_, from_file, _) = check(&path, &[]);
    assert_eq!(from_file["seed"], 5);
    assert_eq!(from_file["sample_points"].as_array().unwrap().len(), 12);
    assert_eq!(from_file["tolerances"]["casimir"], 1e-9);
    assert_eq!(from_file["tolerances"]["jacobi"], 1e-6);

    let (_, flagged, _) = check(
        &path,
        &[
            "--seed",
            "6",
            "--points",
            "8",
            "--tol-casimir",
            "1e-11",
            "--tol-jacobi",
            "1e-7",
            "--step",
            "1e-4",
        ],
    );
    assert_eq!(flagged["seed"], 6);
    assert_eq!(flagged["sample_points"].as_array().unwrap().len(), 8);
    assert_eq!(flagged["tolerances"]["casimir"], 1e-11);
    assert_eq!(flagged["tolerances"]["jacobi"], 1e-7);
    assert_eq!(flagged["tolerances"]["step"], 1e-4);
}

#[test]
fn reports_are_deterministic() {
    let a = dirac(&["check", fixture("dependent.json").to_str().unwrap(), "--points", "20"]);
    let b = dirac(&["check", fixture("dependent.json").to_str().unwrap(), "--points", "20"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn malformed_input_exits_three() {
    let cases = [
        ("bad-json.json", "{\"variables\": [\"x\"],,}", "line 1"),
        (
            "bad-poly.json",
            r#"{"variables": ["x", "y"], "poisson": {"1,2": "x*"}}"#,
            "poisson entry (1,2)",
        ),
        (
            "bad-var.json",
            r#"{"variables": ["x"], "constraints": ["y"]}"#,
            "constraints[0]",
        ),
        (
            "bad-index.json",
            r#"{"variables": ["x", "y"], "poisson": {"1,3": "1"}}"#,
            "poisson[\"1,3\"]",
        ),
        (
            "bad-d.json",
            r#"{"variables": ["x", "y"], "poisson": {"1,2": "1"}, "constraints": ["x", "y"], "D": [["0", "1"], ["1", "0"]]}"#,
            "D[0][1]",
        ),
    ];
    for (name, text, location) in cases {
        let path = scratch(name);
        std::fs::write(&path, text).unwrap();
        let file = path.to_str().unwrap();
        let target = scratch("unused.out");
        let target = target.to_str().unwrap();
        let invocations: [&[&str]; 4] = [
            &["validate", file],
            &["check", file],
            &["build", file, "--out", target],
            &["simulate", file, "--out", target],
        ];
        for args in invocations {
            let out = dirac(args);
            let stderr = String::from_utf8_lossy(&out.stderr);
            assert_eq!(out.status.code(), Some(3), "{name} {}: {stderr}", args[0]);
            assert!(stderr.contains(location), "{name}: {stderr}");
        }
    }
    assert_eq!(dirac(&["check", "/nonexistent/problem.json"]).status.code(), Some(3));
    assert_eq!(dirac(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(
        dirac(&["check", fixture("dependent.json").to_str().unwrap(), "--points", "0"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        dirac(&["check", fixture("dependent.json").to_str().unwrap(), "--step", "-1"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn validate_summarizes() {
    let out = dirac(&["validate", fixture("example1.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["variables"], 5);
    assert_eq!(v["constraints"], 3);
    assert_eq!(v["C"][0], serde_json::json!(["0", "-z3", "z2"]));
    assert_eq!(v["relaxed"], true);
}

#[test]
fn simulate_writes_trajectory() {
    let csv = scratch("example1.csv");
    let out = dirac(&[
        "simulate",
        fixture("example1-pinv.json").to_str().unwrap(),
        "--dt",
        "0.01",
        "--steps",
        "100",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "t,z1,z2,z3,w1,w2,drift_phi_max,drift_H");
    assert_eq!(lines.len(), 102);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    let w1 = summary["final_state"][3].as_f64().unwrap();
    assert!((w1 - 1f64.cos()).abs() < 1e-8);

    let custom = dirac(&[
        "simulate",
        fixture("example1-pinv.json").to_str().unwrap(),
        "--steps",
        "3",
        "--z0",
        "-1,0,0,0,1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(custom.status.code(), Some(0));
    assert!(std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("0,-1,0,0,0,1"));

    let obstructed = dirac(&[
        "simulate",
        fixture("obstructed.json").to_str().unwrap(),
        "--steps",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(obstructed.status.code(), Some(2));
    let no_h = dirac(&[
        "simulate",
        fixture("broken-jacobi.json").to_str().unwrap(),
        "--z0",
        "0,0,0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(no_h.status.code(), Some(3));
    let bad_dt = dirac(&[
        "simulate",
        fixture("example1-pinv.json").to_str().unwrap(),
        "--dt",
        "0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(bad_dt.status.code(), Some(3));
}

#[test]
fn bundled_fixtures_match_reference_systems() {
    let cases = [
        ("example1.json", fixtures::example1()),
        ("counterexample.json", fixtures::counterexample(2)),
        ("firstclass.json", fixtures::first_class()),
        ("dependent.json", fixtures::dependent()),
        ("obstructed.json", fixtures::obstructed()),
        ("broken-jacobi.json", fixtures::broken_jacobi()),
    ];
    for (name, f) in cases {
        let p = Problem::load(&fixture(name)).unwrap();
        assert_eq!(p.system.poisson(), &f.j, "{name}");
        assert_eq!(p.system.constraints(), &f.constraints, "{name}");
        if let Some(d) = &f.d {
            assert_eq!(p.d.as_ref(), Some(d), "{name}");
        }
    }
    let p = Problem::load(&fixture("example1.json")).unwrap();
    assert_eq!(p.d.as_ref(), Some(&fixtures::example1_printed_d()));
}
