use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regret-manager"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scenario(name: &str) -> String {
    scenarios().join(name).to_string_lossy().into_owned()
}

fn write_scenario(dir: &Path, body: &str) -> String {
    let p = dir.join("s.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        &scenario("example2_weighted.json"),
        "--horizon",
        "2e3",
        "--out",
        out.to_str().unwrap(),
        "--T",
        "1,2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2001);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rounds"], 2000);
    assert_eq!(summary["manager"], "weighted");
    let verdicts = summary["verdicts"].as_array().unwrap();
    assert!(verdicts.iter().any(|v| v["check"] == "lookahead_gap_T2"));
    assert!(verdicts.iter().all(|v| v["passed"] == true));
}

#[test]
fn zero_horizon_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z");
    let o = run(&["run", &scenario("example2_weighted.json"), "--horizon", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("t,omega_1,omega_2,b_1,b_2,alpha_1"));
}

#[test]
fn summary_only_skips_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let body = format!(
        r#"{{"game":{{"example":{{"id":"example1","sharing":"no_share"}}}},
            "manager":{{"variant":"baseline"}},"horizon":100,"seed":3,
            "outputs":{{"dir":"{}","summary_only":true}}}}"#,
        out.display()
    );
    let o = run(&["run", &write_scenario(dir.path(), &body)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("summary.json").exists());
    assert!(!out.join("trace.csv").exists());
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "/definitely/not/here.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not/here.json"));

    let bad_field = r#"{"game":{"example":{"id":"example2","sharing":"share"}},
        "manager":{"variant":"weighted","V":10.0,"theta":[1.0,1.0]},"horizon":10,"seed":1,"colour":1}"#;
    let o = run(&["run", &write_scenario(dir.path(), bad_field)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    let bad_type = r#"{"game":{"example":{"id":"example2","sharing":"share"}},
        "manager":{"variant":"weighted","V":"ten","theta":[1.0,1.0]},"horizon":10,"seed":1}"#;
    let o = run(&["run", &write_scenario(dir.path(), bad_type)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("manager"), "{}", stderr(&o));

    // player 2 may only use location 2
    let illegal = r#"{"game":{"example":{"id":"example2","sharing":"share"}},
        "baselines":[{"kind":"constant","action":1},{"kind":"constant","action":1}],
        "manager":{"variant":"baseline"},"horizon":10,"seed":1}"#;
    let o = run(&["run", &write_scenario(dir.path(), illegal)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let bad_theta = r#"{"game":{"example":{"id":"example2","sharing":"share"}},
        "manager":{"variant":"weighted","V":10.0,"theta":[1.0]},"horizon":10,"seed":1}"#;
    let o = run(&["run", &write_scenario(dir.path(), bad_theta)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn guard_limit_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "verify-bounds",
            "--scenario",
            &scenario("example2_weighted.json"),
            "--horizon",
            "20",
            "--T",
            "4",
        ])
        .env("REGRET_MANAGER_GUARD_LIMIT", "10")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stderr(&o).contains("limit"), "{}", stderr(&o));

    let o = bin()
        .args(["run", &scenario("example2_weighted.json"), "--horizon", "5"])
        .env("REGRET_MANAGER_GUARD_LIMIT", "lots")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

fn produce(dir: &Path) -> PathBuf {
    let out = dir.join("trace");
    let o = run(&[
        "run",
        &scenario("example2_log_offset.json"),
        "--horizon",
        "500",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn verify_bounds_accepts_an_honest_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = produce(dir.path());
    let o = run(&[
        "verify-bounds",
        "--scenario",
        &scenario("example2_log_offset.json"),
        "--trace",
        out.to_str().unwrap(),
        "--T",
        "1,2",
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    for name in ["queue_growth", "regret_bound", "utility_vs_proxy", "proxy_identity", "lookahead_gap_T2"] {
        assert!(text.contains(&format!("PASS {name}")), "{name} missing:\n{text}");
    }
}

#[test]
fn verify_bounds_rejects_a_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = produce(dir.path());
    let path = out.join("trace.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    // swap in a different suggestion for player 1 on one row
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == "alpha_1").unwrap();
    let mut cells: Vec<String> = lines[200].split(',').map(str::to_string).collect();
    cells[col] = if cells[col] == "1" { "2".into() } else { "1".into() };
    lines[200] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let o = run(&[
        "verify-bounds",
        "--scenario",
        &scenario("example2_log_offset.json"),
        "--trace",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"), "{}", stdout(&o));
}

#[test]
fn verify_bounds_detects_a_foreign_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = produce(dir.path());
    let o = run(&[
        "verify-bounds",
        "--scenario",
        &scenario("example2_weighted.json"),
        "--trace",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("fingerprint"), "{}", stderr(&o));
}

#[test]
fn v_sweep_reports_each_value() {
    let o = run(&[
        "verify-bounds",
        "--scenario",
        &scenario("example2_weighted.json"),
        "--horizon",
        "200",
        "--T",
        "1",
        "--V-sweep",
        "10,100,1000",
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("V sweep"))
        .skip(2)
        .collect();
    assert_eq!(rows.len(), 3, "{text}");
    assert!(rows.iter().all(|r| r.ends_with("PASS")));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&[
            "run",
            &scenario("piecewise_stress.json"),
            "--horizon",
            "3000",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
}

#[test]
fn reproduce_examples_prints_six_rows() {
    let o = run(&["reproduce-examples", "--horizon", "200000"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.ends_with("PASS")).count(), 6, "{text}");
}

#[test]
fn serve_rejects_a_bad_seat() {
    let o = run(&["serve", &scenario("interactive_example2.json"), "--port", "0", "--human", "3"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn serve_reports_a_busy_port() {
    let listener = std::net::TcpListener::bind("0.0.0.0:0").unwrap();
    let port = listener.local_addr().unwrap().port().to_string();
    let o = run(&["serve", &scenario("interactive_example2.json"), "--port", &port]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains(&port));
}
