use std::path::PathBuf;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_septensor");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(BIN).args(args).env(key, value).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn value_after(text: &str, prefix: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("no '{prefix}' in:\n{text}"));
    line[prefix.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("e2e");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn crossing(o: &Output) -> f64 {
    value_after(&stderr(o), "crossing: q = ")
}

#[test]
fn analyze_exit_codes() {
    let o = run(&["analyze", "ghz:3"]);
    assert_eq!(code(&o), 3);
    assert!((value_after(&stdout(&o), "S = ") - 5.0).abs() < 1e-9);
    assert!(stdout(&o).contains("verdict: entangled"));

    let o = run(&["analyze", "maxmixed:3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(value_after(&stdout(&o), "S = "), 0.0);

    let o = run(&["analyze", "w:3", "--noise", "0.9"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("verdict: separable"));

    for bad in ["nonsense:3", "ghz:1", "werner:2", "ghzdiag:0.5,0.5"] {
        let o = run(&["analyze", bad]);
        assert_eq!(code(&o), 1, "{bad}");
        assert!(stderr(&o).starts_with("error:"), "{bad}");
    }
    assert_eq!(code(&run(&["analyze", "w:3", "--noise", "1.5"])), 1);
}

#[test]
fn clap_exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["analyze"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

#[test]
fn analyze_named_states() {
    for (spec, want) in [("w:3", 19.0 / 3.0), ("w:4", 21.0), ("ghz:4", 9.0), ("bell:phi+", 3.0), ("+~-0", 1.0)] {
        let o = run(&["analyze", spec]);
        assert!((value_after(&stdout(&o), "S = ") - want).abs() < 1e-9, "{spec}");
        assert_eq!(code(&o), if want > 1.0 + 1e-9 { 3 } else { 0 }, "{spec}");
    }
}

#[test]
fn analyze_json_and_tensor() {
    let o = run(&["analyze", "w:3", "--json"]);
    assert_eq!(code(&o), 3);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["S"].as_f64().unwrap() - 19.0 / 3.0).abs() < 1e-9);
    assert_eq!(v["verdict"], "entangled");
    assert_eq!(v["n_qubits"], 3);
    assert!(v["diagnostics"]["allocations"].is_array());

    let o = run(&["analyze", "ghz:3", "--show-tensor"]);
    assert!(stdout(&o).contains("T_add[:,:,3]"));
}

#[test]
fn state_files() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let sv = scratch("ghz3.json");
    let mut amps = vec![[0.0, 0.0]; 8];
    amps[0] = [h, 0.0];
    amps[7] = [h, 0.0];
    std::fs::write(&sv, serde_json::json!({"n_qubits": 3, "statevector": amps}).to_string()).unwrap();
    let o = run(&["analyze", sv.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!((value_after(&stdout(&o), "S = ") - 5.0).abs() < 1e-9);
    let o = run(&["analyze", &format!("file:{}", sv.display())]);
    assert_eq!(code(&o), 3);

    let dm = scratch("mixed2.json");
    let entries: Vec<[f64; 2]> = (0..16).map(|k| if k % 5 == 0 { [0.25, 0.0] } else { [0.0, 0.0] }).collect();
    std::fs::write(&dm, serde_json::json!({"n_qubits": 2, "density": entries}).to_string()).unwrap();
    let o = run(&["analyze", dm.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(value_after(&stdout(&o), "S = "), 0.0);

    let bad = scratch("bad.json");
    std::fs::write(&bad, r#"{"n_qubits": 2, "density": [[1, 0]]}"#).unwrap();
    assert_eq!(code(&run(&["analyze", bad.to_str().unwrap()])), 1);
    std::fs::write(&bad, r#"{"n_qubits": 1, "statevector": [[1, 0], [1, 0]]}"#).unwrap();
    assert_eq!(code(&run(&["analyze", bad.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["analyze", "file:/nonexistent/state.json"])), 1);
}

#[test]
fn sweep_crossings() {
    let o = run(&["sweep", "w:3", "0", "1", "--steps", "100"]);
    assert_eq!(code(&o), 0);
    assert!((crossing(&o) - 16.0 / 19.0).abs() < 1e-6);
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "q,S,verdict,negativity,concurrence");
    assert_eq!(lines.len(), 102);
    assert!(lines[1].starts_with("0,6.33333333333,entangled,"));
    assert!(!csv.contains('\r'));

    let o = run(&["sweep", "w:4", "0", "1"]);
    assert!((crossing(&o) - 20.0 / 21.0).abs() < 1e-6);

    let o = run(&["sweep", "ghz:3", "0", "0"]);
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,5,"));

    assert_eq!(code(&run(&["sweep", "w:3", "0.5", "0.2"])), 1);
    assert_eq!(code(&run(&["sweep", "w:3", "-0.1", "0.2"])), 1);
}

#[test]
fn csv_is_deterministic() {
    let cases: [&[&str]; 3] = [
        &["sweep", "w:3", "0", "1", "--steps", "50"],
        &["sweep", "werner:0", "0", "1", "--steps", "30"],
        &["robustness", "4", "E", "--steps", "40"],
    ];
    for args in cases {
        let a = run(args);
        let b = run(args);
        let c = run_env(args, "SEPTENSOR_THREADS", "1");
        let d = run_env(args, "SEPTENSOR_THREADS", "3");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.stdout, c.stdout, "{args:?}");
        assert_eq!(a.stdout, d.stdout, "{args:?}");
    }
}

#[test]
fn decompose_examples() {
    let o = run(&["decompose", "ghz:3", "--noise", "0.8", "--verify"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("members: 18 pure product"));
    assert!(value_after(&text, "max residual: ") < 1e-9);

    let o = run(&["decompose", "w:3", "--noise", "0.842106", "--verify"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("members: 31 pure product"));
    assert!(value_after(&text, "max residual: ") < 1e-9);

    let o = run(&["decompose", "w:4", "--noise", "0.95238095238095", "--verify", "--mixed"]);
    assert_eq!(code(&o), 0);
    assert!(value_after(&stdout(&o), "max residual: ") < 1e-9);

    assert_eq!(code(&run(&["decompose", "ghz:3"])), 3);
}

#[test]
fn decompose_writes_json() {
    let path = scratch("ghz3-ensemble.json");
    let o = run(&["decompose", "ghz:3", "--noise", "0.8", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["n_qubits"], 3);
    let total: f64 = v["pure"].as_array().unwrap().iter().map(|m| m["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(v["pure"].as_array().unwrap().len(), 18);
}

#[test]
fn robustness_examples() {
    let o = run(&["robustness", "4", "E2dbl"]);
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    assert_eq!(csv.lines().next().unwrap(), "q,value,zero_crossing");
    assert!(csv.lines().last().unwrap().starts_with("1,-1,"));

    let o = run(&["robustness", "4", "E", "--find-zero"]);
    let zero: f64 = stdout(&o).trim().parse().unwrap();
    assert!((zero - (1.0 - 9f64.powf(-0.25))).abs() < 1e-4);

    let o = run(&["robustness", "400", "E"]);
    assert_eq!(code(&o), 0);
    let values: Vec<f64> =
        stdout(&o).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values[0], 1.0);
    assert!(values.windows(2).all(|w| w[1] <= w[0]));

    assert_eq!(code(&run(&["robustness", "1", "E"])), 1);
    assert_eq!(code(&run(&["robustness", "4", "F"])), 1);
}

#[test]
fn ghzdiag_examples() {
    let o = run(&["ghzdiag", "1", "0", "0", "0", "0", "0", "0", "0", "--check"]);
    assert_eq!(code(&o), 3);
    assert_eq!(value_after(&stdout(&o), "S = "), 5.0);
    assert!(stdout(&o).contains("pipeline S = 5"));

    let uniform = vec![".125"; 8];
    let mut args = vec!["ghzdiag"];
    args.extend(uniform);
    let o = run(&args);
    assert_eq!(code(&o), 0);
    assert_eq!(value_after(&stdout(&o), "S = "), 0.0);

    let o = run(&["ghzdiag", ".5", ".5", "0", "0", "0", "0", "0", "0"]);
    assert_eq!(code(&o), 0);
    assert!((value_after(&stdout(&o), "S = ") - 1.0).abs() < 1e-12);

    assert_eq!(code(&run(&["ghzdiag", ".5", ".4", "0", "0", "0", "0", "0", "0"])), 1);
    assert_eq!(code(&run(&["ghzdiag", "1", "0"])), 1);
}

#[test]
fn compare_reports_baselines() {
    let o = run(&["compare", "werner:0.5"]);
    assert_eq!(code(&o), 3);
    let text = stdout(&o);
    assert!(text.contains("concurrence: 0.25"));
    assert!(text.contains("negativity 0|1: 0.25"));
    assert_eq!(code(&run(&["compare", "werner:0.8"])), 0);
}

#[test]
fn config_files() {
    let cfg = scratch("run.toml");
    std::fs::write(&cfg, "verdict_tol = 1e-6\nsteps = 4\nframe = \"native\"\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "sweep", "ghz:3", "0", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 6);

    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&run(&["--config", cfg.to_str().unwrap(), "analyze", "ghz:3"])), 1);
    std::fs::write(&cfg, "verdict_tol = -1.0\n").unwrap();
    assert_eq!(code(&run(&["--config", cfg.to_str().unwrap(), "analyze", "ghz:3"])), 1);
    assert_eq!(code(&run(&["--config", "/nonexistent.toml", "analyze", "ghz:3"])), 1);
}

#[test]
fn random_states_follow_the_seed() {
    let cfg = scratch("seed.toml");
    std::fs::write(&cfg, "seed = 42\n").unwrap();
    let a = run(&["--config", cfg.to_str().unwrap(), "analyze", "random:2", "--json"]);
    let b = run(&["--config", cfg.to_str().unwrap(), "analyze", "random:2", "--json"]);
    let c = run(&["analyze", "random:2", "--json"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}
