use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_swarmdraw"));
    c.env_remove("SWARMDRAW_SEED");
    c
}

fn pattern(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../patterns").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn p(name: &str) -> String {
    pattern(name).to_string_lossy().into_owned()
}

#[test]
fn analyze_reports_branches() {
    let sq = run(&["analyze", &p("square"), "--json"]);
    assert_eq!(code(&sq), 0);
    let v = stdout_json(&sq);
    assert_eq!(v["sym"], 4);
    assert_eq!(v["branch"], "star");

    let s3 = run(&["analyze", &p("sym3-12"), "--json"]);
    assert_eq!(code(&s3), 0);
    let v = stdout_json(&s3);
    assert_eq!((v["n"].as_u64(), v["sym"].as_u64()), (Some(12), Some(3)));
    assert_eq!(v["branch"], "main");
    assert!(v["epsilon"].as_f64().unwrap() > 0.0);
    assert_eq!(v["delta"].as_f64(), Some(0.1));

    let text = run(&["analyze", &p("asym7")]);
    assert_eq!(code(&text), 0);
    assert!(String::from_utf8_lossy(&text.stdout).contains("branch    main"));
}

#[test]
fn analyze_flags_disconnected_and_invalid_input() {
    let d = run(&["analyze", &p("disconnected")]);
    assert_eq!(code(&d), 3);
    assert!(String::from_utf8_lossy(&d.stderr).contains("not connected"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"points\": [[0, 0], [0, 0]]}").unwrap();
    assert_eq!(code(&run(&["analyze", bad.to_str().unwrap()])), 2);
    fs::write(&bad, "not json").unwrap();
    assert_eq!(code(&run(&["analyze", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["analyze", "/definitely/missing.json"])), 2);
}

#[test]
fn params_c_overrides_the_constant() {
    let a = stdout_json(&run(&["analyze", &p("asym7"), "--json"]));
    let b = stdout_json(&run(&["analyze", &p("asym7"), "--json", "--params-c", "0.005"]));
    let (ea, eb) = (a["epsilon"].as_f64().unwrap(), b["epsilon"].as_f64().unwrap());
    assert!((ea / eb - 2.0).abs() < 1e-12);
    assert_eq!(code(&run(&["analyze", &p("asym7"), "--params-c", "-1"])), 2);
}

#[test]
fn simulate_from_initial_pattern_forms_within_hops_plus_two() {
    for name in ["asym7", "sym3-12", "wave10"] {
        let hops = stdout_json(&run(&["analyze", &p(name), "--json"]))["hops"].as_u64().unwrap();
        let o = run(&["simulate", &p(name), "--json"]);
        assert_eq!(code(&o), 0, "{name}");
        let v = stdout_json(&o);
        assert_eq!(v["verdict"], "formed");
        assert!(v["rounds"].as_u64().unwrap() <= hops + 2, "{name}");
        assert!(v["max_error"].as_f64().unwrap() <= 1e-6);
    }
    let star = run(&["simulate", &p("square")]);
    assert_eq!(code(&star), 0);
}

#[test]
fn round_limit_gives_exit_one() {
    let o = run(&["simulate", &p("wave10"), "--max-rounds", "1"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("timeout"));
}

#[test]
fn seeds_do_not_change_verdict_or_rounds() {
    let base = stdout_json(&run(&["simulate", &p("sym3-12"), "--json", "--seed", "1"]));
    for seed in ["2", "77", "123456789"] {
        let v = stdout_json(&run(&["simulate", &p("sym3-12"), "--json", "--seed", seed]));
        assert_eq!(v["verdict"], base["verdict"]);
        assert_eq!(v["rounds"], base["rounds"]);
    }
    let env = bin().args(["simulate", &p("sym3-12"), "--json"]).env("SWARMDRAW_SEED", "99").output().unwrap();
    assert_eq!(stdout_json(&env)["rounds"], base["rounds"]);
}

#[test]
fn near_gathering_files_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    // 12 robots, spread in a disc of radius 0.4 without symmetry.
    let pts: Vec<[f64; 2]> = (0..12)
        .map(|k| {
            let r = 0.1 + 0.025 * k as f64;
            let a = 2.3 * k as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let ok = dir.path().join("ng.json");
    fs::write(&ok, serde_json::json!({ "points": pts }).to_string()).unwrap();
    let o = run(&["simulate", &p("sym3-12"), "--from", ok.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["verdict"], "formed");

    // A regular 7-gon has symmetricity 7, which does not divide sym(asym7) = 1.
    let hept: Vec<[f64; 2]> =
        (0..7).map(|k| std::f64::consts::TAU * k as f64 / 7.0).map(|a| [0.3 * a.cos(), 0.3 * a.sin()]).collect();
    let bad = dir.path().join("hept.json");
    fs::write(&bad, serde_json::json!({ "points": hept }).to_string()).unwrap();
    let o = run(&["simulate", &p("asym7"), "--from", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not divide"));

    let wide: Vec<[f64; 2]> = (0..7).map(|k| [0.3 * k as f64, 0.0]).collect();
    fs::write(&bad, serde_json::json!({ "points": wide }).to_string()).unwrap();
    let o = run(&["simulate", &p("asym7"), "--from", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diameter"));
}

#[test]
fn simulate_rejects_disconnected_patterns_and_large_noise() {
    assert_eq!(code(&run(&["simulate", &p("disconnected")])), 3);
    assert_eq!(code(&run(&["simulate", &p("asym7"), "--noise-mu", "0.01"])), 2);
}

#[test]
fn exported_plans_are_checked_by_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    assert_eq!(code(&run(&["plan", &p("asym7"), "--out", plan.to_str().unwrap()])), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&plan).unwrap()).unwrap();
    assert!(v["vertices"].as_array().unwrap().len() >= 3);
    assert_eq!(code(&run(&["simulate", &p("asym7"), "--plan", plan.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["simulate", &p("wave10"), "--plan", plan.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["plan", &p("square")])), 2);
    assert_eq!(code(&run(&["plan", &p("disconnected")])), 3);
}

#[test]
fn render_samples_every_k_rounds_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    // Stopping at round 9 leaves records for rounds 0..=9.
    let o = run(&["simulate", &p("wave10"), "--max-rounds", "9", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let out = dir.path().join("frames");
    assert_eq!(code(&run(&["render", trace.to_str().unwrap(), "--out", out.to_str().unwrap(), "--every", "5"])), 0);
    let mut names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["frame_000000.svg", "frame_000005.svg", "frame_000009.svg"]);
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(out.join(n)).unwrap()).collect();

    let again = dir.path().join("again");
    assert_eq!(code(&run(&["render", trace.to_str().unwrap(), "--out", again.to_str().unwrap(), "--every", "5"])), 0);
    for (n, bytes) in names.iter().zip(&first) {
        assert_eq!(&fs::read(again.join(n)).unwrap(), bytes, "{n}");
    }
}

#[test]
fn render_rejects_unreadable_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    assert_eq!(code(&run(&["render", "/definitely/missing.jsonl", "--out", out.to_str().unwrap()])), 2);
    let junk = dir.path().join("junk.jsonl");
    fs::write(&junk, "{\"round\": 0}\nnot json\n").unwrap();
    assert_eq!(code(&run(&["render", junk.to_str().unwrap(), "--out", out.to_str().unwrap()])), 2);
}

#[test]
fn traces_replay_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for t in [&a, &b] {
        assert_eq!(code(&run(&["simulate", &p("sym3-12"), "--seed", "5", "--trace", t.to_str().unwrap()])), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
