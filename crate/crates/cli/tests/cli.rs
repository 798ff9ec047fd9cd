use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epiconsensus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

const SWEEP: &str = r#"
name = "cli"
trials = 4
seed_base = 9
outputs = ["trials", "histogram", "trajectory", "comparison", "bounds-table"]

[[config]]
label = "basic"
n = 30
w0 = 2
w1 = 4
record_trajectory = true

[[config]]
label = "waiting"
n = 30
w0 = 2
w1 = 4
variant = "waiting"
"#;

#[test]
fn simulate_writes_trial_and_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let trials = dir.path().join("trials.csv");
    let out = run(&[
        "simulate", "-n", "40", "--w0", "2", "--w1", "5", "--seed", "3",
        "--trajectory", traj.to_str().unwrap(), "--trials-csv", trials.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first_line(&traj), "step,zeros,ones,empties,collisions");
    assert_eq!(first_line(&trials), "seed,decision,big_steps");
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["seed"], 3);
    let steps = json["big_steps"].as_u64().unwrap();
    assert_eq!(fs::read_to_string(&traj).unwrap().lines().count() as u64, steps + 1);
}

#[test]
fn simulate_batch_reports_summary() {
    let out = run(&["simulate", "-n", "30", "--w0", "0", "--w1", "3", "--trials", "5", "--schedule", "rounds"]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["trials"], 5);
    assert_eq!(json["schedule"], "rounds");
    assert_eq!(json["decisions"]["one"], 1.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(&config, SWEEP).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = run(&["sweep", config.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8, "{names:?}");
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
    assert_eq!(first_line(&a.join("cli_comparison.csv")), "seed,basic_steps,waiting_steps");
    assert_eq!(first_line(&a.join("cli_basic_histogram.csv")), "bin,lo,hi,count");
}

#[test]
fn bounds_prints_csv() {
    let out = run(&["bounds", "--w0", "1", "--w1", "3", "-n", "10,100"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("n,w0,w1,p,"));
    assert!(lines.next().unwrap().starts_with("10,1,3,0.75,"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn oracle_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("chain.csv");
    let out = run(&["oracle", "--w0", "1", "--w1", "2", "-n", "4", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    // Win 4/9, lose 1/9, starts drawn from Binomial(4, 2/3): 16/17 by hand.
    let p: f64 = text.lines().last().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((p - 16.0 / 17.0).abs() < 1e-12, "{text}");
    assert_eq!(first_line(&csv), "i,absorb_high,expected_steps");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 6);
}

#[test]
fn compare_writes_paired_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cmp.csv");
    let out = run(&["compare", "-n", "40", "--w0", "2", "--w1", "3", "--trials", "8", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["trials"], 8);
    assert_eq!(first_line(&csv), "seed,basic_steps,waiting_steps");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 9);
}

#[test]
fn bad_configuration_exits_one() {
    for args in [
        &["simulate", "-n", "1", "--w0", "1", "--w1", "2"][..],
        &["simulate", "-n", "10", "--w0", "1", "--w1", "2", "--variant", "lazy"],
        &["simulate", "-n", "10", "--w0", "1", "--w1", "2", "--schedule", "sometimes"],
        &["simulate", "-n", "10", "--w0", "0", "--w1", "0"],
        &["simulate", "-n", "10", "--w0", "1", "--w1", "2", "--trials", "3", "--trajectory", "x.csv"],
        &["bounds", "--w0", "1", "--w1", "2"],
        &["frobnicate"],
    ] {
        let out = run(args);
        assert_eq!(code(&out), 1, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn io_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let inside = blocker.join("out.csv");
    let out = run(&["simulate", "-n", "10", "--w0", "1", "--w1", "2", "--trials-csv", inside.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("file"));

    let missing = dir.path().join("missing.toml");
    let out = run(&["sweep", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["simulate", "--help"])), 0);
}
