use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydberg-cnot")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    run(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn error_budget_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["error-budget"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("E = 6.5"), "{text}");
    assert!(text.contains("total 0.064"), "{text}");
    for f in ["report.txt", "config.toml", "dephasing.csv", "error_budget_this_work.csv", "error_budget_previous.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(dir.path().join("report.txt")).unwrap(), text);
}

#[test]
fn noiseless_truth_table_is_a_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["truth-table", "--no-noise", "--shots", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(dir.path().join("truth_table_raw.csv")).unwrap();
    let expected = [[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for (row, want) in rows.iter().zip(expected) {
        for j in 0..4 {
            let p: f64 = row[j + 1].parse().unwrap();
            assert!((p - want[j]).abs() < 0.02, "{row:?}");
        }
    }
}

#[test]
fn parity_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["parity", "--seed", "1", "--shots", "1000"];
    assert_eq!(run_in(a.path(), &[&args[..], &["--workers", "1"]].concat()).status.code(), Some(0));
    assert_eq!(run_in(b.path(), &[&args[..], &["--workers", "4"]].concat()).status.code(), Some(0));
    for f in ["parity.csv", "parity_fit.csv", "bell_b1_populations.csv", "report.txt"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn config_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = stdout(&run(&["config", "--seed", "9", "--no-noise"]));
    let path = dir.path().join("run.toml");
    std::fs::write(&path, &first).unwrap();
    let second = run(&["config", "--config", path.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(stdout(&second), first);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[trap]\ntemprature = 1e-4\n").unwrap();
    assert_eq!(run(&["bell", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["bell", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
    assert_eq!(run(&["bell", "--shots", "0"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));

    // too few scan points for a parity fit
    let short = dir.path().join("short.toml");
    std::fs::write(&short, "[run]\nparity_points = 4\nshots = 20\n").unwrap();
    let o = run_in(dir.path(), &["parity", "--config", short.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
