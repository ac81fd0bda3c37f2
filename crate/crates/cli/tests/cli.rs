use std::process::{Command, Output};

fn phi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phi-decoder"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn rejects_probability_out_of_range() {
    let out = phi(&["simulate", "--mode", "sync", "-L", "8", "-p", "1.5", "-n", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn simulate_writes_header_then_records() {
    let out = phi(&["simulate", "--mode", "static", "-L", "8", "-p", "0.01", "-n", "3", "--seed", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].contains("\"config\""));
    assert!(lines[1..].iter().all(|l| l.contains("\"mode\":\"static\"")));
}

#[test]
fn output_file_resumes_and_analyzes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let path = path.to_str().unwrap();
    let args = ["simulate", "--mode", "sync", "-L", "8", "-p", "0.01", "-n", "4", "--seed", "3", "-o", path];
    assert!(phi(&args).status.success());
    let first = std::fs::read_to_string(path).unwrap();
    let again = phi(&args);
    assert!(again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("4 resumed"));
    assert_eq!(std::fs::read_to_string(path).unwrap(), first);

    let curves = phi(&["analyze", "curves", path]);
    assert!(curves.status.success());
    let text = stdout(&curves);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("L,p,mean,stderr,median,n_samples,censored_fraction"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("8,0.01,") && row.contains(",4,"), "{row}");
}

#[test]
fn config_flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "mode = \"static\"\nL = [6]\np = [0.02]\nsamples = 2\nseed = 1\n").unwrap();
    let out = phi(&["simulate", "--config", cfg.to_str().unwrap(), "-n", "5"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 6);
}
