use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coverage-stein"));
    c.env_remove("COVERAGE_STEIN_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_line(o: &Output) -> String {
    stdout(o).lines().last().expect("output").to_string()
}

fn assert_round_trips(line: &str) {
    let value: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(serde_json::to_string(&value).unwrap(), line);
    assert!(value["manifest"]["timestamp"].as_str().unwrap().ends_with('Z'));
}

#[test]
fn json_outputs_round_trip() {
    for args in [
        &["table", "--json"][..],
        &["bounds", "-d", "2", "-n", "5000", "--rho", "0.5"],
        &["moments", "-d", "3", "-n", "1000", "--rho", "1"],
        &["simulate", "-d", "1", "-n", "300", "--rho", "1", "-R", "50", "--seed", "4"],
        &["couple", "--variant", "W", "-d", "2", "-n", "60", "--rho", "1", "--draws", "200"],
        &["delta", "--variant", "V", "-d", "1", "-n", "100", "--rho", "1", "--outer", "100", "--inner", "100"],
    ] {
        let o = run(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_round_trips(&json_line(&o));
    }
}

#[test]
fn csv_is_independent_of_parallelism() {
    let sim = ["simulate", "-d", "2", "-n", "200", "--rho", "1", "-R", "40", "--seed", "9"];
    let one = run(&[&sim[..], &["--parallelism", "1"]].concat());
    let four = run(&[&sim[..], &["--parallelism", "4"]].concat());
    let csv = |o: &Output| stdout(o).lines().filter(|l| !l.starts_with('{')).collect::<Vec<_>>().join("\n");
    assert_eq!(csv(&one), csv(&four));
    assert!(csv(&one).starts_with("replicate,V,S\n0,"));

    let env = bin()
        .args(sim)
        .env("COVERAGE_STEIN_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(csv(&env), csv(&one));

    let dir = std::env::temp_dir().join(format!("coverage-stein-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    let couple = ["couple", "--variant", "V", "-d", "1", "-n", "80", "--rho", "1", "--draws", "300"];
    for (path, threads) in [(&a, "1"), (&b, "2")] {
        let o = run(&[&couple[..], &["--parallelism", threads, "--csv", path.to_str().unwrap()]].concat());
        assert!(o.status.success());
        assert_eq!(stdout(&o).lines().count(), 1);
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    assert!(text.starts_with(b"y,y_prime,bernoulli\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes_follow_error_kind() {
    assert_eq!(run(&["table", "--dims", "1,4"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "-d", "1"]).status.code(), Some(2));
    let invalid = run(&["moments", "-d", "2", "-n", "9", "--rho", "1"]);
    assert_eq!(invalid.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("4 rho < n^(1/d)"));
    let bad_threads = bin()
        .args(["delta", "--variant", "W", "-d", "1", "-n", "100", "--rho", "1"])
        .env("COVERAGE_STEIN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
}

#[test]
fn small_radius_table_is_finite() {
    let o = run(&["table", "--rho", "1e-6", "--dims", "1", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&json_line(&o)).unwrap();
    for key in ["delta_v", "delta_s"] {
        let x = v["result"][0][key].as_f64().unwrap();
        assert!(x.is_finite() && x > 0.0, "{key} = {x}");
    }
}
