use std::process::{Command, Output};

fn weakfix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakfix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn list_prints_builtins() {
    let o = weakfix(&["list"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "example-1\nexample-2\nexample-3\n");
}

#[test]
fn verify_passing_builtin_exits_zero() {
    let o = weakfix(&["verify", "example-1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"verdict\": \"pass\""));
}

#[test]
fn violation_exits_one_with_csv_witness() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios/negative-control.toml");
    let o = weakfix(&["verify", path, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.starts_with("scenario,command,check,passed,worst_value,witness\n"));
    let row = text.lines().find(|l| l.contains(",condition,")).unwrap();
    assert!(row.contains(",false,"));
    assert!(row.ends_with(" 1.0000000000000000e0 8.0000000000000004e-1"), "{row}");
}

#[test]
fn hunt_exit_codes() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios/negative-control.toml");
    let o = weakfix(&["hunt", path, "--budget", "2000", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = weakfix(&["hunt", "example-3", "--budget", "2000", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn invalid_inputs_exit_two() {
    assert_eq!(weakfix(&["verify", "no-such-scenario"]).status.code(), Some(2));
    assert_eq!(weakfix(&["verify", "example-1", "--variant", "KCX"]).status.code(), Some(2));

    let dir = std::env::temp_dir().join(format!("weakfix-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.toml");
    std::fs::write(
        &bad,
        "schema_version = 1\nname = \"bad\"\nvariant = \"KC3\"\n\
         [space]\ndistance = \"abs(x - y)\"\n[family]\nmap = \"x / 2\"\n\
         [phi]\nexpr = \"t\"\ndegree = 1.0\n[psi]\narity = 2\nexpr = \"x + y\"\n\
         [schedule]\ndelta = \"0.1\"\ngamma = \"0.1\"\n",
    )
    .unwrap();
    let o = weakfix(&["verify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3-argument psi"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("weakfix-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("r.json");
    let o = weakfix(&["lambda", "example-1", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("lambda_sequence"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn solve_reports_limit() {
    let o = weakfix(&["solve", "example-3", "--start", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("solve example-3: PASS"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios/negative-control.toml");
    for args in [
        vec!["verify", "example-1", "example-2", "example-3", path, "--seed", "11", "--format", "json"],
        vec!["hunt", "example-1", "example-3", path, "--seed", "11", "--budget", "3000", "--format", "json"],
    ] {
        let runs: Vec<Vec<u8>> = (0..3).map(|_| weakfix(&args).stdout).collect();
        assert!(!runs[0].is_empty());
        assert!(runs.windows(2).all(|w| w[0] == w[1]), "{}", args[0]);
    }
}
