use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stereoloc");

fn stereoloc(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("LOCALIZER_LOG")
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .display()
        .to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn with_config(text: &str, args: &[&str]) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.toml");
    fs::write(&path, text).unwrap();
    let path = path.display().to_string();
    let mut full = vec![args[0], "--config", &path];
    full.extend_from_slice(&args[1..]);
    stereoloc(&full)
}

#[test]
fn pair_localizes_and_exits_zero() {
    let o = stereoloc(&["localize", "--config", &scenario("pair_2d.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,seed,index,t,x1,tau1,tau2,stereo1,stereo2,anchor,oracle_delta,flags"
    );
    assert_eq!(lines.count(), 100);
}

#[test]
fn validation_errors_name_the_field() {
    let base = fs::read_to_string(scenario("pair_2d.toml")).unwrap();
    let o = with_config(
        &base.replace("dimension = 2", "dimension = 3"),
        &["localize"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("emitters:"), "{}", stderr(&o));

    let o = with_config(
        &base.replace("radius = 5.0", "radius = -5.0"),
        &["simulate"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("events.random.radius"),
        "{}",
        stderr(&o)
    );

    let o = with_config(&format!("{base}\nunknown_key = 1\n"), &["simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown_key"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_a_validation_error() {
    let o = stereoloc(&["simulate", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let config = scenario("triangle_3d.toml");
    let args = [
        "localize",
        "--config",
        config.as_str(),
        "--format",
        "json",
        "--seed",
        "5",
    ];
    let piped = stereoloc(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    let written = stereoloc(&with_out);
    assert_eq!(written.status.code(), Some(0), "{}", stderr(&written));
    assert!(written.stdout.is_empty());
    assert_eq!(fs::read(&out).unwrap(), piped.stdout);
    let v: serde_json::Value = serde_json::from_slice(&piped.stdout).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["rows"].as_array().unwrap().len(), 1000);
}

#[test]
fn seed_changes_the_report() {
    let config = scenario("triangle_3d.toml");
    let a = stereoloc(&["simulate", "--config", &config, "--seed", "1"]);
    let b = stereoloc(&["simulate", "--config", &config, "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn four_dimensional_report_carries_residual_columns() {
    let o = stereoloc(&[
        "localize",
        "--config",
        &scenario("five_4d.toml"),
        "--tolerance",
        "1e9",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    for c in ["residual1", "residual2", "residual3", "residual4"] {
        assert!(header.contains(&c), "{header:?}");
    }
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == "residual1").unwrap();
    assert!(row[i..i + 4].iter().all(|v| v.parse::<f64>().is_ok()));
}

#[test]
fn sweep_enumerates_the_grid() {
    let o = stereoloc(&[
        "sweep",
        "--config",
        &scenario("pair_2d.toml"),
        "--set",
        "events.random.seed=1,2",
        "--set",
        "events.random.radius=2.0,4.0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn log_level_comes_from_the_environment() {
    let o = Command::new(BIN)
        .args(["simulate", "--config", &scenario("pair_2d.toml")])
        .env("LOCALIZER_LOG", "info")
        .output()
        .unwrap();
    assert!(stderr(&o).contains("scenario"), "{}", stderr(&o));
    let quiet = stereoloc(&["simulate", "--config", &scenario("pair_2d.toml")]);
    assert!(quiet.stderr.is_empty());
}

#[test]
fn corrupted_stamp_is_named_by_the_failing_criterion() {
    let o = stereoloc(&["selftest", "--corrupt", "A.fifth"]);
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8(o.stdout).unwrap();
    let named: Vec<&str> = text.lines().filter(|l| l.contains("A.fifth")).collect();
    assert!(!named.is_empty());
    assert!(named.iter().all(|l| l.starts_with("FAIL")), "{named:?}");
    assert!(text
        .lines()
        .any(|l| l.starts_with("FAIL criterion  2") && l.contains("A.fifth")));
}

#[test]
fn unknown_corruption_label_is_rejected() {
    let o = stereoloc(&["selftest", "--corrupt", "Z.nothing"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--corrupt"));
}

#[test]
fn loose_tolerance_still_passes() {
    let o = stereoloc(&["selftest", "--tolerance", "1e-2"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 11);
}
