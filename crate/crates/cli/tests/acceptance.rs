//! One line per acceptance criterion; exits non-zero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode, Output};
use stereoloc_cli::selftest::{run_all, SelftestOptions};

const BIN: &str = env!("CARGO_BIN_EXE_stereoloc");

fn stereoloc(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("LOCALIZER_LOG")
        .output()
        .expect("spawn stereoloc")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .display()
        .to_string()
}

fn determinism() -> Result<String, String> {
    let mut checked = 0;
    for (file, subcommand) in [
        ("pair_2d.toml", "localize"),
        ("triangle_3d.toml", "localize"),
        ("five_4d.toml", "simulate"),
        ("five_4d.toml", "localize"),
    ] {
        let config = scenario(file);
        for format in ["csv", "json"] {
            let args = [
                subcommand, "--config", &config, "--seed", "2024", "--format", format,
            ];
            let a = stereoloc(&args);
            let b = stereoloc(&args);
            if a.stdout.is_empty() {
                return Err(format!(
                    "{subcommand} {file} --format {format} wrote nothing"
                ));
            }
            if a.stdout != b.stdout || a.status.code() != b.status.code() {
                return Err(format!(
                    "{subcommand} {file} --format {format} differs between runs"
                ));
            }
            checked += 1;
        }
    }
    let selftest = stereoloc(&["selftest"]);
    let text = String::from_utf8_lossy(&selftest.stdout);
    let lines = text
        .lines()
        .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
        .count();
    if lines != 11 {
        return Err(format!("selftest reported {lines} criteria, expected 11"));
    }
    match selftest.status.code() {
        Some(0) => Ok(format!(
            "{checked} report pairs byte-identical; selftest exit 0"
        )),
        code => {
            let failing: Vec<&str> = text
                .lines()
                .filter_map(|l| l.strip_prefix("FAIL criterion"))
                .filter_map(|l| l.split_whitespace().next())
                .collect();
            Err(format!(
                "{checked} report pairs byte-identical; selftest exit {code:?} with criteria {} failing",
                failing.join(", ")
            ))
        }
    }
}

fn main() -> ExitCode {
    let mut failed = 0;
    for r in run_all(&SelftestOptions::default()) {
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    match determinism() {
        Ok(detail) => println!("PASS criterion 12 (cli determinism): {detail}"),
        Err(detail) => {
            println!("FAIL criterion 12 (cli determinism): {detail}");
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
