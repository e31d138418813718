use clap::{Args, Parser, Subcommand};
use log::info;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use stereoloc_cli::config::{ConfigError, Format, ScenarioConfig};
use stereoloc_cli::report::{number, write_report};
use stereoloc_cli::run::{run_scenario, Mode};
use stereoloc_cli::selftest::{check_corruption_label, run_all, SelftestOptions};
use stereoloc_cli::sweep::{parse_assignment, sweep, write_sweep};

const VALIDATION: u8 = 1;
const NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "stereoloc",
    version,
    about = "Simulate and localize events with a relativistic localizing system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the event seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides the constraint residual tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward simulation only.
    Simulate(Common),
    /// Forward simulation and the full localization protocol.
    Localize(Common),
    /// Localize over a grid of config overrides.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `path=v1,v2,...`, e.g. `tolerances.constraint=1e-8,1e-10`; repeatable.
        #[arg(long = "set", required = true)]
        sets: Vec<String>,
    },
    /// Runs the property suite.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Raises every threshold to at least this value.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Perturbs the named fixture stamp, e.g. `A.fifth`.
        #[arg(long)]
        corrupt: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::Validation(format!("{}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn load(c: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(t) = c.tolerance {
        cfg.tolerances.constraint = t;
    }
    if let Some(f) = c.format {
        cfg.output.format = f;
    }
    Ok(cfg)
}

fn io_err(e: io::Error) -> Failure {
    Failure::Numerical(format!("writing report: {e}"))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(c) => scenario(&c, Mode::Simulate),
        Command::Localize(c) => scenario(&c, Mode::Localize),
        Command::Sweep { common, sets } => {
            let cfg = load(&common)?;
            let grid = sets
                .iter()
                .map(|s| parse_assignment(s))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Validation(e.to_string()))?;
            let rows = sweep(&cfg, &grid).map_err(|e| Failure::Validation(e.to_string()))?;
            write_sweep(&rows, cfg.output.format, output(&common.out)?).map_err(io_err)?;
            let failed: usize = rows.iter().map(|r| r.failures).sum();
            if failed > 0 {
                return Err(Failure::Numerical(format!(
                    "{failed} events failed across the sweep"
                )));
            }
            Ok(())
        }
        Command::Selftest {
            seed,
            tolerance,
            corrupt,
            out,
            format,
        } => {
            if let Some(t) = tolerance {
                if !(t > 0.0) {
                    return Err(Failure::Validation("--tolerance: must be positive".into()));
                }
            }
            if let Some(label) = &corrupt {
                check_corruption_label(label).map_err(|e| Failure::Validation(e.to_string()))?;
            }
            let results = run_all(&SelftestOptions {
                slack: tolerance,
                corrupt,
                seed,
            });
            let mut w = output(&out)?;
            match format {
                Format::Csv => {
                    for r in &results {
                        writeln!(w, "{r}").map_err(io_err)?;
                    }
                }
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &results).map_err(|e| io_err(e.into()))?;
                    writeln!(w).map_err(io_err)?;
                }
            }
            w.flush().map_err(io_err)?;
            let failed: Vec<String> = results
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.id.to_string())
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Numerical(format!(
                    "criteria {} failed",
                    failed.join(", ")
                )))
            }
        }
    }
}

fn scenario(c: &Common, mode: Mode) -> Result<(), Failure> {
    let cfg = load(c)?;
    let s = cfg
        .build()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    info!(
        "scenario {} seed {} with {} events",
        s.hash,
        s.seed,
        s.events.len()
    );
    let report = run_scenario(&s, mode);
    write_report(&report, s.config.output.format, output(&c.out)?).map_err(io_err)?;
    let failed = report.failures();
    info!(
        "max residual {}, max oracle delta {}",
        number(report.max_residual()),
        number(report.max_oracle_delta())
    );
    if failed > 0 {
        return Err(Failure::Numerical(format!(
            "{failed} of {} events failed",
            report.rows.len()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOCALIZER_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(VALIDATION)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(NUMERICAL)
        }
    }
}
