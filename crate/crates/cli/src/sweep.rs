//! Localization over a grid of configuration overrides.

use crate::config::{Format, ScenarioConfig};
use crate::report::number;
use crate::run::{run_scenario, Mode};
use serde::Serialize;
use std::io::Write;
use thiserror::Error;
use toml::Value;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("bad assignment {0:?}: expected path=v1,v2,...")]
    Syntax(String),
    #[error("{path}: {message}")]
    Path { path: String, message: String },
    #[error("grid point {point}: {message}")]
    Invalid { point: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub path: String,
    pub values: Vec<Value>,
}

pub fn parse_assignment(text: &str) -> Result<Assignment, SweepError> {
    let (path, values) = text
        .split_once('=')
        .ok_or_else(|| SweepError::Syntax(text.into()))?;
    let values = values
        .split(',')
        .map(|v| {
            toml::from_str::<toml::Table>(&format!("v = {}", v.trim()))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .ok_or_else(|| SweepError::Syntax(text.into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if path.trim().is_empty() {
        return Err(SweepError::Syntax(text.into()));
    }
    Ok(Assignment {
        path: path.trim().to_string(),
        values,
    })
}

fn set(root: &mut Value, path: &str, v: Value) -> Result<(), SweepError> {
    let err = |message: &str| SweepError::Path {
        path: path.into(),
        message: message.into(),
    };
    let mut cur = root;
    for seg in path.split('.') {
        let (key, index) = match seg.split_once('[') {
            Some((k, rest)) => {
                let i = rest
                    .strip_suffix(']')
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| err("bad index"))?;
                (k, Some(i))
            }
            None => (seg, None),
        };
        let table = cur.as_table_mut().ok_or_else(|| err("not a table"))?;
        cur = table
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Default::default()));
        if let Some(i) = index {
            cur = cur
                .as_array_mut()
                .and_then(|a| a.get_mut(i))
                .ok_or_else(|| err("index out of range"))?;
        }
    }
    *cur = v;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub settings: Vec<(String, String)>,
    pub scenario: String,
    pub seed: u64,
    pub events: usize,
    pub failures: usize,
    pub max_residual: f64,
    pub max_oracle_delta: f64,
}

/// Runs `localize` at every point of the Cartesian product of the
/// assignments, in lexicographic order.
pub fn sweep(base: &ScenarioConfig, grid: &[Assignment]) -> Result<Vec<SweepRow>, SweepError> {
    let root = Value::try_from(base).expect("config converts");
    let total: usize = grid.iter().map(|a| a.values.len()).product();
    let mut rows = Vec::with_capacity(total);
    for n in 0..total {
        let mut v = root.clone();
        let mut settings = Vec::with_capacity(grid.len());
        let mut rest = n;
        for a in grid.iter().rev() {
            let k = rest % a.values.len();
            rest /= a.values.len();
            set(&mut v, &a.path, a.values[k].clone())?;
            settings.push((a.path.clone(), a.values[k].to_string()));
        }
        settings.reverse();
        let point = settings
            .iter()
            .map(|(p, x)| format!("{p}={x}"))
            .collect::<Vec<_>>()
            .join(" ");
        let invalid = |message: String| SweepError::Invalid {
            point: point.clone(),
            message,
        };
        let cfg: ScenarioConfig = v
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        let s = cfg.build().map_err(|e| invalid(e.to_string()))?;
        let r = run_scenario(&s, Mode::Localize);
        rows.push(SweepRow {
            settings,
            scenario: s.hash.clone(),
            seed: s.seed,
            events: r.rows.len(),
            failures: r.failures(),
            max_residual: r.max_residual(),
            max_oracle_delta: r.max_oracle_delta(),
        });
    }
    Ok(rows)
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], format: Format, mut out: W) -> std::io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<String> = rows
                .first()
                .map_or(vec![], |r| r.settings.iter().map(|s| s.0.clone()).collect());
            header.extend(
                [
                    "scenario",
                    "seed",
                    "events",
                    "failures",
                    "max_residual",
                    "max_oracle_delta",
                ]
                .map(String::from),
            );
            w.write_record(&header)?;
            for r in rows {
                let mut rec: Vec<String> = r.settings.iter().map(|s| s.1.clone()).collect();
                rec.extend([
                    r.scenario.clone(),
                    r.seed.to_string(),
                    r.events.to_string(),
                    r.failures.to_string(),
                    number(r.max_residual),
                    number(r.max_oracle_delta),
                ]);
                w.write_record(&rec)?;
            }
            w.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selftest::PAIR_2D;

    #[test]
    fn parses_values() {
        let a = parse_assignment("tolerances.oracle=1e-9, 1e-11").unwrap();
        assert_eq!(a.values, vec![Value::Float(1e-9), Value::Float(1e-11)]);
        assert!(parse_assignment("nothing").is_err());
    }

    #[test]
    fn grid_is_lexicographic() {
        let mut base = ScenarioConfig::from_toml(PAIR_2D).unwrap();
        base.events.random.as_mut().unwrap().count = 3;
        let grid = [
            parse_assignment("events.random.seed=1,2").unwrap(),
            parse_assignment("emitters[1].clock.rate=1.0,3.0").unwrap(),
        ];
        let rows = sweep(&base, &grid).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].settings[0].1, "1");
        assert_eq!(rows[1].settings[1].1, "3.0");
        assert!(rows.iter().all(|r| r.failures == 0 && r.events == 3));
        assert_eq!(rows[0].seed, 1);
    }

    #[test]
    fn bad_path_is_reported() {
        let base = ScenarioConfig::from_toml(PAIR_2D).unwrap();
        let grid = [parse_assignment("emitters[9].clock.rate=2.0").unwrap()];
        assert!(matches!(sweep(&base, &grid), Err(SweepError::Path { .. })));
    }
}
