//! Batch execution of a scenario.

use crate::config::Scenario;
use crate::oracle;
use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;
use stereoloc::geometry::{Event, NullSolver, Worldline};
use stereoloc::localization::{
    localize_2d, localize_3d_intrinsic, localize_4d_unchecked, StereoPosition,
};
use stereoloc::positioning::{
    assemble_echo_3d, assemble_station_records_4d, emission_coordinates, Constellation,
    EchoBundle3D, EmissionPosition, StationBundle4D,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Localize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub seed: u64,
    pub index: usize,
    pub event: Vec<f64>,
    pub emission: Option<Vec<f64>>,
    pub stereo: Option<Vec<f64>>,
    pub anchor: Option<f64>,
    pub residuals: Vec<f64>,
    pub oracle_delta: Option<f64>,
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub dimension: usize,
    pub mode: Mode,
    pub rows: Vec<ReportRow>,
}

pub const ERROR_FLAG: &str = "error";
pub const CONSTRAINT_FLAG: &str = "constraint_violation";
pub const ORACLE_FLAG: &str = "oracle_mismatch";

impl Report {
    /// Rows that failed or missed a tolerance.
    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| {
                r.flags
                    .iter()
                    .any(|f| f.starts_with(ERROR_FLAG) || f == CONSTRAINT_FLAG || f == ORACLE_FLAG)
            })
            .count()
    }

    pub fn max_residual(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| &r.residuals)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_oracle_delta(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.oracle_delta)
            .fold(0.0, f64::max)
    }
}

/// Emission positions of the two events where the light rays from `e`
/// meet the emitters.
pub fn receptions_2d(c: &Constellation, e: &Event) -> Result<[EmissionPosition; 2], String> {
    let mut out = Vec::with_capacity(2);
    for em in &c.emitters {
        let s = NullSolver::default()
            .future(&em.worldline, e, em.worldline.domain())
            .map_err(|err| format!("{e} -> W[{}]: {err}", em.id))?;
        let ev = em.worldline.point(s);
        out.push(emission_coordinates(&c.emitters, &ev).map_err(|err| err.to_string())?);
    }
    Ok(out.try_into().expect("two emitters"))
}

fn relative_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs() / y.abs().max(1.0)))
}

/// Protocol and oracle results for one 2+1 event.
pub struct Outcome3D {
    pub bundle: EchoBundle3D,
    pub position: StereoPosition,
    pub oracle: [f64; 3],
}

pub fn localize_event_3d(s: &Scenario, e: &Event) -> Result<Outcome3D, String> {
    let bundle = assemble_echo_3d(&s.constellation, e, &s.orientations, &s.hash)
        .map_err(|x| x.to_string())?;
    let readings = bundle.stations.clone().map(|st| st.normalized);
    let position = localize_3d_intrinsic(&bundle.records(), &readings, Some(bundle.anchor.stamp))
        .map_err(|x| x.to_string())?;
    let oracle = oracle::cross_ratio_3d(&bundle);
    Ok(Outcome3D {
        bundle,
        position,
        oracle,
    })
}

pub struct Outcome4D {
    pub bundle: StationBundle4D,
    pub position: StereoPosition,
    pub oracle: [f64; 4],
}

pub fn localize_event_4d(s: &Scenario, e: &Event) -> Result<Outcome4D, String> {
    let bundle =
        assemble_station_records_4d(&s.constellation, &s.table, e, &s.orientations, &s.hash)
            .map_err(|x| x.to_string())?;
    let loc = localize_4d_unchecked(&bundle.records(), Some(bundle.anchor.stamp))
        .map_err(|x| x.to_string())?;
    let oracle = oracle::assembled_4d(&bundle);
    Ok(Outcome4D {
        bundle,
        position: loc.position,
        oracle,
    })
}

fn row(s: &Scenario, index: usize, mode: Mode, e: &Event) -> ReportRow {
    let mut r = ReportRow {
        scenario: s.hash.clone(),
        seed: s.seed,
        index,
        event: e.coords().to_vec(),
        emission: None,
        stereo: None,
        anchor: None,
        residuals: vec![],
        oracle_delta: None,
        flags: vec![],
        records: None,
    };
    if let Err(msg) = fill(s, mode, e, &mut r) {
        warn!("event {index}: {msg}");
        r.flags.push(format!("{ERROR_FLAG}: {msg}"));
    }
    debug!("event {index}: flags {:?}", r.flags);
    r
}

fn fill(s: &Scenario, mode: Mode, e: &Event, r: &mut ReportRow) -> Result<(), String> {
    let c = &s.constellation;
    let emission = emission_coordinates(&c.emitters, e).map_err(|x| x.to_string())?;
    r.emission = Some(emission.stamps.clone());
    if let Some(a) = &c.localizer {
        r.anchor = Some(a.message_coordinate(e).map_err(|x| x.to_string())?.stamp);
    }
    let records = s.config.output.records;
    let tol = s.config.tolerances;
    match (mode, s.config.dimension) {
        (Mode::Simulate, 2) => {}
        (Mode::Simulate, 3) => {
            let b = assemble_echo_3d(c, e, &s.orientations, &s.hash).map_err(|x| x.to_string())?;
            if records {
                r.records = Some(serde_json::to_value(b.records()).expect("records serialize"));
            }
        }
        (Mode::Simulate, _) => {
            let b = assemble_station_records_4d(c, &s.table, e, &s.orientations, &s.hash)
                .map_err(|x| x.to_string())?;
            if records {
                r.records = Some(serde_json::to_value(b.records()).expect("records serialize"));
            }
        }
        (Mode::Localize, 2) => {
            let [e1, e2] = receptions_2d(c, e)?;
            let p = localize_2d(&e1, &e2).map_err(|x| x.to_string())?;
            let delta = p.max_abs_diff(&emission);
            r.stereo = Some(p.stamps);
            r.oracle_delta = Some(delta);
            if records {
                r.records = Some(serde_json::to_value([e1, e2]).expect("records serialize"));
            }
        }
        (Mode::Localize, 3) => {
            let o = localize_event_3d(s, e)?;
            r.oracle_delta = Some(relative_delta(&o.position.stamps, &o.oracle));
            r.stereo = Some(o.position.stamps);
            if records {
                r.records =
                    Some(serde_json::to_value(o.bundle.records()).expect("records serialize"));
            }
        }
        (Mode::Localize, _) => {
            let o = localize_event_4d(s, e)?;
            r.oracle_delta = Some(relative_delta(&o.position.stamps, &o.oracle));
            if o.position.max_residual() > tol.constraint {
                r.flags.push(CONSTRAINT_FLAG.into());
            }
            for d in &o.bundle.degeneracies {
                r.flags.push(format!(
                    "degenerate: station {} sees {} at {:e}",
                    d.station, d.reference, d.separation
                ));
            }
            r.residuals = o.position.constraint_residuals.clone();
            r.stereo = Some(o.position.stamps);
            if records {
                r.records =
                    Some(serde_json::to_value(o.bundle.records()).expect("records serialize"));
            }
        }
    }
    if r.oracle_delta.is_some_and(|d| !(d <= tol.oracle)) {
        r.flags.push(ORACLE_FLAG.into());
    }
    Ok(())
}

/// Runs every event; rows come back in event order whatever the thread
/// schedule.
pub fn run_scenario(s: &Scenario, mode: Mode) -> Report {
    let rows = s
        .events
        .par_iter()
        .enumerate()
        .map(|(i, e)| row(s, i, mode, e))
        .collect();
    Report {
        scenario: s.hash.clone(),
        seed: s.seed,
        dimension: s.config.dimension,
        mode,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn scenario(text: &str, count: usize) -> Scenario {
        let mut c = ScenarioConfig::from_toml(text).unwrap();
        c.events.random.as_mut().unwrap().count = count;
        c.build().unwrap()
    }

    #[test]
    fn pair_localizes_to_emission_coordinates() {
        let s = scenario(include_str!("../scenarios/pair_2d.toml"), 100);
        let r = run_scenario(&s, Mode::Localize);
        assert_eq!(r.rows.len(), 100);
        assert_eq!(
            r.failures(),
            0,
            "{:?}",
            r.rows.iter().find(|x| !x.flags.is_empty())
        );
        assert!(r.max_oracle_delta() <= 1e-11);
    }

    #[test]
    fn triangle_matches_oracle() {
        let s = scenario(include_str!("../scenarios/triangle_3d.toml"), 40);
        let r = run_scenario(&s, Mode::Localize);
        assert_eq!(
            r.failures(),
            0,
            "{:?}",
            r.rows.iter().find(|x| !x.flags.is_empty())
        );
        assert!(r.max_oracle_delta() <= 1e-10);
        for (i, row) in r.rows.iter().enumerate() {
            assert_eq!(row.index, i);
        }
    }

    #[test]
    fn simulate_fills_forward_columns_only() {
        let s = scenario(include_str!("../scenarios/five_4d.toml"), 5);
        let r = run_scenario(&s, Mode::Simulate);
        for row in &r.rows {
            assert!(row.emission.is_some() && row.anchor.is_some() && row.stereo.is_none());
        }
    }
}
