//! Property suite behind `stereoloc selftest` and the acceptance target.

use crate::config::{random_orientation, Scenario, ScenarioConfig, ValidationError};
use crate::oracle;
use crate::run::{localize_event_3d, localize_event_4d, receptions_2d, Outcome3D, Outcome4D};
use nalgebra::{Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use stereoloc::constellation::WorldlineSpec;
use stereoloc::geometry::{Event, NullSolver, Worldline};
use stereoloc::localization::{
    lambda_cycle, localize_2d, localize_3d_intrinsic, localize_3d_planes, localize_4d_unchecked,
    station_coefficients,
};
use stereoloc::positioning::{
    assemble_echo_3d, assemble_station_records_4d, cartesian_of_emission, emission_coordinates,
    EchoRecord3D, EmissionPosition, StationRecord4D,
};
use stereoloc::projective::{
    common_denominator_p, composed_fractions, groupoid_pt, moebius_coefficients, soldering_map,
    vanishing_point, MoebiusCoefficients, ProjPoint1, ProjPoint2, SolderingMap, VanishingPoint,
};

pub const PAIR_2D: &str = include_str!("../scenarios/pair_2d.toml");
pub const TRIANGLE_3D: &str = include_str!("../scenarios/triangle_3d.toml");
pub const FIVE_4D: &str = include_str!("../scenarios/five_4d.toml");

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "boundary triple"),
    (2, "3D intrinsic round trip"),
    (3, "frame independence"),
    (4, "conformal insensitivity"),
    (5, "4D protocol consistency"),
    (6, "common denominator"),
    (7, "vanishing-point concurrency"),
    (8, "groupoid laws"),
    (9, "2D identity of grids"),
    (10, "plane construction coherence"),
    (11, "null-solver correctness"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} criterion {:>2} ({}): {}",
            self.id, self.name, self.detail
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Raises every numeric threshold to at least this value.
    pub slack: Option<f64>,
    /// Label of a broadcast stamp to perturb in the first fixture event.
    pub corrupt: Option<String>,
    pub seed: u64,
}

impl SelftestOptions {
    fn tol(&self, base: f64) -> f64 {
        self.slack.map_or(base, |s| base.max(s))
    }

    fn rng(&self, id: u8) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(1000).wrapping_add(id as u64 + 1))
    }
}

const CORRUPTION: f64 = 0.5;

pub fn fixture(text: &str, count: usize) -> Scenario {
    let mut c = ScenarioConfig::from_toml(text).expect("fixture parses");
    c.events.random.as_mut().expect("random events").count = count;
    c.build().expect("fixture builds")
}

fn parse_label(label: &str) -> Option<(&str, &str)> {
    label.split_once('.')
}

/// Perturbs the stamp named `label` in 2+1 records; false if no stamp has
/// that label.
pub fn corrupt_records_3d(records: &mut [EchoRecord3D], label: &str) -> bool {
    let Some((id, field)) = parse_label(label) else {
        return false;
    };
    for r in records.iter_mut().filter(|r| r.emitter_id == id) {
        match field {
            "primary" => r.primary_stamp += CORRUPTION,
            "fifth" => match &mut r.fifth_stamp {
                Some(f) => *f += CORRUPTION,
                None => return false,
            },
            _ => {
                let Some((name, j)) = indexed(field) else {
                    return false;
                };
                let k = match name {
                    "next" => 0,
                    "next_next" => 1,
                    _ => return false,
                };
                match r.neighbor_positions[k].stamps.get_mut(j) {
                    Some(v) => *v += CORRUPTION,
                    None => return false,
                }
            }
        }
        return true;
    }
    false
}

/// `name[j]`
fn indexed(field: &str) -> Option<(&str, usize)> {
    let (name, rest) = field.split_once('[')?;
    Some((name, rest.strip_suffix(']')?.parse().ok()?))
}

/// Perturbs the stamp named `label` (`ID.fifth`, `ID.ref[REF][m]`) in 3+1
/// records; `ids` maps emitter indices to ids.
pub fn corrupt_records_4d(records: &mut [StationRecord4D], ids: &[String], label: &str) -> bool {
    let Some((id, field)) = parse_label(label) else {
        return false;
    };
    let Some(r) = records.iter_mut().find(|r| r.station_id == id) else {
        return false;
    };
    if field == "fifth" {
        r.fifth_stamp += CORRUPTION;
        return true;
    }
    let Some(rest) = field.strip_prefix("ref[") else {
        return false;
    };
    let Some((reference, m)) = rest.split_once("][") else {
        return false;
    };
    let Some(m) = m.strip_suffix(']').and_then(|m| m.parse::<usize>().ok()) else {
        return false;
    };
    for (k, j) in r.reference_emitters.iter().enumerate() {
        if ids.get(*j).map(String::as_str) == Some(reference) {
            if let Some(v) = r.reference_positions[k].stamps.get_mut(m) {
                *v += CORRUPTION;
                return true;
            }
        }
    }
    false
}

/// Stamp labels the corruption option accepts.
pub fn known_labels() -> Vec<String> {
    let mut out = Vec::new();
    let s3 = fixture(TRIANGLE_3D, 1);
    if let Ok(b) = assemble_echo_3d(&s3.constellation, &s3.events[0], &s3.orientations, "") {
        out.extend(b.data_point().stamps.into_iter().map(|s| s.label));
    }
    let s4 = fixture(FIVE_4D, 1);
    if let Ok(b) = assemble_station_records_4d(
        &s4.constellation,
        &s4.table,
        &s4.events[0],
        &s4.orientations,
        "",
    ) {
        out.extend(b.data_point.stamps.into_iter().map(|s| s.label));
    }
    out.sort();
    out.dedup();
    out
}

pub fn check_corruption_label(label: &str) -> Result<(), ValidationError> {
    if known_labels().iter().any(|l| l == label) {
        Ok(())
    } else {
        Err(ValidationError {
            path: "--corrupt".into(),
            message: format!("no fixture stamp labelled {label:?}"),
        })
    }
}

fn result(id: u8, passed: bool, detail: String) -> CriterionResult {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map_or("?", |(_, n)| n);
    CriterionResult {
        id,
        name,
        passed,
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn random_triple<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    loop {
        let t: (f64, f64, f64) = (
            rng.gen_range(-100.0..100.0),
            rng.gen_range(-100.0..100.0),
            rng.gen_range(-100.0..100.0),
        );
        if (t.0 - t.1).abs() > 1e-3 && (t.1 - t.2).abs() > 1e-3 && (t.0 - t.2).abs() > 1e-3 {
            return t;
        }
    }
}

fn record_with_targets(station: usize, (t, h, f): (f64, f64, f64)) -> EchoRecord3D {
    let mut a = vec![0.0; 3];
    let mut b = vec![0.0; 3];
    a[station] = t;
    b[station] = h;
    EchoRecord3D {
        emitter_id: format!("E{station}"),
        station,
        primary_stamp: 0.0,
        neighbor_positions: [EmissionPosition::new(a), EmissionPosition::new(b)],
        fifth_stamp: Some(f),
        signature: "boundary".into(),
    }
}

pub fn boundary_triple(o: &SelftestOptions) -> CriterionResult {
    let mut rng = o.rng(1);
    let tol = o.tol(1e-12);
    let readings = [
        ProjPoint1::new(0.0, 1.0).expect("point"),
        ProjPoint1::new(1.0, 1.0).expect("point"),
        ProjPoint1::new(1.0, 0.0).expect("point"),
    ];
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for _ in 0..1000 {
        let triples: Vec<_> = (0..3).map(|_| random_triple(&mut rng)).collect();
        let records: [EchoRecord3D; 3] =
            std::array::from_fn(|i| record_with_targets(i, triples[i]));
        for (k, reading) in readings.iter().enumerate() {
            match localize_3d_intrinsic(&records, &[*reading; 3], None) {
                Ok(p) => {
                    for (i, (t, h, f)) in triples.iter().enumerate() {
                        let want = [t, f, h][k];
                        worst = worst.max((p.stamps[i] - want).abs());
                    }
                }
                Err(_) => errors += 1,
            }
        }
    }
    let passed = errors == 0 && worst <= tol;
    result(
        1,
        passed,
        format!("1000 triples, max abs error {worst:.3e} (tol {tol:.0e}), {errors} errors"),
    )
}

struct Run3D {
    outcomes: Vec<Result<Outcome3D, String>>,
}

fn run_3d(s: &Scenario) -> Run3D {
    Run3D {
        outcomes: s
            .events
            .par_iter()
            .map(|e| localize_event_3d(s, e))
            .collect(),
    }
}

pub fn round_trip_3d(o: &SelftestOptions) -> CriterionResult {
    let s = fixture(TRIANGLE_3D, 1000);
    let tol = o.tol(1e-10);
    let run = run_3d(&s);
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    let mut note = String::new();
    for (i, out) in run.outcomes.iter().enumerate() {
        match out {
            Ok(x) => {
                let mut stamps = x.position.stamps.clone();
                if i == 0 {
                    if let Some(label) = &o.corrupt {
                        let mut records = x.bundle.records();
                        if corrupt_records_3d(&mut records, label) {
                            let readings = x.bundle.stations.clone().map(|st| st.normalized);
                            match localize_3d_intrinsic(&records, &readings, None) {
                                Ok(p) => stamps = p.stamps,
                                Err(err) => errors.push(format!("event 0: {err}")),
                            }
                            let d = stamps
                                .iter()
                                .zip(&x.oracle)
                                .fold(0.0_f64, |m, (a, b)| m.max(rel(*a, *b)));
                            note =
                                format!("; corrupted stamp {label}: event 0 deviates by {d:.3e}");
                        }
                    }
                }
                for (a, b) in stamps.iter().zip(&x.oracle) {
                    worst = worst.max(rel(*a, *b));
                }
            }
            Err(err) => errors.push(format!("event {i}: {err}")),
        }
    }
    let passed = errors.is_empty() && worst <= tol;
    let first = errors
        .first()
        .map(|e| format!(", first: {e}"))
        .unwrap_or_default();
    result(
        2,
        passed,
        format!(
            "1000 events, max relative error {worst:.3e} (tol {tol:.0e}), {} errors{first}{note}",
            errors.len()
        ),
    )
}

pub fn frame_independence(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-10);
    let base = fixture(TRIANGLE_3D, 1000);
    let mut rotated = base.clone();
    let mut rng = o.rng(3);
    rotated.orientations = (0..3).map(|_| random_orientation(&mut rng, 2)).collect();
    let a = run_3d(&base);
    let b = run_3d(&rotated);
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
        match (x, y) {
            (Ok(x), Ok(y)) => {
                for (p, q) in x.position.stamps.iter().zip(&y.position.stamps) {
                    worst = worst.max((p - q).abs());
                }
            }
            _ => errors += 1,
        }
    }
    let passed = errors == 0 && worst <= tol;
    result(
        3,
        passed,
        format!("1000 events, max coordinate change {worst:.3e} (tol {tol:.0e}), {errors} errors"),
    )
}

#[derive(Default)]
struct ScaleStats {
    readings: usize,
    differing: usize,
    max_ulps: u64,
    stamp_rel: f64,
    errors: usize,
}

fn ulps(a: f64, b: f64) -> u64 {
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    key(a).abs_diff(key(b))
}

impl ScaleStats {
    fn reading(&mut self, a: &[f64], b: &[f64]) {
        self.readings += 1;
        let u = a
            .iter()
            .zip(b)
            .map(|(x, y)| ulps(*x, *y))
            .max()
            .unwrap_or(0);
        if u > 0 {
            self.differing += 1;
        }
        self.max_ulps = self.max_ulps.max(u);
    }

    fn stamp(&mut self, scaled: f64, base: f64, k: f64) {
        let want = k * base;
        self.stamp_rel = self
            .stamp_rel
            .max((scaled - want).abs() / want.abs().max(k));
    }
}

fn scale_stats(k: f64, s3: &Scenario, s4: &Scenario) -> ScaleStats {
    let mut st = ScaleStats::default();
    let c3 = s3.constellation.scaled(k).expect("scaled");
    for e in &s3.events {
        let a = assemble_echo_3d(&s3.constellation, e, &s3.orientations, "");
        let b = assemble_echo_3d(&c3, &e.scaled(k), &s3.orientations, "");
        let (Ok(a), Ok(b)) = (a, b) else {
            st.errors += 1;
            continue;
        };
        for (x, y) in a.stations.iter().zip(&b.stations) {
            st.reading(&x.normalized.normalized(), &y.normalized.normalized());
            let (r, q) = (&x.record, &y.record);
            st.stamp(q.primary_stamp, r.primary_stamp, k);
            st.stamp(
                q.fifth_stamp.unwrap_or(f64::NAN),
                r.fifth_stamp.unwrap_or(f64::NAN),
                k,
            );
            for (p1, p2) in r.neighbor_positions.iter().zip(&q.neighbor_positions) {
                for (u, v) in p1.stamps.iter().zip(&p2.stamps) {
                    st.stamp(*v, *u, k);
                }
            }
        }
    }
    let c4 = s4.constellation.scaled(k).expect("scaled");
    for e in &s4.events {
        let a = assemble_station_records_4d(&s4.constellation, &s4.table, e, &s4.orientations, "");
        let b = assemble_station_records_4d(&c4, &s4.table, &e.scaled(k), &s4.orientations, "");
        let (Ok(a), Ok(b)) = (a, b) else {
            st.errors += 1;
            continue;
        };
        for (x, y) in a.stations.iter().zip(&b.stations) {
            st.reading(
                &x.record.normalized.normalized(),
                &y.record.normalized.normalized(),
            );
            st.stamp(y.record.fifth_stamp, x.record.fifth_stamp, k);
            for (p1, p2) in x
                .record
                .reference_positions
                .iter()
                .zip(&y.record.reference_positions)
            {
                for (u, v) in p1.stamps.iter().zip(&p2.stamps) {
                    st.stamp(*v, *u, k);
                }
            }
        }
    }
    st
}

pub fn conformal_insensitivity(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-12);
    let s3 = fixture(TRIANGLE_3D, 100);
    let s4 = fixture(FIVE_4D, 50);
    let mut passed = true;
    let mut parts = Vec::new();
    for k in [1e-3, 1e3] {
        let st = scale_stats(k, &s3, &s4);
        passed &= st.differing == 0 && st.errors == 0 && st.stamp_rel <= tol;
        parts.push(format!(
            "k={k:e}: {}/{} readings not bit-identical (max {} ulp), stamp rel {:.1e}, {} errors",
            st.differing, st.readings, st.max_ulps, st.stamp_rel, st.errors
        ));
    }
    let p2 = scale_stats(1024.0, &s3, &s4);
    parts.push(format!(
        "k=2^10 (informational): {}/{} readings differ",
        p2.differing, p2.readings
    ));
    result(4, passed, parts.join("; "))
}

pub fn consistency_4d(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-9);
    let s = fixture(FIVE_4D, 300);
    let outcomes: Vec<Result<Outcome4D, String>> = s
        .events
        .par_iter()
        .map(|e| localize_event_4d(&s, e))
        .collect();
    let ids: Vec<String> = s
        .constellation
        .emitters
        .iter()
        .map(|e| e.id.clone())
        .collect();
    let (mut residual, mut oracle_delta) = (0.0_f64, 0.0_f64);
    let mut admissible = 0;
    let mut errors = Vec::new();
    let mut note = String::new();
    for (i, out) in outcomes.iter().enumerate() {
        let x = match out {
            Ok(x) => x,
            Err(err) => {
                errors.push(format!("event {i}: {err}"));
                continue;
            }
        };
        let mut position = x.position.clone();
        let mut records = x.bundle.records();
        if i == 0 {
            if let Some(label) = &o.corrupt {
                if corrupt_records_4d(&mut records, &ids, label) {
                    match localize_4d_unchecked(&records, None) {
                        Ok(l) => position = l.position,
                        Err(err) => errors.push(format!("event 0: {err}")),
                    }
                    let d = position
                        .stamps
                        .iter()
                        .zip(&x.oracle)
                        .fold(0.0_f64, |m, (a, b)| m.max(rel(*a, *b)));
                    note = format!("; corrupted stamp {label}: event 0 deviates by {d:.3e}");
                }
            }
        }
        residual = residual.max(position.max_residual());
        for (a, b) in position.stamps.iter().zip(&x.oracle) {
            oracle_delta = oracle_delta.max(rel(*a, *b));
        }
        if lambda_cycle(&records).is_ok_and(|c| c.fixed_value_admissible(1e-9)) {
            admissible += 1;
        }
    }
    let passed = errors.is_empty() && residual <= tol && oracle_delta <= tol;
    let first = errors
        .first()
        .map(|e| format!(", first: {e}"))
        .unwrap_or_default();
    result(
        5,
        passed,
        format!(
            "300 events, max constraint residual {residual:.3e}, max per-station oracle delta {oracle_delta:.3e} \
             (tol {tol:.0e}), fixed stamps admissible for the cycle in {admissible}/300, {} errors{first}{note}",
            errors.len()
        ),
    )
}

fn random_coefficients<R: Rng>(rng: &mut R) -> [MoebiusCoefficients; 3] {
    std::array::from_fn(|_| loop {
        let (t, h, f) = random_triple(rng);
        if let Ok(c) = moebius_coefficients(t, h, f) {
            if c.w_l != 0.0 {
                break c;
            }
        }
    })
}

pub fn common_denominator(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-12);
    let mut rng = o.rng(6);
    let (mut spread, mut closed) = (0.0_f64, 0.0_f64);
    let mut errors = 0;
    for _ in 0..100 {
        let coeffs = random_coefficients(&mut rng);
        let Ok(p) = common_denominator_p(&coeffs) else {
            errors += 1;
            continue;
        };
        for _ in 0..1000 {
            let t: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-10.0..10.0));
            let dens = composed_fractions(&coeffs, &p, t).map(|(_, d)| d);
            let expected = (0..3)
                .map(|j| (coeffs[j].w_l + coeffs[j].k_l) * t[j])
                .sum::<f64>()
                + coeffs[2].w_l
                + coeffs[2].k_l;
            let scale = (0..3)
                .map(|j| ((coeffs[j].w_l + coeffs[j].k_l) * t[j]).abs())
                .sum::<f64>()
                .max(dens.iter().fold(0.0_f64, |m, d| m.max(d.abs())))
                .max(f64::MIN_POSITIVE);
            for d in &dens {
                spread = spread.max((d - dens[0]).abs() / scale);
                closed = closed.max((d - expected).abs() / scale);
            }
        }
    }
    let passed = errors == 0 && spread <= tol && closed <= tol;
    result(
        6,
        passed,
        format!("100x1000 samples, denominator spread {spread:.3e}, vs closed form {closed:.3e} (tol {tol:.0e}), {errors} errors"),
    )
}

fn random_pgl4<R: Rng>(rng: &mut R) -> Matrix4<f64> {
    loop {
        let m = Matrix4::from_fn(|_, _| rng.gen_range(-1.0..1.0)) + Matrix4::identity() * 2.0;
        let sv = m.singular_values();
        if sv.min() > 0.2 * sv.max() {
            return m;
        }
    }
}

fn sine(a: Vector3<f64>, b: Vector3<f64>) -> f64 {
    a.cross(&b).norm() / (a.norm() * b.norm())
}

pub fn vanishing_concurrency(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-8);
    let mut rng = o.rng(7);
    let mut worst: f64 = 0.0;
    let (mut errors, mut finite) = (0, 0);
    for _ in 0..20 {
        let coeffs = random_coefficients(&mut rng);
        let m = match soldering_map(&coeffs)
            .and_then(|m| m.with_tangent_frame(&random_pgl4(&mut rng)))
        {
            Ok(m) => m,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let d: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let vp = match vanishing_point(&m, &ProjPoint2 { h: d }) {
            Ok(v) => v,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let mut lines = 0;
        while lines < 50 {
            let y0: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
            let y1 = std::array::from_fn(|i| y0[i] + d[i]);
            let (Ok(a), Ok(b)) = (m.map_chart(y0), m.map_chart(y1)) else {
                continue;
            };
            let (a, b) = (Vector3::from(a), Vector3::from(b));
            worst = worst.max(match vp {
                VanishingPoint::Finite(v) => {
                    finite += 1;
                    sine(b - a, Vector3::from(v) - a)
                }
                VanishingPoint::AtInfinity(v) => sine(b - a, Vector3::from(v)),
            });
            lines += 1;
        }
    }
    let passed = errors == 0 && worst <= tol;
    result(
        7,
        passed,
        format!("20 maps x 50 lines ({finite} with finite vanishing point), max deviation {worst:.3e} (tol {tol:.0e}), {errors} errors"),
    )
}

/// Soldering map of a 2+1 outcome anchored at its own chart point, and the
/// stereometric position it assigns.
fn anchored_map(x: &Outcome3D, id: String) -> Result<(SolderingMap, [f64; 3]), String> {
    let coeffs = station_coefficients(&x.bundle.records()).map_err(|e| e.to_string())?;
    let m = soldering_map(&coeffs)
        .map_err(|e| e.to_string())?
        .with_id(id);
    let readings = x.bundle.stations.clone().map(|s| s.normalized);
    let y = m.chart.chart_point(&readings).map_err(|e| e.to_string())?;
    let y0 = [y[0] / y[3], y[1] / y[3], y[2] / y[3]];
    let m = m.anchored_at(y0);
    let p = m.map_chart([0.0; 3]).map_err(|e| e.to_string())?;
    Ok((m, p))
}

pub fn groupoid_laws(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-11);
    let map_tol = o.tol(1e-9);
    let s = fixture(TRIANGLE_3D, 200);
    let run = run_3d(&s);
    let mut maps = Vec::new();
    let mut errors = 0;
    for (i, out) in run.outcomes.iter().enumerate() {
        match out
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|x| anchored_map(x, format!("e{i}")))
        {
            Ok((m, p)) => maps.push((m, p, out.as_ref().ok().map(|x| x.position.stamps.clone()))),
            Err(_) => errors += 1,
        }
    }
    let (mut identity, mut assoc, mut chain, mut mapping) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut pairs = 0;
    for w in maps.chunks(4) {
        if w.len() < 4 {
            break;
        }
        let g = |a: usize, b: usize| groupoid_pt(&w[a].0, &w[b].0);
        let (Ok(ab), Ok(bc), Ok(cd), Ok(ac), Ok(aa)) =
            (g(0, 1), g(1, 2), g(2, 3), g(0, 2), g(0, 0))
        else {
            errors += 1;
            continue;
        };
        identity = identity.max(
            aa.distance(&ab.compose(&groupoid_pt(&w[1].0, &w[0].0).expect("inverse")))
                .max(if aa.is_identity(tol) {
                    0.0
                } else {
                    f64::INFINITY
                }),
        );
        assoc = assoc.max(
            cd.compose(&bc.compose(&ab))
                .distance(&cd.compose(&bc).compose(&ab)),
        );
        chain = chain.max(bc.compose(&ab).distance(&ac));
    }
    for pair in maps.chunks(2).take(100) {
        let [(ms, ps, _), (mt, _, Some(truth))] = pair else {
            continue;
        };
        match groupoid_pt(ms, mt)
            .map_err(|e| e.to_string())
            .and_then(|g| g.apply(*ps).map_err(|e| e.to_string()))
        {
            Ok(q) => {
                pairs += 1;
                for (a, b) in q.iter().zip(truth) {
                    mapping = mapping.max(rel(*a, *b));
                }
            }
            Err(_) => errors += 1,
        }
    }
    let passed = errors == 0
        && identity <= tol
        && assoc <= tol
        && chain <= tol
        && mapping <= map_tol
        && pairs == 100;
    result(
        8,
        passed,
        format!(
            "identity {identity:.1e}, associativity {assoc:.1e}, composition {chain:.1e} (tol {tol:.0e}); \
             {pairs} event pairs mapped, max relative error {mapping:.3e} (tol {map_tol:.0e}); {errors} errors"
        ),
    )
}

pub fn identity_2d(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-11);
    let s = fixture(PAIR_2D, 100);
    let c = &s.constellation;
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for e in &s.events {
        let got =
            receptions_2d(c, e).and_then(|[a, b]| localize_2d(&a, &b).map_err(|x| x.to_string()));
        let want = emission_coordinates(&c.emitters, e).map_err(|x| x.to_string());
        match (got, want) {
            (Ok(p), Ok(q)) => worst = worst.max(p.max_abs_diff(&q)),
            _ => errors += 1,
        }
    }
    let passed = errors == 0 && worst <= tol;
    result(
        9,
        passed,
        format!("100 events, max abs difference {worst:.3e} (tol {tol:.0e}), {errors} errors"),
    )
}

pub fn plane_coherence(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-9);
    let s = fixture(TRIANGLE_3D, 100);
    let c = &s.constellation;
    let (mut grid, mut space, mut cond) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut errors = Vec::new();
    for (i, e) in s.events.iter().enumerate() {
        let attempt = || -> Result<(f64, f64, f64), String> {
            let truth = emission_coordinates(&c.emitters, e).map_err(|x| x.to_string())?;
            let b = assemble_echo_3d(c, e, &s.orientations, "").map_err(|x| x.to_string())?;
            let st = oracle::plane_stations(&b, &truth).ok_or("no oracle angle")?;
            let sol = localize_3d_planes(&st).map_err(|x| x.to_string())?;
            let g = sol
                .recovered
                .iter()
                .zip(&truth.stamps)
                .fold(0.0_f64, |m, (a, b)| m.max(rel(*a, *b)));
            let back = cartesian_of_emission(
                &c.emitters,
                &EmissionPosition::new(sol.recovered.to_vec()),
                Some(e),
            )
            .map_err(|x| x.to_string())?;
            let d = back.coord_distance(e) / e.coords().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            Ok((g, d, sol.condition))
        };
        match attempt() {
            Ok((g, d, k)) => {
                grid = grid.max(g);
                space = space.max(d);
                cond = cond.max(k);
            }
            Err(err) => errors.push(format!("event {i}: {err}")),
        }
    }
    let passed = errors.is_empty() && grid <= tol && space <= tol;
    let first = errors
        .first()
        .map(|e| format!(", first: {e}"))
        .unwrap_or_default();
    result(
        10,
        passed,
        format!(
            "100 events, emission-grid error {grid:.3e}, cone-intersection error {space:.3e} (tol {tol:.0e}), \
             max condition {cond:.1e}, {} errors{first}",
            errors.len()
        ),
    )
}

/// Retarded and advanced parameters of an inertial emitter
/// `w(s) = (s, a + v (s - t0))` seen from `x`.
fn inertial_roots(a: &[f64], t0: f64, v: &[f64], x: &Event) -> (f64, f64) {
    let b: Vec<f64> = x
        .space()
        .iter()
        .zip(a)
        .zip(v)
        .map(|((x, a), v)| x - a + v * t0)
        .collect();
    let t = x.time();
    let bv: f64 = b.iter().zip(v).map(|(b, v)| b * v).sum();
    let b2: f64 = b.iter().map(|b| b * b).sum();
    let v2: f64 = v.iter().map(|v| v * v).sum();
    let (qa, half_b, qc) = (1.0 - v2, -(t - bv), t * t - b2);
    let disc = (half_b * half_b - qa * qc).sqrt();
    let q = -(half_b - disc);
    let (r1, r2) = (q / qa, qc / q);
    (r1.min(r2), r1.max(r2))
}

fn sign_changes(f: impl Fn(f64) -> f64, (lo, hi): (f64, f64), n: usize) -> usize {
    let mut prev = f(lo);
    let mut count = 0;
    for k in 1..=n {
        let cur = f(lo + (hi - lo) * k as f64 / n as f64);
        if cur.signum() != prev.signum() && cur != 0.0 {
            count += 1;
        }
        prev = cur;
    }
    count
}

pub fn null_solver(o: &SelftestOptions) -> CriterionResult {
    let tol = o.tol(1e-11);
    let mut rng = o.rng(11);
    let mut worst: f64 = 0.0;
    let (mut errors, mut non_unique) = (0, 0);
    let domain = (-1e3, 1e3);
    for case in 0..400 {
        let d = 2 + case % 3;
        let n = d - 1;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let t0 = rng.gen_range(-5.0..5.0);
        let v: Vec<f64> = if case % 2 == 0 {
            vec![0.0; n]
        } else {
            let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            let speed = rng.gen_range(0.0..0.8);
            dir.iter().map(|x| speed * x / norm).collect()
        };
        let x_space: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let x = Event::from_parts(rng.gen_range(-20.0..20.0), &x_space).expect("event");
        let start = Event::from_parts(t0, &a).expect("event");
        let Ok(w) = WorldlineSpec::inertial(start, &v, domain) else {
            errors += 1;
            continue;
        };
        let (ret, adv) = inertial_roots(&a, t0, &v, &x);
        let solver = NullSolver::default();
        match (solver.past(&w, &x, domain), solver.future(&w, &x, domain)) {
            (Ok(p), Ok(f)) => {
                worst = worst
                    .max((p - ret).abs() / ret.abs().max(1.0))
                    .max((f - adv).abs() / adv.abs().max(1.0));
            }
            _ => errors += 1,
        }
        let gap = |s: f64, sign: f64| {
            let p = w.point(s);
            let dx: f64 = p
                .space()
                .iter()
                .zip(x.space())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            (x.time() - p.time()) + sign * dx
        };
        if sign_changes(|s| gap(s, -1.0), domain, 4000) != 1
            || sign_changes(|s| gap(s, 1.0), domain, 4000) != 1
        {
            non_unique += 1;
        }
    }
    let passed = errors == 0 && non_unique == 0 && worst <= tol;
    result(
        11,
        passed,
        format!(
            "400 static/inertial cases, max error vs closed form {worst:.3e} (tol {tol:.0e}), \
             {non_unique} with non-unique roots, {errors} errors"
        ),
    )
}

pub fn run_criterion(id: u8, o: &SelftestOptions) -> Option<CriterionResult> {
    Some(match id {
        1 => boundary_triple(o),
        2 => round_trip_3d(o),
        3 => frame_independence(o),
        4 => conformal_insensitivity(o),
        5 => consistency_4d(o),
        6 => common_denominator(o),
        7 => vanishing_concurrency(o),
        8 => groupoid_laws(o),
        9 => identity_2d(o),
        10 => plane_coherence(o),
        11 => null_solver(o),
        _ => return None,
    })
}

pub fn run_all(o: &SelftestOptions) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter_map(|(id, _)| run_criterion(*id, o))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inertial_roots_static_case() {
        let x = Event::new(&[10.0, 3.0, 4.0]).unwrap();
        let (r, a) = inertial_roots(&[0.0, 0.0], 0.0, &[0.0, 0.0], &x);
        assert!((r - 5.0).abs() < 1e-14 && (a - 15.0).abs() < 1e-14);
    }

    #[test]
    fn labels_cover_both_fixtures() {
        let labels = known_labels();
        assert!(labels.iter().any(|l| l == "A.fifth"));
        assert!(labels.iter().any(|l| l == "A.ref[B][0]"));
        assert!(check_corruption_label("Z.nothing").is_err());
    }

    #[test]
    fn corruption_hits_named_stamp() {
        let mut recs: Vec<EchoRecord3D> = (0..3)
            .map(|i| record_with_targets(i, (1.0, 2.0, 3.0)))
            .collect();
        assert!(corrupt_records_3d(&mut recs, "E1.next[1]"));
        assert_eq!(recs[1].neighbor_positions[0].stamps[1], 1.0 + CORRUPTION);
        assert!(!corrupt_records_3d(&mut recs, "E1.next[7]"));
    }

    #[test]
    fn ulp_distance() {
        assert_eq!(ulps(1.0, 1.0), 0);
        assert_eq!(ulps(1.0, f64::from_bits(1.0f64.to_bits() + 3)), 3);
        assert_eq!(ulps(-0.0, 0.0), 0);
    }
}
