//! Localization protocols.
//!
//! * 1+1: the emission grid and the stereometric grid coincide.
//! * 2+1, planes: a six-equation linear solve in the emission grid.
//! * 2+1, intrinsic: each station maps its normalized reading through the
//!   Moebius map fixed by three broadcast stamps.
//! * 3+1: each station solves a 2x2 system for the weights of its frame and
//!   reconstructs a pair of coordinates; pairs overlap, giving four
//!   consistency residuals.

use crate::positioning::{AttributionTable, EchoRecord3D, EmissionPosition, StationRecord4D};
use crate::projective::{
    moebius_coefficients, stamp_of_reading, MoebiusCoefficients, ProjPoint1, ProjectiveError,
};
use nalgebra::{Matrix2, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocalizationError {
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("station {station}: degenerate frame: {source}")]
    DegenerateFrame {
        station: usize,
        source: ProjectiveError,
    },
    #[error("station {0}: missing fifth stamp")]
    MissingFifthStamp(usize),
    #[error("station {0}: reading maps to infinity")]
    AtInfinity(usize),
    #[error("station {0}: singular weight system")]
    SingularStation(usize),
    #[error("singular plane system")]
    SingularSystem,
    #[error("relative vectors are parallel")]
    Parallel,
    #[error("constraint residuals {residuals:?} exceed tolerance {tolerance:e}")]
    ConstraintViolation { residuals: Vec<f64>, tolerance: f64 },
    #[error("no anchor coordinate attached")]
    MissingAnchor,
    #[error("invalid attribution table: {0}")]
    Attribution(String),
}

/// Stereometric coordinates of an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoPosition {
    pub stamps: Vec<f64>,
    pub anchor: Option<f64>,
    pub constraint_residuals: Vec<f64>,
}

impl StereoPosition {
    pub fn max_residual(&self) -> f64 {
        self.constraint_residuals
            .iter()
            .fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// `(τ, τ̄, ...)` concatenated with the anchor coordinate.
pub fn embed_event(p: &StereoPosition) -> Result<Vec<f64>, LocalizationError> {
    let a = p.anchor.ok_or(LocalizationError::MissingAnchor)?;
    let mut v = p.stamps.clone();
    v.push(a);
    Ok(v)
}

/// Position of `e` from the emission positions of the reception events of
/// its two light rays: `E1` on the first worldline, `E2` on the second.
pub fn localize_2d(
    e1: &EmissionPosition,
    e2: &EmissionPosition,
) -> Result<EmissionPosition, LocalizationError> {
    for p in [e1, e2] {
        if p.dim() != 2 {
            return Err(LocalizationError::DimensionMismatch {
                expected: 2,
                got: p.dim(),
            });
        }
    }
    Ok(EmissionPosition::new(vec![e2.stamps[0], e1.stamps[1]]))
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

/// Circumcenter of `U`, `U + r̃`, `U + r̂`.
pub fn circumcenter(
    u: [f64; 3],
    rt: [f64; 3],
    rh: [f64; 3],
) -> Result<[f64; 3], LocalizationError> {
    let (rt, rh) = (v3(rt), v3(rh));
    let n = rt.cross(&rh);
    let n2 = n.norm_squared();
    if n2 <= 1e-24 * rt.norm_squared() * rh.norm_squared() {
        return Err(LocalizationError::Parallel);
    }
    let a = rh * rt.norm_squared() - rt * rh.norm_squared();
    let c = v3(u) + a.cross(&n) / (2.0 * n2);
    Ok(c.into())
}

/// Inputs of one station for the plane construction, all in the emission
/// grid: the station position, the positions of the next and next-but-one
/// bright points, the user position and the compass tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneStation {
    pub apex: [f64; 3],
    pub p_tilde: [f64; 3],
    pub p_hat: [f64; 3],
    pub p_user: [f64; 3],
    pub tan_alpha: f64,
}

#[derive(Debug, Clone, Copy)]
struct PlaneFrame {
    e: Vector3<f64>,
    c: Vector3<f64>,
    cp_tilde: Vector3<f64>,
    cp_hat: Vector3<f64>,
}

impl PlaneStation {
    fn frame(&self) -> Result<PlaneFrame, LocalizationError> {
        let e = v3(self.apex);
        let p_hat = 2.0 * e - v3(self.p_hat);
        let p_tilde = 2.0 * e - v3(self.p_tilde);
        let u = v3(self.p_user);
        let c = v3(circumcenter(
            self.p_user,
            (p_tilde - u).into(),
            (p_hat - u).into(),
        )?);
        Ok(PlaneFrame {
            e,
            c,
            cp_tilde: p_tilde - c,
            cp_hat: p_hat - c,
        })
    }

    /// The tangent for which the station's plane contains `target`.
    pub fn membership_tan_alpha(&self, target: [f64; 3]) -> Result<f64, LocalizationError> {
        let f = self.frame()?;
        let a = v3(target) - f.e;
        let b = f.c - f.e;
        let den = a.cross(&b).dot(&f.cp_hat);
        if den == 0.0 {
            return Err(LocalizationError::Parallel);
        }
        Ok(-a.cross(&b).dot(&f.cp_tilde) / den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneSolution3D {
    pub circumcenters: [[f64; 3]; 3],
    pub v_plus: [[f64; 3]; 3],
    pub v_minus: [[f64; 3]; 3],
    /// `(a⁺, a⁻)` per station.
    pub coefficients: [[f64; 2]; 3],
    pub recovered: [f64; 3],
    /// Ratio of extreme singular values of the 6x6 system.
    pub condition: f64,
    /// Largest mismatch between the three plane parameterizations of the
    /// recovered point.
    pub residual: f64,
}

pub fn localize_3d_planes(
    stations: &[PlaneStation; 3],
) -> Result<PlaneSolution3D, LocalizationError> {
    let mut frames = Vec::with_capacity(3);
    let mut vp = [[0.0; 3]; 3];
    let mut vm = [[0.0; 3]; 3];
    for (i, st) in stations.iter().enumerate() {
        let f = st.frame()?;
        let ec = f.c - f.e;
        let w = f.cp_tilde + st.tan_alpha * f.cp_hat;
        vp[i] = (ec + w).into();
        vm[i] = (ec - w).into();
        frames.push(f);
    }
    let mut m = Matrix6::zeros();
    let mut rhs = Vector6::zeros();
    for k in 0..3 {
        m[(k, 0)] = vp[0][k];
        m[(k, 1)] = vm[0][k];
        m[(k, 2)] = -vp[1][k];
        m[(k, 3)] = -vm[1][k];
        m[(k + 3, 0)] = vp[0][k];
        m[(k + 3, 1)] = vm[0][k];
        m[(k + 3, 4)] = -vp[2][k];
        m[(k + 3, 5)] = -vm[2][k];
        rhs[k] = frames[1].e[k] - frames[0].e[k];
        rhs[k + 3] = frames[2].e[k] - frames[0].e[k];
    }
    let sv = m.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition.is_finite() && condition < 1e14) {
        return Err(LocalizationError::SingularSystem);
    }
    let a = m
        .lu()
        .solve(&rhs)
        .ok_or(LocalizationError::SingularSystem)?;
    let coefficients = [[a[0], a[1]], [a[2], a[3]], [a[4], a[5]]];
    let points: Vec<Vector3<f64>> = (0..3)
        .map(|i| frames[i].e + v3(vp[i]) * coefficients[i][0] + v3(vm[i]) * coefficients[i][1])
        .collect();
    let residual = (points[0] - points[1])
        .amax()
        .max((points[0] - points[2]).amax());
    Ok(PlaneSolution3D {
        circumcenters: [frames[0].c.into(), frames[1].c.into(), frames[2].c.into()],
        v_plus: vp,
        v_minus: vm,
        coefficients,
        recovered: points[0].into(),
        condition,
        residual,
    })
}

/// Moebius coefficients of the three stations' reading-to-stamp maps.
pub fn station_coefficients(
    records: &[EchoRecord3D; 3],
) -> Result<[MoebiusCoefficients; 3], LocalizationError> {
    let mut out = Vec::with_capacity(3);
    for r in records {
        let (t, h, f) = r
            .frame_targets()
            .ok_or(LocalizationError::MissingFifthStamp(r.station))?;
        out.push(moebius_coefficients(t, h, f).map_err(|source| {
            LocalizationError::DegenerateFrame {
                station: r.station,
                source,
            }
        })?);
    }
    Ok(out.try_into().expect("three stations"))
}

/// Stereometric `(τ_e, τ̃_e, τ̂_e)` from the three stations' records and
/// normalized readings.
pub fn localize_3d_intrinsic(
    records: &[EchoRecord3D; 3],
    readings: &[ProjPoint1; 3],
    anchor: Option<f64>,
) -> Result<StereoPosition, LocalizationError> {
    let mut stamps = vec![0.0; 3];
    for (r, reading) in records.iter().zip(readings) {
        let i = r.station;
        let (t, h, f) = r
            .frame_targets()
            .ok_or(LocalizationError::MissingFifthStamp(i))?;
        stamps[i] = stamp_of_reading(t, h, f, reading)
            .map_err(|source| LocalizationError::DegenerateFrame { station: i, source })?
            .ok_or(LocalizationError::AtInfinity(i))?;
    }
    Ok(StereoPosition {
        stamps,
        anchor,
        constraint_residuals: vec![],
    })
}

/// One station's reconstruction in 3+1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationSolution4D {
    pub station: usize,
    pub pair: [usize; 2],
    pub lambda: f64,
    pub x: f64,
    pub y: f64,
    pub values: [f64; 2],
}

/// Cramer pieces of a station system: `(det, N_x, N_y)`, all affine in
/// `lambda`.
fn station_cramer(record: &StationRecord4D, lambda: f64) -> (f64, f64, f64, [[f64; 3]; 2]) {
    let pairs = record.reference_pairs();
    let tau5 = record.fifth_stamp;
    let c1 = [pairs[0][0], pairs[1][0], pairs[2][0]];
    let c2 = [pairs[0][1], pairs[1][1], pairs[2][1]];
    let (a11, a12, b1) = (c1[0] - tau5, c1[1] - tau5, -(c1[2] - tau5));
    let (a21, a22, b2) = (c2[0] - lambda, c2[1] - lambda, -(c2[2] - lambda));
    let det = a11 * a22 - a12 * a21;
    (det, b1 * a22 - a12 * b2, a11 * b2 - b1 * a21, [c1, c2])
}

/// Solves one station with the second-row stamp `lambda`.
pub fn station_pair_4d(
    record: &StationRecord4D,
    lambda: f64,
) -> Result<StationSolution4D, LocalizationError> {
    let (det, nx, ny, c) = station_cramer(record, lambda);
    let scale = c
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max((v - record.fifth_stamp).abs()));
    if !(det.abs() > 1e-12 * scale * scale) {
        return Err(LocalizationError::SingularStation(record.station));
    }
    let (x, y) = (nx / det, ny / det);
    let [p, q, r] = record.normalized.h;
    let w = x * p + y * q + r;
    let mag = (x * p).abs() + (y * q).abs() + r.abs();
    if !(w.abs() > 1e-13 * mag) {
        return Err(LocalizationError::AtInfinity(record.station));
    }
    let value = |k: usize| (c[k][0] * x * p + c[k][1] * y * q + c[k][2] * r) / w;
    Ok(StationSolution4D {
        station: record.station,
        pair: record.pair,
        lambda,
        x,
        y,
        values: [value(0), value(1)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Localization4D {
    pub position: StereoPosition,
    pub stations: [StationSolution4D; 4],
}

fn check_records(records: &[StationRecord4D; 4]) -> Result<(), LocalizationError> {
    let mut table = AttributionTable::default();
    for (i, r) in records.iter().enumerate() {
        if r.station != i {
            return Err(LocalizationError::Attribution(format!(
                "record {i} is for station {}",
                r.station
            )));
        }
        table.rows[i].refs = r.reference_emitters;
        table.rows[i].pair = r.pair;
    }
    table
        .validate()
        .map_err(|e| LocalizationError::Attribution(e.to_string()))
}

/// The two `(station, slot)` occurrences of each coordinate.
fn occurrences(records: &[StationRecord4D; 4]) -> [[(usize, usize); 2]; 4] {
    let mut occ = [[(usize::MAX, 0); 2]; 4];
    let mut n = [0usize; 4];
    for r in records {
        for (slot, m) in r.pair.iter().enumerate() {
            occ[*m][n[*m]] = (r.station, slot);
            n[*m] += 1;
        }
    }
    occ
}

/// 4-position with every station's second row fixed to its own fifth stamp;
/// residuals are reported but not enforced.
pub fn localize_4d_unchecked(
    records: &[StationRecord4D; 4],
    anchor: Option<f64>,
) -> Result<Localization4D, LocalizationError> {
    check_records(records)?;
    let sols = records
        .iter()
        .map(|r| station_pair_4d(r, r.fifth_stamp))
        .collect::<Result<Vec<_>, _>>()?;
    let sols: [StationSolution4D; 4] = sols.try_into().expect("four stations");
    let occ = occurrences(records);
    let residuals = occ
        .iter()
        .map(|[(s0, k0), (s1, k1)]| sols[*s0].values[*k0] - sols[*s1].values[*k1])
        .collect();
    let mut stamps = vec![0.0; 4];
    for s in [&sols[0], &sols[2]] {
        for (slot, m) in s.pair.iter().enumerate() {
            stamps[*m] = s.values[slot];
        }
    }
    Ok(Localization4D {
        position: StereoPosition {
            stamps,
            anchor,
            constraint_residuals: residuals,
        },
        stations: sols,
    })
}

/// Like [`localize_4d_unchecked`] but rejects residuals above `tolerance`.
pub fn localize_4d(
    records: &[StationRecord4D; 4],
    anchor: Option<f64>,
    tolerance: f64,
) -> Result<Localization4D, LocalizationError> {
    let out = localize_4d_unchecked(records, anchor)?;
    if out.position.max_residual() > tolerance {
        return Err(LocalizationError::ConstraintViolation {
            residuals: out.position.constraint_residuals.clone(),
            tolerance,
        });
    }
    Ok(out)
}

/// Each station output as a Moebius function of its second-row stamp.
fn output_in_lambda(record: &StationRecord4D, slot: usize) -> Matrix2<f64> {
    let [p, q, r] = record.normalized.h;
    let eval = |lambda: f64| {
        let (det, nx, ny, c) = station_cramer(record, lambda);
        let num = c[slot][0] * nx * p + c[slot][1] * ny * q + c[slot][2] * det * r;
        let den = nx * p + ny * q + det * r;
        (num, den)
    };
    let (n0, d0) = eval(0.0);
    let (n1, d1) = eval(1.0);
    Matrix2::new(n1 - n0, n0, d1 - d0, d0)
}

/// Fixed-point analysis of the chain of constraints in the free stamps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaCycle {
    /// `[a, b, c]` of `a λ² + b λ + c = 0` for station 0's free stamp.
    pub quadratic: [f64; 3],
    pub roots: Vec<f64>,
    /// Normalized value of the quadratic at station 0's fifth stamp.
    pub fixed_residual: f64,
}

impl LambdaCycle {
    pub fn fixed_value_admissible(&self, tol: f64) -> bool {
        self.fixed_residual <= tol
    }
}

/// Follows the constraints around the station cycle: every constraint ties
/// the free stamp of one station to the next by a Moebius map, and going
/// round gives one quadratic equation for station 0's free stamp.
pub fn lambda_cycle(records: &[StationRecord4D; 4]) -> Result<LambdaCycle, LocalizationError> {
    check_records(records)?;
    let occ = occurrences(records);
    let mut total = Matrix2::identity();
    let (mut station, mut out_slot) = (0usize, 1usize);
    for _ in 0..4 {
        let m = records[station].pair[out_slot];
        let (next, in_slot) = occ[m]
            .iter()
            .copied()
            .find(|(s, _)| *s != station)
            .ok_or_else(|| LocalizationError::Attribution("broken cycle".into()))?;
        let from = output_in_lambda(&records[station], out_slot);
        let to = output_in_lambda(&records[next], in_slot);
        let to_inv = to
            .try_inverse()
            .ok_or(LocalizationError::SingularStation(next))?;
        total = to_inv * from * total;
        station = next;
        out_slot = 1 - in_slot;
        if station == 0 {
            break;
        }
    }
    let (a, b, c, d) = (total[(0, 0)], total[(0, 1)], total[(1, 0)], total[(1, 1)]);
    let quadratic = [c, d - a, -b];
    let mut roots = Vec::new();
    if c.abs() > 1e-300 {
        let disc = quadratic[1] * quadratic[1] - 4.0 * c * quadratic[2];
        if disc >= 0.0 {
            let q = -0.5 * (quadratic[1] + quadratic[1].signum() * disc.sqrt());
            roots.push(q / c);
            if q != 0.0 {
                roots.push(quadratic[2] / q);
            }
        }
    } else if quadratic[1] != 0.0 {
        roots.push(-quadratic[2] / quadratic[1]);
    }
    let l = records[0].fifth_stamp;
    let val = quadratic[0] * l * l + quadratic[1] * l + quadratic[2];
    let mag = (quadratic[0] * l * l).abs() + (quadratic[1] * l).abs() + quadratic[2].abs();
    Ok(LambdaCycle {
        quadratic,
        roots,
        fixed_residual: if mag > 0.0 { val.abs() / mag } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::{Hemisphere, HemisphereReading};
    use crate::projective::ProjPoint2;

    fn pos(v: &[f64]) -> EmissionPosition {
        EmissionPosition::new(v.to_vec())
    }

    #[test]
    fn two_dimensional_identity() {
        let e = localize_2d(&pos(&[5.0, 2.0]), &pos(&[1.0, 7.0])).unwrap();
        assert_eq!(e.stamps, vec![1.0, 2.0]);
        let e1 = pos(&[3.0, 1.0]);
        assert_eq!(localize_2d(&e1, &pos(&[3.0, 6.0])).unwrap(), e1);
        assert!(localize_2d(&pos(&[1.0]), &e1).is_err());
    }

    fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
        (v3(a) - v3(b)).norm()
    }

    #[test]
    fn circumcenter_examples() {
        let s = 3f64.sqrt();
        let c = circumcenter([0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, s, 0.0]).unwrap();
        assert!(dist(c, [1.0, s / 3.0, 0.0]) < 1e-15);
        let c = circumcenter([1.0, 1.0, 1.0], [4.0, 0.0, 0.0], [0.0, 3.0, 0.0]).unwrap();
        assert!(dist(c, [3.0, 2.5, 1.0]) < 1e-15);
        let u = [0.3, -1.2, 2.0];
        let (a, b) = ([1.7, 0.4, -0.9], [-0.2, 2.2, 0.5]);
        let c = circumcenter(u, a, b).unwrap();
        let pa = (v3(u) + v3(a)).into();
        let pb = (v3(u) + v3(b)).into();
        assert!(
            (dist(c, u) - dist(c, pa)).abs() < 1e-11 && (dist(c, u) - dist(c, pb)).abs() < 1e-11
        );
        assert_eq!(
            circumcenter(u, a, [3.4, 0.8, -1.8]),
            Err(LocalizationError::Parallel)
        );
    }

    fn plane_stations() -> [PlaneStation; 3] {
        [
            PlaneStation {
                apex: [10.0, 2.0, 1.0],
                p_tilde: [7.0, 9.0, 0.0],
                p_hat: [6.0, -2.0, 8.0],
                p_user: [12.0, 12.0, 11.0],
                tan_alpha: 0.0,
            },
            PlaneStation {
                apex: [3.0, 11.0, 2.5],
                p_tilde: [1.0, 5.0, 9.0],
                p_hat: [8.0, 7.0, -1.0],
                p_user: [12.0, 12.0, 11.0],
                tan_alpha: 0.0,
            },
            PlaneStation {
                apex: [1.0, 4.0, 12.0],
                p_tilde: [9.0, 1.0, 5.0],
                p_hat: [2.0, 8.0, 6.0],
                p_user: [12.0, 12.0, 11.0],
                tan_alpha: 0.0,
            },
        ]
    }

    #[test]
    fn planes_recover_target_with_membership_angles() {
        let target = [4.0, 5.0, 3.0];
        let mut st = plane_stations();
        for s in &mut st {
            s.tan_alpha = s.membership_tan_alpha(target).unwrap();
        }
        let sol = localize_3d_planes(&st).unwrap();
        assert!(dist(sol.recovered, target) <= 1e-9, "{:?}", sol.recovered);
        assert!(sol.residual <= 1e-9);
        let mut bumped = st;
        bumped[0].tan_alpha += 1e-6;
        let moved = localize_3d_planes(&bumped).unwrap();
        let shift = dist(moved.recovered, sol.recovered);
        assert!(shift > 0.0 && shift < 1e-6 * sol.condition);
    }

    #[test]
    fn identical_planes_are_singular() {
        let mut st = plane_stations();
        st[1] = st[0];
        st[2] = st[0];
        assert_eq!(
            localize_3d_planes(&st).unwrap_err(),
            LocalizationError::SingularSystem
        );
    }

    fn record3(station: usize, t: f64, h: f64, f: Option<f64>) -> EchoRecord3D {
        let mut a = vec![0.0; 3];
        let mut b = vec![0.0; 3];
        a[station] = t;
        b[station] = h;
        EchoRecord3D {
            emitter_id: format!("E{station}"),
            station,
            primary_stamp: 0.0,
            neighbor_positions: [pos(&a), pos(&b)],
            fifth_stamp: f,
            signature: "s".into(),
        }
    }

    #[test]
    fn boundary_readings_return_broadcast_stamps() {
        let recs = [
            record3(0, 2.0, 3.0, Some(1.0)),
            record3(1, 5.0, -1.0, Some(4.0)),
            record3(2, 9.0, 8.0, Some(7.5)),
        ];
        let zero = [ProjPoint1::finite(0.0); 3];
        let one = [ProjPoint1::finite(1.0); 3];
        let inf = [ProjPoint1::infinity(); 3];
        let p0 = localize_3d_intrinsic(&recs, &zero, None).unwrap().stamps;
        let p1 = localize_3d_intrinsic(&recs, &one, None).unwrap().stamps;
        let pi = localize_3d_intrinsic(&recs, &inf, Some(0.5)).unwrap();
        for i in 0..3 {
            let (t, h, f) = recs[i].frame_targets().unwrap();
            assert!((p0[i] - t).abs() <= 1e-12 && (p1[i] - f).abs() <= 1e-12);
            assert!((pi.stamps[i] - h).abs() <= 1e-12);
        }
        assert_eq!(embed_event(&pi).unwrap().len(), 4);
        let missing = [record3(0, 2.0, 3.0, None), recs[1].clone(), recs[2].clone()];
        assert_eq!(
            localize_3d_intrinsic(&missing, &zero, None),
            Err(LocalizationError::MissingFifthStamp(0))
        );
    }

    fn record4(
        station: usize,
        refs: [[f64; 4]; 3],
        fifth: f64,
        reading: [f64; 3],
    ) -> StationRecord4D {
        let t = AttributionTable::default();
        StationRecord4D {
            station,
            station_id: format!("E{station}"),
            reference_emitters: t.rows[station].refs,
            reference_positions: refs.map(|r| pos(&r)),
            fifth_stamp: fifth,
            pair: t.rows[station].pair,
            observed: HemisphereReading {
                hemisphere: Hemisphere::North,
                chart: vec![],
                passage: 0,
            },
            normalized: ProjPoint2 { h: reading },
            signature: "s".into(),
        }
    }

    #[test]
    fn reading_at_third_reference_collapses() {
        let refs = [
            [1.0, 2.0, 3.0, 4.0],
            [2.5, 0.5, 1.0, 3.0],
            [4.0, 3.5, 2.0, 0.5],
        ];
        let r = record4(0, refs, 0.25, [0.0, 0.0, 1.0]);
        let s = station_pair_4d(&r, r.fifth_stamp).unwrap();
        assert!((s.values[0] - 4.0).abs() < 1e-15 && (s.values[1] - 3.5).abs() < 1e-15);
    }

    #[test]
    fn equal_reference_stamps_are_singular() {
        let refs = [[1.0; 4], [1.0; 4], [1.0; 4]];
        let r = record4(0, refs, 1.0, [0.2, 0.3, 1.0]);
        assert_eq!(
            station_pair_4d(&r, 1.0),
            Err(LocalizationError::SingularStation(0))
        );
    }

    #[test]
    fn embedding_needs_anchor() {
        let p = StereoPosition {
            stamps: vec![1.0; 4],
            anchor: Some(2.0),
            constraint_residuals: vec![],
        };
        assert_eq!(embed_event(&p).unwrap().len(), 5);
        let q = StereoPosition { anchor: None, ..p };
        assert_eq!(embed_event(&q), Err(LocalizationError::MissingAnchor));
    }
}
