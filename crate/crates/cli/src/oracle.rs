//! Reference computations that avoid the protocol's own code paths.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use stereoloc::localization::PlaneStation;
use stereoloc::positioning::{EchoBundle3D, EmissionPosition, Station4D, StationBundle4D};

fn angle(u: &[f64]) -> f64 {
    u[1].atan2(u[0])
}

/// Cross-ratio of four lines through the origin given by their angles.
fn line_cross_ratio(a: f64, b: f64, c: f64, d: f64) -> f64 {
    ((a - c).sin() * (b - d).sin()) / ((a - d).sin() * (b - c).sin())
}

/// Stamp `x` with `(x, y; c, d) = k` for finite stamps.
fn solve_cross_ratio(k: f64, y: f64, c: f64, d: f64) -> f64 {
    (c * (y - d) - k * d * (y - c)) / ((y - d) - k * (y - c))
}

/// Stereometric coordinates of a 2+1 bundle from the angles at which each
/// station sees `e`, its neighbours and the localizing emitter.
pub fn cross_ratio_3d(bundle: &EchoBundle3D) -> [f64; 3] {
    std::array::from_fn(|i| {
        let st = &bundle.stations[i];
        let [de, dn, dnn, ds] = &st.directions;
        let (t, h, f) = st.record.frame_targets().expect("fifth stamp");
        let k = line_cross_ratio(
            angle(de.components()),
            angle(ds.components()),
            angle(dn.components()),
            angle(dnn.components()),
        );
        solve_cross_ratio(k, f, t, h)
    })
}

fn vec3(u: &[f64]) -> Vector3<f64> {
    Vector3::new(u[0], u[1], u[2])
}

/// `[p:q:r]` of the direction to `e` in the frame of the three references
/// with the fifth emitter as unit point, by two LU solves.
pub fn frame_reading_4d(st: &Station4D) -> [f64; 3] {
    let d: Vec<Vector3<f64>> = st.directions.iter().map(|x| vec3(x.components())).collect();
    let a = Matrix3::from_columns(&[d[1], d[2], d[3]]);
    let scales = a.lu().solve(&d[4]).expect("references span");
    let k = Matrix3::from_columns(&[d[1] * scales[0], d[2] * scales[1], d[3] * scales[2]]);
    let n = k.lu().solve(&d[0]).expect("frame invertible");
    [n[0], n[1], n[2]]
}

/// The station's coordinate pair with its second-row stamp fixed to its
/// own fifth stamp.
pub fn station_pair_4d(st: &Station4D) -> [f64; 2] {
    let r = &st.record;
    let t5 = r.fifth_stamp;
    let c = |k: usize| -> [f64; 3] {
        std::array::from_fn(|j| r.reference_positions[j].stamps[r.pair[k]])
    };
    let (c1, c2) = (c(0), c(1));
    let m = Matrix2::new(c1[0] - t5, c1[1] - t5, c2[0] - t5, c2[1] - t5);
    let w = m
        .lu()
        .solve(&Vector2::new(t5 - c1[2], t5 - c2[2]))
        .expect("station system");
    let [p, q, s] = frame_reading_4d(st);
    let den = w[0] * p + w[1] * q + s;
    [
        (c1[0] * w[0] * p + c1[1] * w[1] * q + c1[2] * s) / den,
        (c2[0] * w[0] * p + c2[1] * w[1] * q + c2[2] * s) / den,
    ]
}

/// 4-position assembled from stations 0 and 2.
pub fn assembled_4d(bundle: &StationBundle4D) -> [f64; 4] {
    let mut out = [f64::NAN; 4];
    for st in [&bundle.stations[0], &bundle.stations[2]] {
        let v = station_pair_4d(st);
        out[st.record.pair[0]] = v[0];
        out[st.record.pair[1]] = v[1];
    }
    out
}

fn arr3(p: &EmissionPosition) -> [f64; 3] {
    [p.stamps[0], p.stamps[1], p.stamps[2]]
}

/// Plane-construction inputs for a 2+1 bundle, with each compass tangent
/// chosen so the station's plane passes through `target`.
pub fn plane_stations(
    bundle: &EchoBundle3D,
    target: &EmissionPosition,
) -> Option<[PlaneStation; 3]> {
    let (_, user) = bundle.user.as_ref()?;
    let mut out = Vec::with_capacity(3);
    for st in &bundle.stations {
        let mut p = PlaneStation {
            apex: arr3(&st.geometry.reception_position),
            p_tilde: arr3(&st.record.neighbor_positions[0]),
            p_hat: arr3(&st.record.neighbor_positions[1]),
            p_user: arr3(user),
            tan_alpha: 0.0,
        };
        p.tan_alpha = membership_angle(&p, arr3(target))?;
        out.push(p);
    }
    out.try_into().ok()
}

/// Tangent for which the station plane contains `target`, from the
/// vanishing of `det[target - E, v+, v-]` as an affine function of it.
fn membership_angle(p: &PlaneStation, target: [f64; 3]) -> Option<f64> {
    let probe = |t: f64| {
        let q = PlaneStation { tan_alpha: t, ..*p };
        plane_det(&q, target)
    };
    let f0 = probe(0.0)?;
    let f1 = probe(1.0)?;
    if f1 == f0 {
        return None;
    }
    Some(-f0 / (f1 - f0))
}

fn plane_det(p: &PlaneStation, target: [f64; 3]) -> Option<f64> {
    let v = |a: [f64; 3]| Vector3::from(a);
    let e = v(p.apex);
    let ph = 2.0 * e - v(p.p_hat);
    let pt = 2.0 * e - v(p.p_tilde);
    let u = v(p.p_user);
    let c = circumcenter_by_solve(u, pt, ph)?;
    let w = (pt - c) + p.tan_alpha * (ph - c);
    let (vp, vm) = ((c - e) + w, (c - e) - w);
    Some(Matrix3::from_columns(&[v(target) - e, vp, vm]).determinant())
}

/// Circumcenter as the solution of the two bisector equations and the
/// plane equation.
fn circumcenter_by_solve(
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
) -> Option<Vector3<f64>> {
    let n = (b - a).cross(&(c - a));
    let m = Matrix3::from_rows(&[(b - a).transpose(), (c - a).transpose(), n.transpose()]);
    let rhs = Vector3::new(
        0.5 * (b.norm_squared() - a.norm_squared()),
        0.5 * (c.norm_squared() - a.norm_squared()),
        n.dot(&a),
    );
    m.lu().solve(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_ratio_inverts() {
        let (c, d, y) = (2.0, -3.0, 7.5);
        let x = 1.25;
        let k = ((x - c) * (y - d)) / ((x - d) * (y - c));
        assert!((solve_cross_ratio(k, y, c, d) - x).abs() < 1e-13);
    }

    #[test]
    fn line_cross_ratio_ignores_orientation() {
        let (a, b, c, d) = (0.3, 1.1, -0.4, 2.0);
        let pi = std::f64::consts::PI;
        let k = line_cross_ratio(a, b, c, d);
        assert!((line_cross_ratio(a + pi, b, c - pi, d) - k).abs() < 1e-12);
    }

    #[test]
    fn circumcenter_equidistant() {
        let (a, b, c) = (
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(3.0, 0.5, 0.0),
            Vector3::new(-1.0, 2.0, 2.0),
        );
        let o = circumcenter_by_solve(a, b, c).unwrap();
        assert!(((o - a).norm() - (o - b).norm()).abs() < 1e-12);
        assert!(((o - a).norm() - (o - c).norm()).abs() < 1e-12);
    }
}
