//! Celestial circle and sphere at a reception event.
//!
//! A station carries an orthonormal tetrad; incoming light is recorded as a
//! unit spatial direction toward its source. Raw readings are projective:
//! `[u2:u1]` on the circle (the tangent of the angle from leg 1) and the
//! gnomonic `[u1:u2:u3]` on the sphere. Measured coordinates come from
//! normalizing a raw reading against reference bright points.

use crate::geometry::{eta, Event, Worldline, MAX_DIM};
use crate::projective::{ProjPoint1, ProjPoint2, ProjectiveError};
use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservationError {
    #[error("parameter {0} outside the worldline domain")]
    OutOfDomain(f64),
    #[error("worldline tangent is not timelike at parameter {0}")]
    NonTimelike(f64),
    #[error("orientation acts on {got} spatial axes, tetrad needs {expected}")]
    OrientationDimension { expected: usize, got: usize },
    #[error("source is not on the past light cone of the station (residual {0:e})")]
    NotNull(f64),
    #[error("source is not in the past of the station")]
    NotPast,
    #[error("incoming ray has no spatial part")]
    ZeroSpatialPart,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degenerate reference frame: {0}")]
    DegenerateFrame(#[from] ProjectiveError),
}

/// Proper rotation applied to the coordinate axes before orthonormalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    n: usize,
    m: Matrix3<f64>,
}

impl Orientation {
    pub fn identity(spatial_dim: usize) -> Self {
        Orientation {
            n: spatial_dim,
            m: Matrix3::identity(),
        }
    }

    /// Rotation by `angle` in the plane (2+1 stations).
    pub fn planar(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut m = Matrix3::identity();
        m[(0, 0)] = c;
        m[(0, 1)] = -s;
        m[(1, 0)] = s;
        m[(1, 1)] = c;
        Orientation { n: 2, m }
    }

    /// Rotation about `axis` (3+1 stations).
    pub fn spatial(axis: [f64; 3], angle: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle);
        Orientation {
            n: 3,
            m: *r.matrix(),
        }
    }

    pub fn spatial_dim(&self) -> usize {
        self.n
    }

    fn seed(&self, k: usize) -> [f64; MAX_DIM] {
        let mut s = [0.0; MAX_DIM];
        for j in 0..self.n {
            s[j + 1] = self.m[(j, k)];
        }
        s
    }
}

/// Minkowski-orthonormal frame: leg 0 is the unit worldline tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct Tetrad {
    pub base: Event,
    pub legs: Vec<[f64; MAX_DIM]>,
}

impl Tetrad {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Largest deviation of the Gram matrix from diag(1, -1, ...).
    pub fn orthonormality_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let want = if i != j {
                    0.0
                } else if i == 0 {
                    1.0
                } else {
                    -1.0
                };
                worst = worst.max((eta(&self.legs[i][..d], &self.legs[j][..d]) - want).abs());
            }
        }
        worst
    }
}

pub fn tetrad_at<W: Worldline + ?Sized>(
    w: &W,
    s: f64,
    orientation: &Orientation,
) -> Result<Tetrad, ObservationError> {
    let d = w.dim();
    if orientation.n != d - 1 {
        return Err(ObservationError::OrientationDimension {
            expected: d - 1,
            got: orientation.n,
        });
    }
    let (lo, hi) = w.domain();
    if !(s >= lo && s <= hi) {
        return Err(ObservationError::OutOfDomain(s));
    }
    let v = w.tangent(s);
    let norm2 = eta(&v[..d], &v[..d]);
    if !(v[0] > 0.0 && norm2 > 0.0) {
        return Err(ObservationError::NonTimelike(s));
    }
    let u = v.map(|x| x / norm2.sqrt());
    let mut legs = vec![u];
    for k in 0..d - 1 {
        let seed = orientation.seed(k);
        let mut w_ = seed;
        let a = eta(&seed[..d], &u[..d]);
        for i in 0..d {
            w_[i] -= a * u[i];
        }
        for l in legs.iter().skip(1) {
            let b = eta(&w_[..d], &l[..d]);
            for i in 0..d {
                w_[i] += b * l[i];
            }
        }
        let n = (-eta(&w_[..d], &w_[..d])).sqrt();
        legs.push(w_.map(|x| x / n));
    }
    if d >= 3 && orientation_sign(&legs, d) < 0.0 {
        let last = legs.last_mut().expect("spatial leg");
        *last = last.map(|x| -x);
    }
    Ok(Tetrad {
        base: w.point(s),
        legs,
    })
}

fn orientation_sign(legs: &[[f64; MAX_DIM]], d: usize) -> f64 {
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| legs[j][i]);
    m.determinant().signum()
}

/// Unit spatial vector toward a light source, in tetrad components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    n: usize,
    u: [f64; 3],
}

impl Direction {
    pub fn new(components: &[f64]) -> Result<Self, ObservationError> {
        let n = components.len();
        let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(1..=3).contains(&n) {
            return Err(ObservationError::DimensionMismatch(n, 3));
        }
        if !(norm > 0.0) {
            return Err(ObservationError::ZeroSpatialPart);
        }
        let mut u = [0.0; 3];
        for (ui, c) in u.iter_mut().zip(components) {
            *ui = c / norm;
        }
        Ok(Direction { n, u })
    }

    pub fn components(&self) -> &[f64] {
        &self.u[..self.n]
    }

    pub fn spatial_dim(&self) -> usize {
        self.n
    }

    /// `[u2:u1]` on the circle.
    pub fn raw_rp1(&self) -> ProjPoint1 {
        ProjPoint1 {
            h: [self.u[1], self.u[0]],
        }
    }

    /// Gnomonic `[u1:u2:u3]` on the sphere.
    pub fn raw_rp2(&self) -> ProjPoint2 {
        ProjPoint2 { h: self.u }
    }
}

pub fn incoming_direction(t: &Tetrad, source: &Event) -> Result<Direction, ObservationError> {
    let d = t.dim();
    if source.dim() != d {
        return Err(ObservationError::DimensionMismatch(d, source.dim()));
    }
    let k = source.minus(&t.base);
    let k2: f64 = k.iter().map(|x| x * x).sum();
    let interval = eta(&k[..d], &k[..d]);
    if interval.abs() > 1e-9 * k2.max(f64::MIN_POSITIVE) {
        return Err(ObservationError::NotNull(interval));
    }
    if k[0] > 0.0 {
        return Err(ObservationError::NotPast);
    }
    let comps: Vec<f64> = t.legs[1..].iter().map(|l| -eta(&k[..d], &l[..d])).collect();
    let norm = comps.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-12 * k2.sqrt() {
        return Err(ObservationError::ZeroSpatialPart);
    }
    Direction::new(&comps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hemisphere {
    North,
    South,
    PolarCircle,
}

/// Chart value of a direction in the hemisphere atlas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemisphereReading {
    pub hemisphere: Hemisphere,
    /// `tanα` on the circle, `(tanα, tanβ)` on the sphere; empty on the
    /// polar circle.
    pub chart: Vec<f64>,
    /// Crossings of the polar circle so far, signed by the latest one
    /// (`+` north to south).
    pub passage: i32,
}

const POLAR_BAND: f64 = 1e-12;

/// Reading with the cap axis along the last spatial leg (the first leg on
/// the circle).
pub fn chart_reading(dir: &Direction) -> HemisphereReading {
    let u = dir.components();
    let axis = if u.len() == 3 { u[2] } else { u[0] };
    if axis.abs() <= POLAR_BAND {
        return HemisphereReading {
            hemisphere: Hemisphere::PolarCircle,
            chart: vec![],
            passage: 0,
        };
    }
    let hemisphere = if axis > 0.0 {
        Hemisphere::North
    } else {
        Hemisphere::South
    };
    let chart = match u.len() {
        3 => vec![u[0] / u[2], u[1] / u[2]],
        2 => vec![u[1] / u[0]],
        _ => vec![],
    };
    HemisphereReading {
        hemisphere,
        chart,
        passage: 0,
    }
}

/// Follows a moving bright point and records its polar-circle crossings.
#[derive(Debug, Clone, Default)]
pub struct HemisphereTracker {
    last: Option<Hemisphere>,
    signs: Vec<i8>,
}

impl HemisphereTracker {
    pub fn observe(&mut self, dir: &Direction) -> HemisphereReading {
        let mut r = chart_reading(dir);
        if r.hemisphere != Hemisphere::PolarCircle {
            if let Some(prev) = self.last {
                if prev != r.hemisphere {
                    self.signs
                        .push(if prev == Hemisphere::North { 1 } else { -1 });
                }
            }
            self.last = Some(r.hemisphere);
        }
        let n = self.signs.len() as i32;
        r.passage = self.signs.last().map_or(0, |s| n * *s as i32);
        r
    }

    pub fn crossings(&self) -> &[i8] {
        &self.signs
    }
}

fn det2(a: &ProjPoint1, b: &ProjPoint1) -> f64 {
    a.h[0] * b.h[1] - a.h[1] * b.h[0]
}

/// Coordinate of `e_dir` in the frame sending the three references to
/// `[0:1]`, `[1:0]` and `[1:1]`.
pub fn normalize_reading_rp1(
    e_dir: &Direction,
    refs: [&Direction; 3],
) -> Result<ProjPoint1, ObservationError> {
    for r in refs.iter().chain(std::iter::once(&e_dir)) {
        if r.spatial_dim() != 2 {
            return Err(ObservationError::DimensionMismatch(r.spatial_dim(), 2));
        }
    }
    let [z, i, o] = refs.map(|r| r.raw_rp1());
    for (a, b, ia, ib) in [(&z, &i, 0, 1), (&z, &o, 0, 2), (&i, &o, 1, 2)] {
        if a.distance(b) <= 1e-12 {
            return Err(ProjectiveError::CoincidentTargets(ia, ib).into());
        }
    }
    let x = e_dir.raw_rp1();
    let p = det2(&x, &z) * det2(&o, &i);
    let q = det2(&x, &i) * det2(&o, &z);
    Ok(ProjPoint1 { h: [p, q] })
}

fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - c[1] * b[2]) - b[0] * (a[1] * c[2] - c[1] * a[2])
        + c[0] * (a[1] * b[2] - b[1] * a[2])
}

/// Coordinates of `e_dir` in the frame sending the four references to
/// `[1:0:0]`, `[0:1:0]`, `[0:0:1]` and `[1:1:1]`.
pub fn normalize_reading_rp2(
    e_dir: &Direction,
    refs: [&Direction; 4],
) -> Result<ProjPoint2, ObservationError> {
    for r in refs.iter().chain(std::iter::once(&e_dir)) {
        if r.spatial_dim() != 3 {
            return Err(ObservationError::DimensionMismatch(r.spatial_dim(), 3));
        }
    }
    let r = refs.map(|d| d.u);
    let x = e_dir.u;
    let base = det3(&r[0], &r[1], &r[2]);
    let den = [
        det3(&r[3], &r[1], &r[2]),
        det3(&r[0], &r[3], &r[2]),
        det3(&r[0], &r[1], &r[3]),
    ];
    if base.abs() <= 1e-12 || den.iter().any(|d| d.abs() <= 1e-12) {
        return Err(ProjectiveError::Collinear.into());
    }
    let num = [
        det3(&x, &r[1], &r[2]),
        det3(&r[0], &x, &r[2]),
        det3(&r[0], &r[1], &x),
    ];
    Ok(ProjPoint2 {
        h: [num[0] / den[0], num[1] / den[1], num[2] / den[2]],
    })
}
