//! Flat spacetime kernel.
//!
//! Events live in 1+1, 2+1 or 3+1 Minkowski spacetime with signature
//! (+,-,-,...) and c = 1. Component 0 of every event is coordinate time.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 4;

/// Tolerance for classifying an interval as null, relative to the squared
/// coordinate magnitude of the two events.
pub const EPS_NULL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported spacetime dimension {0}")]
    UnsupportedDimension(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("no sign change in bracket [{lo}, {hi}]: signal never arrives")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("non-timelike worldline sample at parameter {0}")]
    NonTimelike(f64),
    #[error("singular Jacobian: degenerate apex configuration")]
    SingularJacobian,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("cones have no common point on the requested sheet")]
    NoIntersection,
    #[error("ambiguous cone intersection: {0} and {1}")]
    Ambiguous(Event, Event),
    #[error("expected {expected} apexes, got {got}")]
    ApexCount { expected: usize, got: usize },
}

/// A spacetime event in inertial coordinates.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Event {
    dim: usize,
    coords: [f64; MAX_DIM],
}

impl Event {
    pub fn new(coords: &[f64]) -> Result<Self, GeometryError> {
        let dim = coords.len();
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(coords);
        Ok(Event { dim, coords: c })
    }

    /// Builds an event from time and spatial components.
    pub fn from_parts(t: f64, space: &[f64]) -> Result<Self, GeometryError> {
        let mut c = [0.0; MAX_DIM];
        if space.len() + 1 > MAX_DIM {
            return Err(GeometryError::UnsupportedDimension(space.len() + 1));
        }
        c[0] = t;
        c[1..=space.len()].copy_from_slice(space);
        Event::new(&c[..=space.len()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.coords[0]
    }

    pub fn space(&self) -> &[f64] {
        &self.coords[1..self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// Component-wise difference `self - other` as a displacement.
    pub fn minus(&self, other: &Event) -> [f64; MAX_DIM] {
        let mut d = [0.0; MAX_DIM];
        for (i, di) in d.iter_mut().enumerate().take(self.dim) {
            *di = self.coords[i] - other.coords[i];
        }
        d
    }

    /// Translates the event by a displacement.
    pub fn plus(&self, v: &[f64]) -> Event {
        let mut c = self.coords;
        for (ci, vi) in c.iter_mut().zip(v).take(self.dim) {
            *ci += vi;
        }
        Event {
            dim: self.dim,
            coords: c,
        }
    }

    /// Multiplies every coordinate by `k`.
    pub fn scaled(&self, k: f64) -> Event {
        let mut c = self.coords;
        c.iter_mut().for_each(|x| *x *= k);
        Event {
            dim: self.dim,
            coords: c,
        }
    }

    /// Euclidean coordinate distance, used only for tie-breaking and reporting.
    pub fn coord_distance(&self, other: &Event) -> f64 {
        self.minus(other).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn sq_norm(&self) -> f64 {
        self.coords().iter().map(|x| x * x).sum()
    }
}

impl TryFrom<Vec<f64>> for Event {
    type Error = GeometryError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Event::new(&v)
    }
}

impl From<Event> for Vec<f64> {
    fn from(e: Event) -> Self {
        e.coords().to_vec()
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Event{:?}", self.coords())
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Minkowski product of two displacement vectors of length `dim`.
pub fn eta(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] - a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalClass {
    Timelike,
    Null,
    Spacelike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub value: f64,
    pub causal_class: CausalClass,
}

impl Interval {
    /// Classifies `value` with the null band `EPS_NULL * scale`.
    pub fn classify(value: f64, scale: f64) -> Self {
        let causal_class = if value.abs() <= EPS_NULL * scale {
            CausalClass::Null
        } else if value > 0.0 {
            CausalClass::Timelike
        } else {
            CausalClass::Spacelike
        };
        Interval {
            value,
            causal_class,
        }
    }
}

pub fn minkowski(a: &Event, b: &Event) -> Result<Interval, GeometryError> {
    if a.dim != b.dim {
        return Err(GeometryError::DimensionMismatch(a.dim, b.dim));
    }
    let d = a.minus(b);
    let value = eta(&d[..a.dim], &d[..a.dim]);
    let sep: f64 = d.iter().map(|x| x * x).sum();
    let scale = a.sq_norm().max(b.sq_norm()).max(sep);
    Ok(Interval::classify(value, scale))
}

/// A timelike curve parameterized by a real parameter.
pub trait Worldline {
    fn dim(&self) -> usize;
    fn domain(&self) -> (f64, f64);
    /// Event at parameter `s`; callers keep `s` inside [`Worldline::domain`].
    fn point(&self, s: f64) -> Event;
    /// Derivative of [`Worldline::point`] with respect to the parameter.
    fn tangent(&self, s: f64) -> [f64; MAX_DIM];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    /// The worldline point precedes the event.
    Retarded,
    /// The worldline point follows the event.
    Advanced,
}

/// Bracketed root finder for the null condition between an event and a
/// worldline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullSolver {
    pub bisection_tol: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
}

impl Default for NullSolver {
    fn default() -> Self {
        NullSolver {
            bisection_tol: 1e-6,
            newton_tol: 1e-13,
            max_iter: 200,
        }
    }
}

impl NullSolver {
    /// Parameter of the worldline point whose future light cone contains `x`.
    pub fn past<W: Worldline + ?Sized>(
        &self,
        w: &W,
        x: &Event,
        bracket: (f64, f64),
    ) -> Result<f64, GeometryError> {
        self.solve(w, x, bracket, Sense::Retarded)
    }

    /// Parameter of the worldline point on the future light cone of `x`.
    pub fn future<W: Worldline + ?Sized>(
        &self,
        w: &W,
        x: &Event,
        bracket: (f64, f64),
    ) -> Result<f64, GeometryError> {
        self.solve(w, x, bracket, Sense::Advanced)
    }

    fn solve<W: Worldline + ?Sized>(
        &self,
        w: &W,
        x: &Event,
        bracket: (f64, f64),
        sense: Sense,
    ) -> Result<f64, GeometryError> {
        if w.dim() != x.dim() {
            return Err(GeometryError::DimensionMismatch(w.dim(), x.dim()));
        }
        let sigma = match sense {
            Sense::Retarded => 1.0,
            Sense::Advanced => -1.0,
        };
        // f is strictly decreasing along a future-directed timelike worldline.
        let f = |s: f64| -> Result<(f64, f64), GeometryError> {
            let p = w.point(s);
            let v = w.tangent(s);
            let dim = x.dim();
            let speed2: f64 = v[1..dim].iter().map(|c| c * c).sum();
            if !(v[0] > 0.0 && v[0] * v[0] > speed2) {
                return Err(GeometryError::NonTimelike(s));
            }
            let d = x.minus(&p);
            let r = d[1..dim].iter().map(|c| c * c).sum::<f64>().sqrt();
            let val = d[0] - sigma * r;
            let radial = if r > 0.0 {
                -d[1..dim]
                    .iter()
                    .zip(&v[1..dim])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / r
            } else {
                0.0
            };
            Ok((val, -v[0] - sigma * radial))
        };

        let (mut lo, mut hi) = bracket;
        let (flo, _) = f(lo)?;
        let (fhi, _) = f(hi)?;
        if flo == 0.0 {
            return Ok(lo);
        }
        if fhi == 0.0 {
            return Ok(hi);
        }
        if !(flo > 0.0 && fhi < 0.0) {
            return Err(GeometryError::NoSignChange { lo, hi });
        }
        let scale = lo.abs().max(hi.abs());
        let mut iter = 0;
        while hi - lo > self.bisection_tol * scale {
            iter += 1;
            if iter > self.max_iter {
                return Err(GeometryError::NoConvergence(iter));
            }
            let mid = 0.5 * (lo + hi);
            let (fm, _) = f(mid)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if fm > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }

        let mut s = 0.5 * (lo + hi);
        for _ in 0..self.max_iter {
            let (fs, dfs) = f(s)?;
            if fs == 0.0 {
                return Ok(s);
            }
            if fs > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = if dfs < 0.0 { -fs / dfs } else { f64::NAN };
            if newton.abs() <= self.newton_tol * s.abs().max(f64::MIN_POSITIVE) {
                return Ok(s + newton);
            }
            let mut next = s + newton;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == s || lo >= hi {
                return Ok(s);
            }
            s = next;
        }
        Err(GeometryError::NoConvergence(self.max_iter))
    }
}

/// Retarded solve with the default solver settings.
pub fn solve_null_past<W: Worldline + ?Sized>(
    w: &W,
    x: &Event,
    bracket: (f64, f64),
) -> Result<f64, GeometryError> {
    NullSolver::default().past(w, x, bracket)
}

/// Advanced solve with the default solver settings.
pub fn solve_null_future<W: Worldline + ?Sized>(
    w: &W,
    x: &Event,
    bracket: (f64, f64),
) -> Result<f64, GeometryError> {
    NullSolver::default().future(w, x, bracket)
}

/// Which null cone sheet of each apex the sought event lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sheet {
    /// Event precedes every apex.
    Past,
    /// Event follows every apex.
    Future,
}

impl Sheet {
    fn sign(self) -> f64 {
        match self {
            Sheet::Past => 1.0,
            Sheet::Future => -1.0,
        }
    }
}

const CONE_NEWTON_ITERS: usize = 60;
const CONE_RESIDUAL_TOL: f64 = 1e-11;

/// All events lying on the chosen cone sheet of each of the `d` apexes.
///
/// Pairwise differences of the quadratic null conditions give `d - 1` linear
/// equations; the remaining quadratic is solved along their solution line and
/// every admissible root is refined by damped Newton.
pub fn cone_intersections(apexes: &[Event], sheet: Sheet) -> Result<Vec<Event>, GeometryError> {
    let d = apexes.first().map(|a| a.dim()).unwrap_or(0);
    if apexes.len() != d || d < MIN_DIM {
        return Err(GeometryError::ApexCount {
            expected: d.max(MIN_DIM),
            got: apexes.len(),
        });
    }
    if let Some(a) = apexes.iter().find(|a| a.dim() != d) {
        return Err(GeometryError::DimensionMismatch(d, a.dim()));
    }
    let a0 = apexes[0];
    let deltas: Vec<[f64; MAX_DIM]> = apexes.iter().map(|a| a.minus(&a0)).collect();
    let scale = deltas
        .iter()
        .flat_map(|v| v[..d].iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Err(GeometryError::SingularJacobian);
    }

    // Rows 2 eta(delta_i, .) = eta(delta_i, delta_i), padded with a zero row.
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    for i in 1..d {
        let di = &deltas[i][..d];
        a[(i - 1, 0)] = 2.0 * di[0] / scale;
        for k in 1..d {
            a[(i - 1, k)] = -2.0 * di[k] / scale;
        }
        b[i - 1] = eta(di, di) / (scale * scale);
    }
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    if sv[order[1]] <= 1e-12 * smax {
        return Err(GeometryError::SingularJacobian);
    }
    let v_t = svd.v_t.as_ref().ok_or(GeometryError::SingularJacobian)?;
    let n: Vec<f64> = (0..d).map(|k| v_t[(order[0], k)]).collect();
    let fp = svd
        .solve(&b, 1e-12 * smax)
        .map_err(|_| GeometryError::SingularJacobian)?;
    let fp: Vec<f64> = fp.iter().copied().collect();

    let qa = eta(&n, &n);
    let qb = 2.0 * eta(&fp, &n);
    let qc = eta(&fp, &fp);
    let mut mus = Vec::new();
    if qa.abs() <= 1e-12 * (qb.abs() + qc.abs()).max(1e-300) {
        if qb != 0.0 {
            mus.push(-qc / qb);
        }
    } else {
        let mut disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 && disc.abs() <= 1e-10 * (qb * qb).max((4.0 * qa * qc).abs()) {
            disc = 0.0;
        }
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                mus.push(q / qa);
                mus.push(qc / q);
            } else {
                mus.push(0.0);
            }
        }
    }

    let sign = sheet.sign();
    let mut found: Vec<Event> = Vec::new();
    for mu in mus {
        let mut c = [0.0; MAX_DIM];
        for k in 0..d {
            c[k] = a0.coords()[k] + scale * (fp[k] + mu * n[k]);
        }
        let start = Event::new(&c[..d])?;
        let admissible = apexes
            .iter()
            .all(|ap| sign * (ap.time() - start.time()) >= -1e-9 * scale);
        if !admissible {
            continue;
        }
        let e = polish_cone_point(apexes, start, sheet, scale)?;
        if !found.iter().any(|f| f.coord_distance(&e) <= 1e-9 * scale) {
            found.push(e);
        }
    }
    Ok(found)
}

fn cone_residuals(apexes: &[Event], e: &Event, sign: f64) -> Vec<f64> {
    apexes
        .iter()
        .map(|ap| {
            let d = ap.minus(e);
            let r = d[1..e.dim()].iter().map(|x| x * x).sum::<f64>().sqrt();
            sign * d[0] - r
        })
        .collect()
}

fn polish_cone_point(
    apexes: &[Event],
    start: Event,
    sheet: Sheet,
    scale: f64,
) -> Result<Event, GeometryError> {
    let d = start.dim();
    let sign = sheet.sign();
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut e = start;
    let mut res = cone_residuals(apexes, &e, sign);
    for _ in 0..CONE_NEWTON_ITERS {
        let rn = norm(&res);
        if rn <= 1e-15 * scale {
            break;
        }
        let mut j = DMatrix::<f64>::zeros(d, d);
        for (i, ap) in apexes.iter().enumerate() {
            let diff = ap.minus(&e);
            let r = diff[1..d].iter().map(|x| x * x).sum::<f64>().sqrt();
            j[(i, 0)] = -sign;
            if r > 0.0 {
                for k in 1..d {
                    j[(i, k)] = diff[k] / r;
                }
            }
        }
        let rhs = -DVector::from_column_slice(&res);
        let step = match j.lu().solve(&rhs) {
            Some(s) => s,
            None => break,
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = e.plus(&step.iter().map(|x| t * x).collect::<Vec<_>>());
            let cres = cone_residuals(apexes, &cand, sign);
            if norm(&cres) < rn {
                e = cand;
                res = cres;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm(&res) <= CONE_RESIDUAL_TOL * scale.max(1.0) {
        Ok(e)
    } else {
        Err(GeometryError::NoConvergence(CONE_NEWTON_ITERS))
    }
}

/// The unique common point of the chosen sheets, or an error when there is
/// none or two.
pub fn intersect_cones(apexes: &[Event], sheet: Sheet) -> Result<Event, GeometryError> {
    let found = cone_intersections(apexes, sheet)?;
    match found.as_slice() {
        [] => Err(GeometryError::NoIntersection),
        [e] => Ok(*e),
        [a, b, ..] => Err(GeometryError::Ambiguous(*a, *b)),
    }
}

/// Like [`intersect_cones`] but resolves two admissible points by proximity
/// to `hint`.
pub fn intersect_cones_near(
    apexes: &[Event],
    sheet: Sheet,
    hint: &Event,
) -> Result<Event, GeometryError> {
    cone_intersections(apexes, sheet)?
        .into_iter()
        .min_by(|a, b| a.coord_distance(hint).total_cmp(&b.coord_distance(hint)))
        .ok_or(GeometryError::NoIntersection)
}

/// The event lying on the past light cone of every apex.
pub fn intersect_past_cones(apexes: &[Event]) -> Result<Event, GeometryError> {
    intersect_cones(apexes, Sheet::Past)
}
