//! Emitter worldlines, broadcast clocks and the anchoring worldline.
//!
//! Every worldline is parameterized by coordinate time, so `eval(s)` has
//! time component `s`. All catalogue curves move at constant speed and the
//! proper time elapsed since `s = 0` is `s * sqrt(1 - v^2)`.

use crate::geometry::{Event, GeometryError, NullSolver, Worldline, MAX_DIM};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstellationError {
    #[error("invalid worldline: {0}")]
    InvalidWorldline(String),
    #[error("invalid clock: {0}")]
    InvalidClock(String),
    #[error("parameter {s} outside domain [{lo}, {hi}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },
    #[error("stamp {0} outside the clock range")]
    StampOutOfRange(f64),
    #[error("clock inversion did not converge for stamp {0}")]
    Inversion(f64),
    #[error("no message solution: {0}")]
    NoMessage(#[source] GeometryError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub const DEFAULT_DOMAIN: (f64, f64) = (-1.0e3, 1.0e3);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorldlineKind {
    /// `x(t) = start.space + velocity * (t - start.time)`.
    Inertial { start: Event, velocity: Vec<f64> },
    /// Uniform circle in the first two spatial axes; the third spatial axis
    /// (if any) stays at `center[2]`.
    Circular {
        center: Vec<f64>,
        radius: f64,
        angular_rate: f64,
        phase: f64,
    },
    /// Circular motion plus a constant drift along the third spatial axis.
    /// 3+1 only.
    Helical {
        center: [f64; 3],
        radius: f64,
        angular_rate: f64,
        phase: f64,
        vertical_velocity: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawWorldline {
    #[serde(flatten)]
    kind: WorldlineKind,
    #[serde(default = "default_domain")]
    domain: (f64, f64),
}

fn default_domain() -> (f64, f64) {
    DEFAULT_DOMAIN
}

/// A validated timelike worldline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWorldline", into = "RawWorldline")]
pub struct WorldlineSpec {
    kind: WorldlineKind,
    domain: (f64, f64),
    dim: usize,
    speed: f64,
}

impl TryFrom<RawWorldline> for WorldlineSpec {
    type Error = ConstellationError;
    fn try_from(raw: RawWorldline) -> Result<Self, Self::Error> {
        WorldlineSpec::new(raw.kind, raw.domain)
    }
}

impl From<WorldlineSpec> for RawWorldline {
    fn from(w: WorldlineSpec) -> Self {
        RawWorldline {
            kind: w.kind,
            domain: w.domain,
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConstellationError {
    ConstellationError::InvalidWorldline(msg.into())
}

impl WorldlineSpec {
    pub fn new(kind: WorldlineKind, domain: (f64, f64)) -> Result<Self, ConstellationError> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!(
                "domain [{lo}, {hi}] is empty or not finite"
            )));
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let (dim, speed) = match &kind {
            WorldlineKind::Inertial { start, velocity } => {
                if velocity.len() + 1 != start.dim() {
                    return Err(invalid(format!(
                        "velocity has {} components for a {}-dimensional start event",
                        velocity.len(),
                        start.dim()
                    )));
                }
                if !finite(velocity) {
                    return Err(invalid("velocity is not finite"));
                }
                (
                    start.dim(),
                    velocity.iter().map(|v| v * v).sum::<f64>().sqrt(),
                )
            }
            WorldlineKind::Circular {
                center,
                radius,
                angular_rate,
                phase,
            } => {
                if !(center.len() == 2 || center.len() == 3) {
                    return Err(invalid("circular motion needs 2 or 3 spatial dimensions"));
                }
                if !finite(center) || !finite(&[*radius, *angular_rate, *phase]) || *radius < 0.0 {
                    return Err(invalid("circle parameters must be finite with radius >= 0"));
                }
                (center.len() + 1, (radius * angular_rate).abs())
            }
            WorldlineKind::Helical {
                center,
                radius,
                angular_rate,
                phase,
                vertical_velocity,
            } => {
                if !finite(center)
                    || !finite(&[*radius, *angular_rate, *phase, *vertical_velocity])
                    || *radius < 0.0
                {
                    return Err(invalid("helix parameters must be finite with radius >= 0"));
                }
                let v = radius * angular_rate;
                (4, (v * v + vertical_velocity * vertical_velocity).sqrt())
            }
        };
        if speed >= 1.0 {
            return Err(invalid(format!("speed {speed} is not below light speed")));
        }
        Ok(WorldlineSpec {
            kind,
            domain,
            dim,
            speed,
        })
    }

    /// A worldline at rest at `space`.
    pub fn stationary(space: &[f64], domain: (f64, f64)) -> Result<Self, ConstellationError> {
        let start = Event::from_parts(0.0, space)?;
        Self::new(
            WorldlineKind::Inertial {
                start,
                velocity: vec![0.0; space.len()],
            },
            domain,
        )
    }

    pub fn inertial(
        start: Event,
        velocity: &[f64],
        domain: (f64, f64),
    ) -> Result<Self, ConstellationError> {
        Self::new(
            WorldlineKind::Inertial {
                start,
                velocity: velocity.to_vec(),
            },
            domain,
        )
    }

    pub fn kind(&self) -> &WorldlineKind {
        &self.kind
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Proper time per unit coordinate time.
    pub fn proper_rate(&self) -> f64 {
        (1.0 - self.speed * self.speed).sqrt()
    }

    pub fn eval(&self, s: f64) -> Result<Event, ConstellationError> {
        self.check_domain(s)?;
        Ok(self.point(s))
    }

    fn check_domain(&self, s: f64) -> Result<(), ConstellationError> {
        let (lo, hi) = self.domain;
        if s >= lo && s <= hi {
            Ok(())
        } else {
            Err(ConstellationError::OutOfDomain { s, lo, hi })
        }
    }

    /// Spatial velocity at parameter `s`.
    pub fn velocity(&self, s: f64) -> Vec<f64> {
        self.tangent(s)[1..self.dim].to_vec()
    }

    /// Samples `n` tangents uniformly over the domain and confirms each is
    /// future-directed timelike.
    pub fn check_timelike(&self, n: usize) -> Result<(), ConstellationError> {
        let (lo, hi) = self.domain;
        for i in 0..n {
            let s = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
            let v = self.tangent(s);
            let sp: f64 = v[1..self.dim].iter().map(|x| x * x).sum();
            if !(v[0] > 0.0 && v[0] * v[0] > sp) {
                return Err(ConstellationError::Geometry(GeometryError::NonTimelike(s)));
            }
        }
        Ok(())
    }

    /// The same curve after the global dilation `x -> k x`.
    pub fn scaled(&self, k: f64) -> Result<Self, ConstellationError> {
        let kind = match &self.kind {
            WorldlineKind::Inertial { start, velocity } => WorldlineKind::Inertial {
                start: start.scaled(k),
                velocity: velocity.clone(),
            },
            WorldlineKind::Circular {
                center,
                radius,
                angular_rate,
                phase,
            } => WorldlineKind::Circular {
                center: center.iter().map(|c| c * k).collect(),
                radius: radius * k,
                angular_rate: angular_rate / k,
                phase: *phase,
            },
            WorldlineKind::Helical {
                center,
                radius,
                angular_rate,
                phase,
                vertical_velocity,
            } => WorldlineKind::Helical {
                center: center.map(|c| c * k),
                radius: radius * k,
                angular_rate: angular_rate / k,
                phase: *phase,
                vertical_velocity: *vertical_velocity,
            },
        };
        Self::new(kind, (self.domain.0 * k, self.domain.1 * k))
    }
}

impl Worldline for WorldlineSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn point(&self, s: f64) -> Event {
        let mut c = [0.0; MAX_DIM];
        c[0] = s;
        match &self.kind {
            WorldlineKind::Inertial { start, velocity } => {
                let dt = s - start.time();
                for (i, v) in velocity.iter().enumerate() {
                    c[i + 1] = start.space()[i] + v * dt;
                }
            }
            WorldlineKind::Circular {
                center,
                radius,
                angular_rate,
                phase,
            } => {
                let a = angular_rate * s + phase;
                c[1] = center[0] + radius * a.cos();
                c[2] = center[1] + radius * a.sin();
                if center.len() == 3 {
                    c[3] = center[2];
                }
            }
            WorldlineKind::Helical {
                center,
                radius,
                angular_rate,
                phase,
                vertical_velocity,
            } => {
                let a = angular_rate * s + phase;
                c[1] = center[0] + radius * a.cos();
                c[2] = center[1] + radius * a.sin();
                c[3] = center[2] + vertical_velocity * s;
            }
        }
        Event::new(&c[..self.dim]).expect("finite worldline point")
    }

    fn tangent(&self, s: f64) -> [f64; MAX_DIM] {
        let mut v = [0.0; MAX_DIM];
        v[0] = 1.0;
        match &self.kind {
            WorldlineKind::Inertial { velocity, .. } => {
                v[1..=velocity.len()].copy_from_slice(velocity);
            }
            WorldlineKind::Circular {
                radius,
                angular_rate,
                phase,
                ..
            } => {
                let a = angular_rate * s + phase;
                v[1] = -radius * angular_rate * a.sin();
                v[2] = radius * angular_rate * a.cos();
            }
            WorldlineKind::Helical {
                radius,
                angular_rate,
                phase,
                vertical_velocity,
                ..
            } => {
                let a = angular_rate * s + phase;
                v[1] = -radius * angular_rate * a.sin();
                v[2] = radius * angular_rate * a.cos();
                v[3] = *vertical_velocity;
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClockBase {
    /// Proper time since parameter 0.
    ProperTime,
    /// The worldline parameter itself.
    #[serde(alias = "affine")]
    Parameter,
    /// `s + amplitude * sin(s / length)`, monotone for `|amplitude| < length`.
    Wobble { amplitude: f64, length: f64 },
}

fn one() -> f64 {
    1.0
}

/// A strictly increasing time-stamp generator: `rate * base(s) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    #[serde(flatten)]
    pub base: ClockBase,
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default)]
    pub offset: f64,
}

impl Default for Clock {
    fn default() -> Self {
        Clock::proper_time()
    }
}

impl Clock {
    pub fn proper_time() -> Self {
        Clock {
            base: ClockBase::ProperTime,
            rate: 1.0,
            offset: 0.0,
        }
    }

    /// `rate * s + offset` on the worldline parameter.
    pub fn affine(rate: f64, offset: f64) -> Self {
        Clock {
            base: ClockBase::Parameter,
            rate,
            offset,
        }
    }

    pub fn wobble(amplitude: f64, length: f64) -> Self {
        Clock {
            base: ClockBase::Wobble { amplitude, length },
            rate: 1.0,
            offset: 0.0,
        }
    }

    /// `affine(rate, offset) ∘ self`.
    pub fn then_affine(&self, rate: f64, offset: f64) -> Self {
        Clock {
            base: self.base,
            rate: self.rate * rate,
            offset: rate * self.offset + offset,
        }
    }

    /// The clock matching a scenario dilated by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let base = match self.base {
            ClockBase::Wobble { amplitude, length } => ClockBase::Wobble {
                amplitude: amplitude * k,
                length: length * k,
            },
            b => b,
        };
        Clock {
            base,
            rate: self.rate,
            offset: self.offset * k,
        }
    }

    pub fn validate(&self) -> Result<(), ConstellationError> {
        if !(self.rate.is_finite() && self.rate > 0.0 && self.offset.is_finite()) {
            return Err(ConstellationError::InvalidClock(format!(
                "rate {} must be positive and offset {} finite",
                self.rate, self.offset
            )));
        }
        if let ClockBase::Wobble { amplitude, length } = self.base {
            if !(length > 0.0 && amplitude.is_finite() && amplitude.abs() < length) {
                return Err(ConstellationError::InvalidClock(format!(
                    "wobble needs |amplitude| < length, got {amplitude} and {length}"
                )));
            }
        }
        Ok(())
    }

    fn base(&self, s: f64, proper_rate: f64) -> f64 {
        match self.base {
            ClockBase::ProperTime => proper_rate * s,
            ClockBase::Parameter => s,
            ClockBase::Wobble { amplitude, length } => s + amplitude * (s / length).sin(),
        }
    }

    fn base_rate(&self, s: f64, proper_rate: f64) -> f64 {
        match self.base {
            ClockBase::ProperTime => proper_rate,
            ClockBase::Parameter => 1.0,
            ClockBase::Wobble { amplitude, length } => {
                1.0 + amplitude / length * (s / length).cos()
            }
        }
    }

    pub fn stamp(&self, s: f64, proper_rate: f64) -> f64 {
        self.rate * self.base(s, proper_rate) + self.offset
    }

    /// d(stamp)/ds.
    pub fn stamp_rate(&self, s: f64, proper_rate: f64) -> f64 {
        self.rate * self.base_rate(s, proper_rate)
    }

    pub fn unstamp(&self, tau: f64, proper_rate: f64) -> Result<f64, ConstellationError> {
        let u = (tau - self.offset) / self.rate;
        match self.base {
            ClockBase::ProperTime => Ok(u / proper_rate),
            ClockBase::Parameter => Ok(u),
            ClockBase::Wobble { amplitude, length } => {
                let (mut lo, mut hi) = (u - amplitude.abs(), u + amplitude.abs());
                let mut s = u;
                for _ in 0..100 {
                    let f = s + amplitude * (s / length).sin() - u;
                    if f == 0.0 {
                        return Ok(s);
                    }
                    if f < 0.0 {
                        lo = s;
                    } else {
                        hi = s;
                    }
                    let df = 1.0 + amplitude / length * (s / length).cos();
                    let mut next = s - f / df;
                    if !(next >= lo && next <= hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - s).abs() <= 1e-15 * s.abs().max(length) {
                        return Ok(next);
                    }
                    s = next;
                }
                Err(ConstellationError::Inversion(tau))
            }
        }
    }
}

/// A broadcasting satellite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub id: String,
    pub worldline: WorldlineSpec,
    #[serde(default)]
    pub clock: Clock,
}

impl Emitter {
    pub fn new(
        id: impl Into<String>,
        worldline: WorldlineSpec,
        clock: Clock,
    ) -> Result<Self, ConstellationError> {
        clock.validate()?;
        Ok(Emitter {
            id: id.into(),
            worldline,
            clock,
        })
    }

    pub fn dim(&self) -> usize {
        self.worldline.dim()
    }

    pub fn stamp(&self, s: f64) -> Result<f64, ConstellationError> {
        self.worldline.check_domain(s)?;
        Ok(self.clock.stamp(s, self.worldline.proper_rate()))
    }

    pub fn unstamp(&self, tau: f64) -> Result<f64, ConstellationError> {
        let s = self.clock.unstamp(tau, self.worldline.proper_rate())?;
        if self.worldline.check_domain(s).is_err() {
            return Err(ConstellationError::StampOutOfRange(tau));
        }
        Ok(s)
    }

    /// Emission event carrying stamp `tau`.
    pub fn event_of_stamp(&self, tau: f64) -> Result<Event, ConstellationError> {
        self.worldline.eval(self.unstamp(tau)?)
    }

    pub fn scaled(&self, k: f64) -> Result<Self, ConstellationError> {
        Emitter::new(
            self.id.clone(),
            self.worldline.scaled(k)?,
            self.clock.scaled(k),
        )
    }
}

/// Whether the fifth stamp is the one emitted toward the event or the one
/// received from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageSense {
    #[default]
    Emission,
    Reception,
}

/// The localizing satellite's worldline, extended before its origin `o` by
/// an inertial continuation with the velocity at `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchoringWorldline {
    pub emitter: Emitter,
    pub origin: f64,
    pub prolongation: WorldlineSpec,
    pub sense: MessageSense,
}

/// Result of the message function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnchorReading {
    pub stamp: f64,
    pub parameter: f64,
    pub on_prolongation: bool,
}

impl AnchoringWorldline {
    /// `span` is how far (in parameter) the prolongation reaches before `o`.
    pub fn new(
        emitter: Emitter,
        origin: f64,
        span: f64,
        sense: MessageSense,
    ) -> Result<Self, ConstellationError> {
        let w = &emitter.worldline;
        let o = w.eval(origin)?;
        if !(span > 0.0 && span.is_finite()) {
            return Err(invalid("prolongation span must be positive"));
        }
        let prolongation =
            WorldlineSpec::inertial(o, &w.velocity(origin), (origin - span, origin))?;
        Ok(AnchoringWorldline {
            emitter,
            origin,
            prolongation,
            sense,
        })
    }

    pub fn origin_event(&self) -> Event {
        self.emitter.worldline.point(self.origin)
    }

    /// Stamp at parameter `s`, continued linearly before the origin.
    pub fn stamp(&self, s: f64) -> Result<f64, ConstellationError> {
        if s >= self.origin {
            return self.emitter.stamp(s);
        }
        let (lo, _) = self.prolongation.domain();
        if s < lo {
            return Err(ConstellationError::OutOfDomain {
                s,
                lo,
                hi: self.origin,
            });
        }
        let pr = self.emitter.worldline.proper_rate();
        let rate = self.emitter.clock.stamp_rate(self.origin, pr);
        Ok(self.emitter.stamp(self.origin)? + rate * (s - self.origin))
    }

    /// The fifth coordinate of `e`.
    pub fn message_coordinate(&self, e: &Event) -> Result<AnchorReading, ConstellationError> {
        let bracket = self.domain();
        let solver = NullSolver::default();
        let s = match self.sense {
            MessageSense::Emission => solver.past(self, e, bracket),
            MessageSense::Reception => solver.future(self, e, bracket),
        }
        .map_err(ConstellationError::NoMessage)?;
        Ok(AnchorReading {
            stamp: self.stamp(s)?,
            parameter: s,
            on_prolongation: s < self.origin,
        })
    }

    pub fn scaled(&self, k: f64) -> Result<Self, ConstellationError> {
        let span = self.origin - self.prolongation.domain().0;
        AnchoringWorldline::new(
            self.emitter.scaled(k)?,
            self.origin * k,
            span * k,
            self.sense,
        )
    }
}

impl Worldline for AnchoringWorldline {
    fn dim(&self) -> usize {
        self.emitter.dim()
    }

    fn domain(&self) -> (f64, f64) {
        (
            self.prolongation.domain().0,
            self.emitter.worldline.domain().1,
        )
    }

    fn point(&self, s: f64) -> Event {
        if s >= self.origin {
            self.emitter.worldline.point(s)
        } else {
            self.prolongation.point(s)
        }
    }

    fn tangent(&self, s: f64) -> [f64; MAX_DIM] {
        if s >= self.origin {
            self.emitter.worldline.tangent(s)
        } else {
            self.prolongation.tangent(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::minkowski;

    fn ev(c: &[f64]) -> Event {
        Event::new(c).unwrap()
    }

    #[test]
    fn eval_examples() {
        let w = WorldlineSpec::stationary(&[0.0, 0.0], DEFAULT_DOMAIN).unwrap();
        assert_eq!(w.eval(5.0).unwrap(), ev(&[5.0, 0.0, 0.0]));
        let c = WorldlineSpec::new(
            WorldlineKind::Circular {
                center: vec![0.0, 0.0],
                radius: 1.0,
                angular_rate: 0.3,
                phase: 0.0,
            },
            DEFAULT_DOMAIN,
        )
        .unwrap();
        assert_eq!(c.eval(0.0).unwrap(), ev(&[0.0, 1.0, 0.0]));
        assert!(w.eval(2.0e3).is_err());
    }

    #[test]
    fn helix_point_matches_parametric_formula() {
        let h = WorldlineSpec::new(
            WorldlineKind::Helical {
                center: [1.0, -2.0, 0.5],
                radius: 2.0,
                angular_rate: 0.25,
                phase: 0.1,
                vertical_velocity: 0.3,
            },
            DEFAULT_DOMAIN,
        )
        .unwrap();
        let p = h.eval(2.0).unwrap();
        let a: f64 = 0.25 * 2.0 + 0.1;
        let want = [2.0, 1.0 + 2.0 * a.cos(), -2.0 + 2.0 * a.sin(), 0.5 + 0.6];
        for (x, y) in p.coords().iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        h.check_timelike(1000).unwrap();
    }

    #[test]
    fn rejects_superluminal_specs() {
        let start = ev(&[0.0, 0.0, 0.0]);
        assert!(WorldlineSpec::inertial(start, &[0.8, 0.7], DEFAULT_DOMAIN).is_err());
        assert!(WorldlineSpec::new(
            WorldlineKind::Circular {
                center: vec![0.0, 0.0],
                radius: 5.0,
                angular_rate: 0.3,
                phase: 0.0
            },
            DEFAULT_DOMAIN
        )
        .is_err());
        assert!(WorldlineSpec::inertial(start, &[0.1], DEFAULT_DOMAIN).is_err());
    }

    #[test]
    fn clock_examples() {
        let w = WorldlineSpec::stationary(&[0.0, 0.0], DEFAULT_DOMAIN).unwrap();
        let e = Emitter::new("a", w.clone(), Clock::proper_time()).unwrap();
        assert_eq!(e.stamp(3.5).unwrap(), 3.5);
        let e = Emitter::new("b", w.clone(), Clock::affine(2.0, 1.0)).unwrap();
        assert_eq!(e.stamp(3.0).unwrap(), 7.0);
        let e = Emitter::new("c", w, Clock::wobble(0.1, 1.0)).unwrap();
        let tau = e.stamp(3.0).unwrap();
        assert!((tau - (3.0 + 0.1 * 3f64.sin())).abs() < 1e-15);
        assert!((e.unstamp(tau).unwrap() - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn clock_rejects_non_monotone() {
        assert!(Clock::wobble(2.0, 1.0).validate().is_err());
        assert!(Clock::affine(-1.0, 0.0).validate().is_err());
    }

    #[test]
    fn affine_composition_scales_differences() {
        let w =
            WorldlineSpec::inertial(ev(&[0.0, 1.0, 2.0]), &[0.3, -0.2], DEFAULT_DOMAIN).unwrap();
        let c = Clock::wobble(0.2, 0.7);
        let a = Emitter::new("a", w.clone(), c).unwrap();
        let b = Emitter::new("b", w, c.then_affine(4.0, -3.0)).unwrap();
        let (s1, s2) = (1.25, 7.5);
        let da = a.stamp(s2).unwrap() - a.stamp(s1).unwrap();
        let db = b.stamp(s2).unwrap() - b.stamp(s1).unwrap();
        assert!((db - 4.0 * da).abs() <= 1e-12 * db.abs());
        assert!((b.unstamp(b.stamp(s1).unwrap()).unwrap() - s1).abs() <= 1e-12);
    }

    #[test]
    fn proper_time_rate_of_moving_emitter() {
        let w = WorldlineSpec::inertial(ev(&[0.0, 0.0, 0.0]), &[0.6, 0.0], DEFAULT_DOMAIN).unwrap();
        let e = Emitter::new("m", w, Clock::proper_time()).unwrap();
        assert!((e.stamp(10.0).unwrap() - 8.0).abs() < 1e-12);
    }

    fn anchor(origin: f64) -> AnchoringWorldline {
        let w =
            WorldlineSpec::inertial(ev(&[0.0, 2.0, -1.0]), &[0.1, 0.2], (-50.0, 100.0)).unwrap();
        let e = Emitter::new("S", w, Clock::affine(1.5, 2.0)).unwrap();
        AnchoringWorldline::new(e, origin, 200.0, MessageSense::Emission).unwrap()
    }

    #[test]
    fn message_coordinate_of_forward_seeded_event() {
        let a = anchor(0.0);
        let src = a.emitter.worldline.eval(4.0).unwrap();
        let e = src.plus(&[5.0, 3.0, 4.0]);
        let r = a.message_coordinate(&e).unwrap();
        assert!((r.stamp - a.emitter.stamp(4.0).unwrap()).abs() < 1e-12);
        assert!(!r.on_prolongation);
    }

    #[test]
    fn message_coordinate_on_worldline() {
        let a = anchor(0.0);
        let e = a.emitter.worldline.eval(9.0).unwrap();
        let r = a.message_coordinate(&e).unwrap();
        assert!((r.stamp - a.emitter.stamp(9.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pre_origin_event_uses_prolongation() {
        let a = anchor(20.0);
        let src = a.prolongation.eval(-30.0).unwrap();
        let e = src.plus(&[13.0, 5.0, 12.0]);
        let r = a.message_coordinate(&e).unwrap();
        assert!(r.on_prolongation);
        assert!((r.parameter + 30.0).abs() < 1e-11);
        let want = a.emitter.stamp(20.0).unwrap() + 1.5 * (-50.0);
        assert!((r.stamp - want).abs() < 1e-10);
        assert!(minkowski(&e, &a.point(r.parameter)).unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn message_coordinate_is_monotone_along_timelike_probe() {
        let a = anchor(0.0);
        let mut last = f64::NEG_INFINITY;
        for i in 0..200 {
            let t = i as f64 * 0.1;
            let e = ev(&[t, 8.0 + 0.5 * t * 0.3, -3.0]);
            let r = a.message_coordinate(&e).unwrap();
            assert!(r.stamp > last);
            last = r.stamp;
        }
    }
}
