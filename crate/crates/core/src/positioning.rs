//! Emission coordinates and the echo data collected at each station.
//!
//! A station is the reception event of `e`'s light on one emitter. At the
//! station the neighbouring emitters' signals (and the localizing emitter's)
//! are seen as bright points whose emission positions are rebroadcast.

use crate::constellation::{
    AnchorReading, AnchoringWorldline, ConstellationError, Emitter, WorldlineSpec,
};
use crate::geometry::{cone_intersections, Event, GeometryError, NullSolver, Sheet, Worldline};
use crate::observation::{
    chart_reading, incoming_direction, normalize_reading_rp1, normalize_reading_rp2, tetrad_at,
    Direction, HemisphereReading, ObservationError, Orientation,
};
use crate::projective::{ProjPoint1, ProjPoint2};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PositioningError {
    #[error("light path {edge}: {source}")]
    Edge { edge: String, source: GeometryError },
    #[error("observation at {station}: {source}")]
    Observation {
        station: String,
        source: ObservationError,
    },
    #[error(transparent)]
    Constellation(#[from] ConstellationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("expected {expected} emitters, got {got}")]
    EmitterCount { expected: usize, got: usize },
    #[error("emitter {id} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate emitter id {0}")]
    DuplicateId(String),
    #[error("the constellation has no localizing emitter")]
    MissingLocalizer,
    #[error("need {expected} orientations, got {got}")]
    OrientationCount { expected: usize, got: usize },
    #[error("emission position {0:?} is not attainable")]
    Unattainable(Vec<f64>),
    #[error("emission position {0:?} has two preimages; supply a hint")]
    Ambiguous(Vec<f64>),
    #[error("invalid attribution table: {0}")]
    Attribution(String),
}

/// The stamps `(τ, τ̃, τ̂[, τ̄])` received at an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionPosition {
    pub stamps: Vec<f64>,
}

impl EmissionPosition {
    pub fn new(stamps: Vec<f64>) -> Self {
        EmissionPosition { stamps }
    }

    pub fn dim(&self) -> usize {
        self.stamps.len()
    }

    pub fn max_abs_diff(&self, other: &EmissionPosition) -> f64 {
        self.stamps
            .iter()
            .zip(&other.stamps)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The emitters broadcasting emission coordinates, the localizing emitter
/// and an optional user worldline.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub emitters: Vec<Emitter>,
    pub localizer: Option<AnchoringWorldline>,
    pub user: Option<WorldlineSpec>,
    pub solver: NullSolver,
}

impl Constellation {
    pub fn with_solver(mut self, solver: NullSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn emission(&self, x: &Event) -> Result<EmissionPosition, PositioningError> {
        emission_coordinates_with(&self.solver, &self.emitters, x)
    }

    pub fn new(
        emitters: Vec<Emitter>,
        localizer: Option<AnchoringWorldline>,
        user: Option<WorldlineSpec>,
    ) -> Result<Self, PositioningError> {
        let d = emitters.first().map(Emitter::dim).unwrap_or(0);
        if emitters.len() != d || d < 2 {
            return Err(PositioningError::EmitterCount {
                expected: d.max(2),
                got: emitters.len(),
            });
        }
        let mut ids = HashSet::new();
        let extra = localizer.iter().map(|a| (&a.emitter.id, a.emitter.dim()));
        for (id, dim) in emitters.iter().map(|e| (&e.id, e.dim())).chain(extra) {
            if dim != d {
                return Err(PositioningError::DimensionMismatch {
                    id: id.clone(),
                    expected: d,
                    got: dim,
                });
            }
            if !ids.insert(id.clone()) {
                return Err(PositioningError::DuplicateId(id.clone()));
            }
        }
        if let Some(u) = &user {
            if u.dim() != d {
                return Err(PositioningError::DimensionMismatch {
                    id: "user".into(),
                    expected: d,
                    got: u.dim(),
                });
            }
        }
        Ok(Constellation {
            emitters,
            localizer,
            user,
            solver: NullSolver::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.emitters[0].dim()
    }

    fn localizer(&self) -> Result<&AnchoringWorldline, PositioningError> {
        self.localizer
            .as_ref()
            .ok_or(PositioningError::MissingLocalizer)
    }

    /// The same constellation after the dilation `x -> k x`.
    pub fn scaled(&self, k: f64) -> Result<Self, PositioningError> {
        let emitters = self
            .emitters
            .iter()
            .map(|e| e.scaled(k))
            .collect::<Result<Vec<_>, _>>()?;
        let localizer = self.localizer.as_ref().map(|a| a.scaled(k)).transpose()?;
        let user = self.user.as_ref().map(|u| u.scaled(k)).transpose()?;
        Constellation::new(emitters, localizer, user)
    }
}

fn edge(label: String) -> impl FnOnce(GeometryError) -> PositioningError {
    move |source| PositioningError::Edge {
        edge: label,
        source,
    }
}

/// Parameter of the event on `w` whose light reaches `x`.
fn retarded<W: Worldline + ?Sized>(
    solver: &NullSolver,
    w: &W,
    x: &Event,
    label: String,
) -> Result<f64, PositioningError> {
    solver.past(w, x, w.domain()).map_err(edge(label))
}

/// Parameter of the event on `w` reached by light from `x`.
fn advanced<W: Worldline + ?Sized>(
    solver: &NullSolver,
    w: &W,
    x: &Event,
    label: String,
) -> Result<f64, PositioningError> {
    solver.future(w, x, w.domain()).map_err(edge(label))
}

pub fn emission_coordinates(
    emitters: &[Emitter],
    x: &Event,
) -> Result<EmissionPosition, PositioningError> {
    emission_coordinates_with(&NullSolver::default(), emitters, x)
}

pub fn emission_coordinates_with(
    solver: &NullSolver,
    emitters: &[Emitter],
    x: &Event,
) -> Result<EmissionPosition, PositioningError> {
    let stamps = emitters
        .iter()
        .map(|em| {
            if em.dim() != x.dim() {
                return Err(PositioningError::DimensionMismatch {
                    id: em.id.clone(),
                    expected: x.dim(),
                    got: em.dim(),
                });
            }
            let s = retarded(solver, &em.worldline, x, format!("W[{}] -> {x}", em.id))?;
            Ok(em.stamp(s)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmissionPosition { stamps })
}

/// The event whose emission coordinates are `p`.
///
/// In 2+1 and 3+1 a position can have two preimages; `hint` picks the
/// nearer one, otherwise an ambiguity error is returned.
pub fn cartesian_of_emission(
    emitters: &[Emitter],
    p: &EmissionPosition,
    hint: Option<&Event>,
) -> Result<Event, PositioningError> {
    if p.dim() != emitters.len() {
        return Err(PositioningError::EmitterCount {
            expected: p.dim(),
            got: emitters.len(),
        });
    }
    let sources = emitters
        .iter()
        .zip(&p.stamps)
        .map(|(em, tau)| em.event_of_stamp(*tau))
        .collect::<Result<Vec<_>, _>>()?;
    let candidates = match cone_intersections(&sources, Sheet::Future) {
        Ok(c) => c,
        Err(GeometryError::SingularJacobian) => {
            return Err(PositioningError::Unattainable(p.stamps.clone()))
        }
        Err(e) => return Err(e.into()),
    };
    let scale = p.stamps.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut valid: Vec<Event> = candidates
        .into_iter()
        .filter(|e| {
            emission_coordinates(emitters, e)
                .map(|q| q.max_abs_diff(p) <= 1e-10 * scale)
                .unwrap_or(false)
        })
        .collect();
    match (valid.len(), hint) {
        (0, _) => Err(PositioningError::Unattainable(p.stamps.clone())),
        (1, _) => Ok(valid.remove(0)),
        (_, Some(h)) => Ok(valid
            .into_iter()
            .min_by(|a, b| a.coord_distance(h).total_cmp(&b.coord_distance(h)))
            .expect("non-empty")),
        (_, None) => Err(PositioningError::Ambiguous(p.stamps.clone())),
    }
}

/// Re-expresses an emission position of `from` in the grid of `to`.
pub fn grid_change(
    from: &[Emitter],
    to: &[Emitter],
    p: &EmissionPosition,
    hint: Option<&Event>,
) -> Result<EmissionPosition, PositioningError> {
    let e = cartesian_of_emission(from, p, hint)?;
    emission_coordinates(to, &e)
}

/// A time stamp with a human-readable provenance label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStamp {
    pub label: String,
    pub value: f64,
}

/// All stamps collected for one localized event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub signature: String,
    pub stamps: Vec<LabeledStamp>,
}

/// Stamps broadcast by one station in 2+1: its own stamp, the positions of
/// the two neighbour bright points and the localizing emitter's stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoRecord3D {
    pub emitter_id: String,
    pub station: usize,
    pub primary_stamp: f64,
    /// Positions of the next and the next-but-one emitters' bright points.
    pub neighbor_positions: [EmissionPosition; 2],
    pub fifth_stamp: Option<f64>,
    pub signature: String,
}

impl EchoRecord3D {
    /// Stamps for readings `0`, `∞`, `1`: the station's own coordinate of the
    /// two neighbour positions, then the fifth stamp.
    pub fn frame_targets(&self) -> Option<(f64, f64, f64)> {
        let i = self.station;
        Some((
            self.neighbor_positions[0].stamps[i],
            self.neighbor_positions[1].stamps[i],
            self.fifth_stamp?,
        ))
    }
}

/// Simulation-side geometry behind one station's record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationGeometry {
    pub reception: Event,
    pub reception_position: EmissionPosition,
    /// Emission events of the reference bright points, in record order.
    pub references: Vec<Event>,
    pub fifth_source: Event,
    pub fifth: AnchorReading,
}

/// One station of the 2+1 protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Station3D {
    pub record: EchoRecord3D,
    pub geometry: StationGeometry,
    /// Directions toward `e`, the two neighbours and the localizing emitter.
    pub directions: [Direction; 4],
    pub raw: HemisphereReading,
    pub normalized: ProjPoint1,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoBundle3D {
    pub event: Event,
    pub stations: [Station3D; 3],
    pub anchor: AnchorReading,
    /// User reception event and its emission position, when a user worldline
    /// is configured.
    pub user: Option<(Event, EmissionPosition)>,
}

impl EchoBundle3D {
    pub fn records(&self) -> [EchoRecord3D; 3] {
        self.stations.clone().map(|s| s.record)
    }

    pub fn data_point(&self) -> DataPoint {
        let mut stamps = Vec::new();
        for s in &self.stations {
            let r = &s.record;
            let id = &r.emitter_id;
            stamps.push(LabeledStamp {
                label: format!("{id}.primary"),
                value: r.primary_stamp,
            });
            for (k, name) in ["next", "next_next"].iter().enumerate() {
                for (j, v) in r.neighbor_positions[k].stamps.iter().enumerate() {
                    stamps.push(LabeledStamp {
                        label: format!("{id}.{name}[{j}]"),
                        value: *v,
                    });
                }
            }
            if let Some(f) = r.fifth_stamp {
                stamps.push(LabeledStamp {
                    label: format!("{id}.fifth"),
                    value: f,
                });
            }
        }
        DataPoint {
            signature: self.stations[0].record.signature.clone(),
            stamps,
        }
    }
}

struct Station<'a> {
    emitter: &'a Emitter,
    s: f64,
    event: Event,
}

fn reception<'a>(
    c: &'a Constellation,
    i: usize,
    e: &Event,
) -> Result<Station<'a>, PositioningError> {
    let em = &c.emitters[i];
    let s = advanced(&c.solver, &em.worldline, e, format!("{e} -> W[{}]", em.id))?;
    Ok(Station {
        emitter: em,
        s,
        event: em.worldline.point(s),
    })
}

fn reference(
    c: &Constellation,
    j: usize,
    station: &Station,
) -> Result<(Event, EmissionPosition), PositioningError> {
    let em = &c.emitters[j];
    let label = format!("W[{}] -> station {}", em.id, station.emitter.id);
    let s = retarded(&c.solver, &em.worldline, &station.event, label)?;
    let ev = em.worldline.point(s);
    Ok((ev, c.emission(&ev)?))
}

fn fifth(
    c: &Constellation,
    a: &AnchoringWorldline,
    station: &Station,
) -> Result<(Event, AnchorReading), PositioningError> {
    let label = format!("W[{}] -> station {}", a.emitter.id, station.emitter.id);
    let s = retarded(&c.solver, a, &station.event, label)?;
    let reading = AnchorReading {
        stamp: a.stamp(s)?,
        parameter: s,
        on_prolongation: s < a.origin,
    };
    Ok((a.point(s), reading))
}

fn observe(
    station: &Station,
    orientation: &Orientation,
    e: &Event,
    sources: &[Event],
) -> Result<(Direction, Vec<Direction>), PositioningError> {
    let wrap = |source| PositioningError::Observation {
        station: station.emitter.id.clone(),
        source,
    };
    let t = tetrad_at(&station.emitter.worldline, station.s, orientation).map_err(wrap)?;
    let de = incoming_direction(&t, e).map_err(wrap)?;
    let refs = sources
        .iter()
        .map(|s| incoming_direction(&t, s).map_err(wrap))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((de, refs))
}

fn user_reception(
    c: &Constellation,
    stations: &[Event],
) -> Result<Option<(Event, EmissionPosition)>, PositioningError> {
    let Some(u) = &c.user else { return Ok(None) };
    let mut latest = f64::NEG_INFINITY;
    for st in stations {
        latest = latest.max(advanced(&c.solver, u, st, format!("station {st} -> user"))?);
    }
    let ev = u.point(latest);
    Ok(Some((ev, c.emission(&ev)?)))
}

/// Simulates the 2+1 echo system for `e`.
pub fn assemble_echo_3d(
    c: &Constellation,
    e: &Event,
    orientations: &[Orientation],
    signature: &str,
) -> Result<EchoBundle3D, PositioningError> {
    if c.dim() != 3 {
        return Err(PositioningError::EmitterCount {
            expected: 3,
            got: c.emitters.len(),
        });
    }
    if orientations.len() != 3 {
        return Err(PositioningError::OrientationCount {
            expected: 3,
            got: orientations.len(),
        });
    }
    let a = c.localizer()?;
    let anchor = a.message_coordinate(e)?;
    let mut out = Vec::with_capacity(3);
    for i in 0..3 {
        let st = reception(c, i, e)?;
        let (r_next, p_next) = reference(c, (i + 1) % 3, &st)?;
        let (r_nn, p_nn) = reference(c, (i + 2) % 3, &st)?;
        let (src5, reading5) = fifth(c, a, &st)?;
        let (de, refs) = observe(&st, &orientations[i], e, &[r_next, r_nn, src5])?;
        let normalized =
            normalize_reading_rp1(&de, [&refs[0], &refs[1], &refs[2]]).map_err(|source| {
                PositioningError::Observation {
                    station: st.emitter.id.clone(),
                    source,
                }
            })?;
        let record = EchoRecord3D {
            emitter_id: st.emitter.id.clone(),
            station: i,
            primary_stamp: st.emitter.stamp(st.s)?,
            neighbor_positions: [p_next, p_nn],
            fifth_stamp: Some(reading5.stamp),
            signature: signature.to_string(),
        };
        let geometry = StationGeometry {
            reception: st.event,
            reception_position: c.emission(&st.event)?,
            references: vec![r_next, r_nn],
            fifth_source: src5,
            fifth: reading5,
        };
        out.push(Station3D {
            record,
            geometry,
            directions: [de, refs[0], refs[1], refs[2]],
            raw: chart_reading(&de),
            normalized,
        });
    }
    let receptions: Vec<Event> = out.iter().map(|s| s.geometry.reception).collect();
    let user = user_reception(c, &receptions)?;
    let stations: [Station3D; 3] = out.try_into().expect("three stations");
    Ok(EchoBundle3D {
        event: *e,
        stations,
        anchor,
        user,
    })
}

/// One row of the 3+1 attribution table: which emitters' bright points play
/// the roles of `[1:0:0]`, `[0:1:0]`, `[0:0:1]` at this station, and which
/// pair of coordinates the station reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationAttribution {
    pub refs: [usize; 3],
    pub pair: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionTable {
    pub rows: [StationAttribution; 4],
}

impl Default for AttributionTable {
    fn default() -> Self {
        AttributionTable {
            rows: [
                StationAttribution {
                    refs: [1, 2, 3],
                    pair: [0, 1],
                },
                StationAttribution {
                    refs: [0, 3, 2],
                    pair: [1, 2],
                },
                StationAttribution {
                    refs: [3, 0, 1],
                    pair: [2, 3],
                },
                StationAttribution {
                    refs: [2, 1, 0],
                    pair: [3, 0],
                },
            ],
        }
    }
}

impl AttributionTable {
    /// The cycle run backwards: station i reconstructs `(i, i-1)`.
    pub fn reversed() -> Self {
        AttributionTable {
            rows: [
                StationAttribution {
                    refs: [1, 2, 3],
                    pair: [0, 3],
                },
                StationAttribution {
                    refs: [0, 3, 2],
                    pair: [1, 0],
                },
                StationAttribution {
                    refs: [3, 0, 1],
                    pair: [2, 1],
                },
                StationAttribution {
                    refs: [2, 1, 0],
                    pair: [3, 2],
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), PositioningError> {
        let bad = |m: String| Err(PositioningError::Attribution(m));
        let mut count = [0usize; 4];
        for (i, row) in self.rows.iter().enumerate() {
            let mut refs = row.refs.to_vec();
            refs.push(i);
            refs.sort_unstable();
            if refs != [0, 1, 2, 3] {
                return bad(format!("row {i} must reference the three other emitters"));
            }
            if row.pair[0] == row.pair[1] || row.pair.iter().any(|p| *p > 3) {
                return bad(format!("row {i} needs two distinct coordinates"));
            }
            row.pair.iter().for_each(|p| count[*p] += 1);
        }
        if count != [2; 4] {
            return bad("each coordinate must be reconstructed by exactly two stations".into());
        }
        let mut cover: Vec<usize> = self.rows[0]
            .pair
            .iter()
            .chain(&self.rows[2].pair)
            .copied()
            .collect();
        cover.sort_unstable();
        if cover != [0, 1, 2, 3] {
            return bad("stations 0 and 2 must together reconstruct all four coordinates".into());
        }
        Ok(())
    }
}

/// Stamps and readings recorded at one station of the 3+1 protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRecord4D {
    pub station: usize,
    pub station_id: String,
    pub reference_emitters: [usize; 3],
    /// 4-positions of the reference bright points, in canonical order.
    pub reference_positions: [EmissionPosition; 3],
    pub fifth_stamp: f64,
    pub pair: [usize; 2],
    pub observed: HemisphereReading,
    pub normalized: ProjPoint2,
    pub signature: String,
}

impl StationRecord4D {
    /// Stamp pairs of the three references on the station's coordinate pair,
    /// then the fifth stamp paired with itself.
    pub fn reference_pairs(&self) -> [[f64; 2]; 4] {
        let pick = |p: &EmissionPosition| [p.stamps[self.pair[0]], p.stamps[self.pair[1]]];
        [
            pick(&self.reference_positions[0]),
            pick(&self.reference_positions[1]),
            pick(&self.reference_positions[2]),
            [self.fifth_stamp, self.fifth_stamp],
        ]
    }
}

/// Geometric degeneracy detected while assembling a station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub station: usize,
    pub reference: String,
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Station4D {
    pub record: StationRecord4D,
    pub geometry: StationGeometry,
    /// Directions toward `e`, the three references and the fifth emitter.
    pub directions: [Direction; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationBundle4D {
    pub event: Event,
    pub stations: [Station4D; 4],
    pub anchor: AnchorReading,
    pub data_point: DataPoint,
    pub degeneracies: Vec<Degeneracy>,
}

impl StationBundle4D {
    pub fn records(&self) -> [StationRecord4D; 4] {
        self.stations.clone().map(|s| s.record)
    }
}

const DEGENERATE_SEPARATION: f64 = 1e-9;

/// Simulates the 3+1 stations for `e`.
pub fn assemble_station_records_4d(
    c: &Constellation,
    table: &AttributionTable,
    e: &Event,
    orientations: &[Orientation],
    signature: &str,
) -> Result<StationBundle4D, PositioningError> {
    if c.dim() != 4 {
        return Err(PositioningError::EmitterCount {
            expected: 4,
            got: c.emitters.len(),
        });
    }
    if orientations.len() != 4 {
        return Err(PositioningError::OrientationCount {
            expected: 4,
            got: orientations.len(),
        });
    }
    table.validate()?;
    let a = c.localizer()?;
    let anchor = a.message_coordinate(e)?;
    let mut stations = Vec::with_capacity(4);
    let mut degeneracies = Vec::new();
    let mut stamps = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let st = reception(c, i, e)?;
        let mut refs_ev = Vec::with_capacity(4);
        let mut positions = Vec::with_capacity(3);
        for j in row.refs {
            let (ev, p) = reference(c, j, &st)?;
            refs_ev.push(ev);
            positions.push(p);
        }
        let (src5, reading5) = fifth(c, a, &st)?;
        refs_ev.push(src5);
        let (de, dirs) = observe(&st, &orientations[i], e, &refs_ev)?;
        for (k, d) in dirs.iter().enumerate() {
            let sep = de.raw_rp2().distance(&d.raw_rp2());
            if sep <= DEGENERATE_SEPARATION {
                let reference = match row.refs.get(k) {
                    Some(j) => c.emitters[*j].id.clone(),
                    None => a.emitter.id.clone(),
                };
                degeneracies.push(Degeneracy {
                    station: i,
                    reference,
                    separation: sep,
                });
            }
        }
        let normalized = normalize_reading_rp2(&de, [&dirs[0], &dirs[1], &dirs[2], &dirs[3]])
            .map_err(|source| PositioningError::Observation {
                station: st.emitter.id.clone(),
                source,
            })?;
        let id = st.emitter.id.clone();
        stamps.push(LabeledStamp {
            label: format!("{id}.primary"),
            value: st.emitter.stamp(st.s)?,
        });
        for (j, p) in row.refs.iter().zip(&positions) {
            for (m, v) in p.stamps.iter().enumerate() {
                let label = format!("{id}.ref[{}][{m}]", c.emitters[*j].id);
                stamps.push(LabeledStamp { label, value: *v });
            }
        }
        stamps.push(LabeledStamp {
            label: format!("{id}.fifth"),
            value: reading5.stamp,
        });
        let record = StationRecord4D {
            station: i,
            station_id: id,
            reference_emitters: row.refs,
            reference_positions: positions.clone().try_into().expect("three references"),
            fifth_stamp: reading5.stamp,
            pair: row.pair,
            observed: chart_reading(&de),
            normalized,
            signature: signature.to_string(),
        };
        let geometry = StationGeometry {
            reception: st.event,
            reception_position: c.emission(&st.event)?,
            references: refs_ev[..3].to_vec(),
            fifth_source: src5,
            fifth: reading5,
        };
        stations.push(Station4D {
            record,
            geometry,
            directions: [de, dirs[0], dirs[1], dirs[2], dirs[3]],
        });
    }
    Ok(StationBundle4D {
        event: *e,
        stations: stations.try_into().expect("four stations"),
        anchor,
        data_point: DataPoint {
            signature: signature.to_string(),
            stamps,
        },
        degeneracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{Clock, MessageSense, DEFAULT_DOMAIN};

    fn static_emitter(id: &str, x: &[f64], clock: Clock) -> Emitter {
        Emitter::new(
            id,
            WorldlineSpec::stationary(x, DEFAULT_DOMAIN).unwrap(),
            clock,
        )
        .unwrap()
    }

    fn triangle() -> Constellation {
        let r = 10.0;
        let pts: Vec<[f64; 2]> = (0..3)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let ems = ["A", "B", "C"]
            .iter()
            .zip(&pts)
            .map(|(id, p)| static_emitter(id, p, Clock::proper_time()))
            .collect();
        let s = static_emitter("S", &[0.0, 0.0], Clock::proper_time());
        let anchor = AnchoringWorldline::new(s, -500.0, 500.0, MessageSense::Emission).unwrap();
        Constellation::new(ems, Some(anchor), None).unwrap()
    }

    fn ev(c: &[f64]) -> Event {
        Event::new(c).unwrap()
    }

    #[test]
    fn static_closed_form() {
        let c = triangle();
        let x = ev(&[30.0, 1.0, -2.0]);
        let p = emission_coordinates(&c.emitters, &x).unwrap();
        for (em, tau) in c.emitters.iter().zip(&p.stamps) {
            let xi = em.worldline.point(0.0);
            let d = ((1.0 - xi.space()[0]).powi(2) + (-2.0 - xi.space()[1]).powi(2)).sqrt();
            assert!((tau - (30.0 - d)).abs() <= 1e-12, "{tau} {}", 30.0 - d);
        }
    }

    #[test]
    fn event_on_emitter_worldline() {
        let c = triangle();
        let x = c.emitters[1].worldline.point(12.5);
        let p = emission_coordinates(&c.emitters, &x).unwrap();
        assert!((p.stamps[1] - 12.5).abs() <= 1e-12);
    }

    #[test]
    fn affine_clock_doubles_increments() {
        let c = triangle();
        let mut doubled = c.emitters.clone();
        doubled[0].clock = Clock::proper_time().then_affine(2.0, 0.0);
        let (x, y) = (ev(&[30.0, 1.0, -2.0]), ev(&[41.0, -0.5, 3.0]));
        let d1 = emission_coordinates(&c.emitters, &y).unwrap().stamps[0]
            - emission_coordinates(&c.emitters, &x).unwrap().stamps[0];
        let d2 = emission_coordinates(&doubled, &y).unwrap().stamps[0]
            - emission_coordinates(&doubled, &x).unwrap().stamps[0];
        assert!((d2 - 2.0 * d1).abs() <= 1e-12);
    }

    #[test]
    fn inverse_chart_round_trip_with_hint() {
        let c = triangle();
        let x = ev(&[30.0, 1.0, -2.0]);
        let p = emission_coordinates(&c.emitters, &x).unwrap();
        let back = cartesian_of_emission(&c.emitters, &p, Some(&x)).unwrap();
        assert!(back.coord_distance(&x) <= 1e-10);
        let source = c.emitters[0].worldline.point(3.0);
        let q = emission_coordinates(&c.emitters, &source).unwrap();
        let back = cartesian_of_emission(&c.emitters, &q, Some(&source)).unwrap();
        assert!(back.coord_distance(&source) <= 1e-10);
    }

    #[test]
    fn unattainable_position_is_rejected() {
        let c = triangle();
        let p = EmissionPosition::new(vec![0.0, 0.0, 100.0]);
        assert!(matches!(
            cartesian_of_emission(&c.emitters, &p, None),
            Err(PositioningError::Unattainable(_))
        ));
    }

    #[test]
    fn grid_change_identity_and_relabel() {
        let c = triangle();
        let x = ev(&[30.0, 1.0, -2.0]);
        let p = emission_coordinates(&c.emitters, &x).unwrap();
        let same = grid_change(&c.emitters, &c.emitters, &p, Some(&x)).unwrap();
        assert!(same.max_abs_diff(&p) <= 1e-10);
        let swapped = vec![
            c.emitters[1].clone(),
            c.emitters[0].clone(),
            c.emitters[2].clone(),
        ];
        let q = grid_change(&c.emitters, &swapped, &p, Some(&x)).unwrap();
        assert!((q.stamps[0] - p.stamps[1]).abs() <= 1e-10);
        assert!((q.stamps[1] - p.stamps[0]).abs() <= 1e-10);
    }

    #[test]
    fn symmetric_records_at_barycenter() {
        let c = triangle();
        let e = ev(&[20.0, 0.0, 0.0]);
        let b = assemble_echo_3d(&c, &e, &[Orientation::identity(2); 3], "sym").unwrap();
        let r0 = &b.stations[0].record;
        for st in &b.stations[1..] {
            let r = &st.record;
            assert!((r.primary_stamp - r0.primary_stamp).abs() <= 1e-12);
            let (a, b_, f) = r.frame_targets().unwrap();
            let (a0, b0, f0) = r0.frame_targets().unwrap();
            assert!((a - a0).abs() <= 1e-12 && (b_ - b0).abs() <= 1e-12 && (f - f0).abs() <= 1e-12);
        }
    }

    #[test]
    fn echo_stamps_match_independent_solves() {
        let c = triangle();
        let e = ev(&[20.0, 1.5, -2.5]);
        let b = assemble_echo_3d(&c, &e, &[Orientation::identity(2); 3], "x").unwrap();
        let pos: Vec<[f64; 2]> = c
            .emitters
            .iter()
            .map(|m| {
                [
                    m.worldline.point(0.0).space()[0],
                    m.worldline.point(0.0).space()[1],
                ]
            })
            .collect();
        let dist = |a: &[f64], b: &[f64]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        for (i, st) in b.stations.iter().enumerate() {
            let t_rec = 20.0 + dist(&pos[i], &[1.5, -2.5]);
            assert!((st.record.primary_stamp - t_rec).abs() <= 1e-11);
            let j = (i + 1) % 3;
            let t_ref = t_rec - dist(&pos[j], &pos[i]);
            for m in 0..3 {
                let want = t_ref - dist(&pos[m], &pos[j]);
                assert!((st.record.neighbor_positions[0].stamps[m] - want).abs() <= 1e-11);
            }
            let want5 = t_rec - dist(&pos[i], &[0.0, 0.0]);
            assert!((st.record.fifth_stamp.unwrap() - want5).abs() <= 1e-11);
        }
    }

    #[test]
    fn out_of_coverage_names_edge() {
        let c = triangle();
        let e = ev(&[990.0, 0.0, 5.0]);
        let err = assemble_echo_3d(&c, &e, &[Orientation::identity(2); 3], "x").unwrap_err();
        assert!(err.to_string().contains("-> W[A]"), "{err}");
    }

    #[test]
    fn attribution_tables_validate() {
        AttributionTable::default().validate().unwrap();
        AttributionTable::reversed().validate().unwrap();
        let mut t = AttributionTable::default();
        t.rows[1].pair = [0, 1];
        assert!(t.validate().is_err());
    }
}
