//! Scenario configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use stereoloc::constellation::{AnchoringWorldline, Clock, Emitter, MessageSense, WorldlineSpec};
use stereoloc::geometry::{Event, Worldline};
use stereoloc::observation::Orientation;
use stereoloc::positioning::{AttributionTable, Constellation, StationAttribution};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ValidationError {
    ValidationError {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    pub id: String,
    pub worldline: WorldlineSpec,
    #[serde(default)]
    pub clock: Clock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfig {
    /// Id of the localizing emitter in `emitters`.
    pub emitter: String,
    pub origin: f64,
    pub span: f64,
    #[serde(default)]
    pub sense: MessageSense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomEvents {
    pub count: usize,
    pub seed: u64,
    pub time: [f64; 2],
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSeeding {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomEvents>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub constraint: f64,
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            constraint: 1e-8,
            oracle: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrientationConfig {
    /// Rotate every station's tetrad seed by a random rotation.
    pub random: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    /// Include the per-station records in JSON reports.
    pub records: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Spacetime dimension: 2, 3 or 4.
    pub dimension: usize,
    pub emitters: Vec<EmitterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<WorldlineSpec>,
    pub events: EventSeeding,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attribution: Vec<StationAttribution>,
    #[serde(default)]
    pub orientations: OrientationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A validated configuration with everything built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub constellation: Constellation,
    pub table: AttributionTable,
    pub events: Vec<Event>,
    pub orientations: Vec<Orientation>,
    pub seed: u64,
    pub hash: String,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn seed(&self) -> u64 {
        self.events.random.as_ref().map_or(0, |r| r.seed)
    }

    /// Replaces the event seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Some(r) = &mut self.events.random {
            r.seed = seed;
        }
        self
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Scenario, ValidationError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        let d = self.dimension;
        if !(2..=4).contains(&d) {
            return Err(invalid("dimension", format!("must be 2, 3 or 4, got {d}")));
        }
        let needs_anchor = d > 2;
        let expected = if needs_anchor { d + 1 } else { d };
        if self.emitters.len() != expected {
            let why = if needs_anchor {
                format!("{d} + 1 localizing")
            } else {
                d.to_string()
            };
            return Err(invalid(
                "emitters",
                format!(
                    "dimension {d} requires {expected} emitters ({why}), got {}",
                    self.emitters.len()
                ),
            ));
        }
        let mut ids = std::collections::HashSet::new();
        let mut built = Vec::with_capacity(self.emitters.len());
        for (i, e) in self.emitters.iter().enumerate() {
            if !ids.insert(e.id.as_str()) {
                return Err(invalid(
                    format!("emitters[{i}].id"),
                    format!("duplicate id {:?}", e.id),
                ));
            }
            if e.worldline.dim() != d {
                return Err(invalid(
                    format!("emitters[{i}].worldline"),
                    format!("has dimension {}, expected {d}", e.worldline.dim()),
                ));
            }
            let em = Emitter::new(e.id.clone(), e.worldline.clone(), e.clock)
                .map_err(|err| invalid(format!("emitters[{i}].clock"), err.to_string()))?;
            built.push(em);
        }
        let localizer = match (&self.anchor, needs_anchor) {
            (None, true) => {
                return Err(invalid(
                    "anchor",
                    format!("dimension {d} requires a localizing (fifth) emitter"),
                ));
            }
            (None, false) => None,
            (Some(a), _) => {
                let k = built
                    .iter()
                    .position(|e| e.id == a.emitter)
                    .ok_or_else(|| {
                        invalid(
                            "anchor.emitter",
                            format!("no emitter with id {:?}", a.emitter),
                        )
                    })?;
                if !needs_anchor {
                    return Err(invalid("anchor", "dimension 2 takes no localizing emitter"));
                }
                let em = built.remove(k);
                let a = AnchoringWorldline::new(em, a.origin, a.span, a.sense)
                    .map_err(|err| invalid("anchor", err.to_string()))?;
                Some(a)
            }
        };
        if let Some(u) = &self.user {
            if u.dim() != d {
                return Err(invalid(
                    "user",
                    format!("has dimension {}, expected {d}", u.dim()),
                ));
            }
        }
        let constellation = Constellation::new(built, localizer, self.user.clone())
            .map_err(|err| invalid("emitters", err.to_string()))?;
        let t = &self.tolerances;
        for (name, v) in [("constraint", t.constraint), ("oracle", t.oracle)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("tolerances.{name}"), "must be positive"));
            }
        }
        let table = match (self.attribution.len(), d) {
            (0, _) => AttributionTable::default(),
            (4, 4) => {
                let table = AttributionTable {
                    rows: self.attribution.clone().try_into().expect("four rows"),
                };
                table
                    .validate()
                    .map_err(|err| invalid("attribution", err.to_string()))?;
                table
            }
            (n, 4) => return Err(invalid("attribution", format!("needs 4 rows, got {n}"))),
            _ => return Err(invalid("attribution", "only used in dimension 4")),
        };
        let events = self.seed_events()?;
        let orientations = self.seed_orientations();
        Ok(Scenario {
            config: self.clone(),
            constellation,
            table,
            events,
            orientations,
            seed: self.seed(),
            hash: self.hash(),
        })
    }

    fn seed_events(&self) -> Result<Vec<Event>, ValidationError> {
        let d = self.dimension;
        let s = &self.events;
        if s.explicit.is_empty() == s.random.is_none() {
            return Err(invalid(
                "events",
                "give exactly one of `explicit` or `random`",
            ));
        }
        let mut out = Vec::new();
        for (i, c) in s.explicit.iter().enumerate() {
            if c.len() != d {
                return Err(invalid(
                    format!("events.explicit[{i}]"),
                    format!("needs {d} coordinates"),
                ));
            }
            out.push(
                Event::new(c)
                    .map_err(|e| invalid(format!("events.explicit[{i}]"), e.to_string()))?,
            );
        }
        if let Some(r) = &s.random {
            if r.count == 0 {
                return Err(invalid("events.random.count", "must be positive"));
            }
            if r.seed == 0 {
                return Err(invalid("events.random.seed", "must be positive"));
            }
            if !(r.radius > 0.0 && r.radius.is_finite()) {
                return Err(invalid("events.random.radius", "must be positive"));
            }
            if !(r.time[0] <= r.time[1]) {
                return Err(invalid("events.random.time", "must be an increasing range"));
            }
            if r.center.len() != d - 1 {
                return Err(invalid(
                    "events.random.center",
                    format!("needs {} coordinates", d - 1),
                ));
            }
            out = random_events(r);
        }
        Ok(out)
    }

    fn seed_orientations(&self) -> Vec<Orientation> {
        let n = self.dimension - 1;
        let stations = if self.dimension == 2 {
            2
        } else {
            self.dimension
        };
        let o = self.orientations;
        if !o.random {
            return vec![Orientation::identity(n); stations];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
        (0..stations)
            .map(|_| random_orientation(&mut rng, n))
            .collect()
    }
}

pub fn random_events(r: &RandomEvents) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let n = r.center.len();
    (0..r.count)
        .map(|_| {
            let t = rng.gen_range(r.time[0]..=r.time[1]);
            let offset = loop {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    break v;
                }
            };
            let space: Vec<f64> = r
                .center
                .iter()
                .zip(&offset)
                .map(|(c, o)| c + r.radius * o)
                .collect();
            Event::from_parts(t, &space).expect("finite event")
        })
        .collect()
}

pub fn random_orientation<R: Rng>(rng: &mut R, spatial_dim: usize) -> Orientation {
    let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    match spatial_dim {
        1 => Orientation::identity(1),
        2 => Orientation::planar(angle),
        _ => {
            let axis = loop {
                let v = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let n2: f64 = v.iter().map(|x| x * x).sum();
                if n2 > 1e-6 && n2 <= 1.0 {
                    break v;
                }
            };
            Orientation::spatial(axis, angle)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"
schema_version = 1
dimension = 2
[[emitters]]
id = "L"
worldline = { kind = "inertial", start = [0.0, -5.0], velocity = [0.0] }
[[emitters]]
id = "R"
worldline = { kind = "inertial", start = [0.0, 5.0], velocity = [0.0] }
[events.random]
count = 4
seed = 7
time = [0.0, 10.0]
center = [0.0]
radius = 4.0
"#;

    #[test]
    fn parses_and_builds() {
        let c = ScenarioConfig::from_toml(PAIR).unwrap();
        let s = c.build().unwrap();
        assert_eq!(s.events.len(), 4);
        assert_eq!(s.hash.len(), 64);
        assert_eq!(s.hash, c.clone().build().unwrap().hash);
        assert_ne!(s.hash, c.with_seed(8).hash());
    }

    #[test]
    fn errors_name_the_field() {
        let c = ScenarioConfig::from_toml(PAIR).unwrap();
        let mut bad = c.clone();
        bad.dimension = 4;
        let e = bad.validate().unwrap_err();
        assert_eq!(e.path, "emitters");
        assert!(e.message.contains("requires 5 emitters"));
        let mut bad = c.clone();
        bad.events.random.as_mut().unwrap().seed = 0;
        assert_eq!(bad.validate().unwrap_err().path, "events.random.seed");
        let mut bad = c.clone();
        bad.tolerances.oracle = -1.0;
        assert_eq!(bad.validate().unwrap_err().path, "tolerances.oracle");
        let mut bad = c;
        bad.schema_version = 9;
        assert_eq!(bad.validate().unwrap_err().path, "schema_version");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = PAIR.replace("dimension = 2", "dimension = 2\ncolour = 1");
        assert!(matches!(
            ScenarioConfig::from_toml(&text),
            Err(ConfigError::Parse(_))
        ));
    }
}
