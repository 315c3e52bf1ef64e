//! Scenario files: TOML with a `schema_version` key. Lengths in metres, angles in radians,
//! times in seconds.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formation::{AnonymousParams, AvoidParams, Configuration, FormationError, Preset, Sampling};
use crate::motion::{AvoidField, Limits, MotionError, WaypointNav, DEFAULT_DT};
use crate::search::{Mission, PolicyChoice};
use crate::topomap::SensorModel;
use crate::world::{Point, Workspace, WorldError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("workspace: {0}")]
    World(#[from] WorldError),
    #[error("{0}")]
    Motion(#[from] MotionError),
    #[error("formation: {0}")]
    Formation(#[from] FormationError),
    #[error("robot {0} starts outside free space")]
    PoseNotFree(usize),
    #[error("{count} robots declared but {poses} poses given")]
    PoseCount { count: usize, poses: usize },
    #[error("target {0} lies outside free space")]
    TargetNotFree(usize),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceSpec {
    pub boundary: Vec<Point>,
    #[serde(default)]
    pub obstacles: Vec<Vec<Point>>,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.35
}

impl WorkspaceSpec {
    pub fn build(&self) -> Result<Workspace, WorldError> {
        Workspace::new(self.boundary.clone(), self.obstacles.clone(), self.margin)
    }
}

/// Rejection sampling rules for random starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Placement {
    pub min_separation: f64,
    /// Starts must form a connected graph at this fraction of `r_c`.
    pub connect_fraction: f64,
    pub max_attempts: usize,
}

impl Default for Placement {
    fn default() -> Self {
        Self { min_separation: 3.0, connect_fraction: 0.6, max_attempts: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotsSpec {
    pub count: usize,
    /// Fixed starts `[x, y, heading]`; random placement when absent.
    #[serde(default)]
    pub poses: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpec {
    pub policy: PolicyChoice,
    pub mission: Mission,
    pub side: f64,
    pub r_c: f64,
    /// Stage-one stop tolerances.
    pub tol_theta: f64,
    pub tol_q: f64,
    pub max_rounds: usize,
    /// Trajectory is sampled every this many ticks.
    pub sample_every: u64,
    /// Stage-two time limit in seconds; patrol missions end here.
    pub max_time: Option<f64>,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            policy: PolicyChoice::Modified,
            mission: Mission::FullCoverage,
            side: 2.0,
            r_c: 10.0,
            tol_theta: 1e-5,
            tol_q: 1e-4,
            max_rounds: 1000,
            sample_every: 10,
            max_time: None,
        }
    }
}

pub fn default_sensor() -> SensorModel {
    SensorModel { r_s: 2.0 / 3f64.sqrt(), n_rays: 17, max_range: 5.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormationSpec {
    pub preset: Preset,
    /// Explicit slots override the preset.
    pub offsets: Option<Vec<Point>>,
    pub spacing: f64,
    pub c: f64,
    pub limits: Limits,
    pub sampling: Sampling,
    pub avoid: AvoidParams,
    pub anonymous: Option<AnonymousParams>,
    pub r_c: f64,
    pub t_end: f64,
    /// Clear steps before leaving boundary following.
    pub hysteresis: u32,
    /// Random starts are drawn from this box.
    pub spawn: [Point; 2],
    /// Initial headings are uniform in `±heading_spread`.
    pub heading_spread: f64,
    pub speed_range: [f64; 2],
    pub sample_every: u64,
}

impl Default for FormationSpec {
    fn default() -> Self {
        Self {
            preset: Preset::Edge,
            offsets: None,
            spacing: 2.0,
            c: 2.0,
            limits: Limits::formation(),
            sampling: Sampling::default(),
            avoid: AvoidParams::default(),
            anonymous: None,
            r_c: 30.0,
            t_end: 120.0,
            hysteresis: 5,
            spawn: [Point::new(0.0, -6.0), Point::new(10.0, 6.0)],
            heading_spread: 0.3,
            speed_range: [0.5, 1.0],
            sample_every: 5,
        }
    }
}

impl FormationSpec {
    pub fn configuration(&self, n: usize) -> Configuration {
        match &self.offsets {
            Some(o) => Configuration { offsets: o.clone(), c: self.c },
            None => Configuration::preset(self.preset, n, self.spacing, self.c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub workspace: WorkspaceSpec,
    pub robots: RobotsSpec,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default = "default_sensor")]
    pub sensor: SensorModel,
    #[serde(default = "Limits::search")]
    pub limits: Limits,
    #[serde(default)]
    pub nav: WaypointNav,
    #[serde(default)]
    pub avoid: AvoidField,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub formation: Option<FormationSpec>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl Scenario {
    pub fn from_toml_str(s: &str, origin: &Path) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(s).map_err(|e| ScenarioError::Parse { path: origin.into(), source: e })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io { path: path.into(), source: e })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn workspace(&self) -> Result<Workspace, WorldError> {
        self.workspace.build()
    }

    pub fn with_team(&self, n: usize) -> Self {
        let mut s = self.clone();
        s.robots.count = n;
        s.robots.poses = None;
        s
    }

    pub fn with_policy(&self, p: PolicyChoice) -> Self {
        let mut s = self.clone();
        s.search.policy = p;
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(self.schema_version));
        }
        let w = self.workspace()?;
        self.limits.validate()?;
        self.nav.validate()?;
        let pos = |x: f64, what: &str| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(ScenarioError::Invalid(format!("{what} must be positive, got {x}")))
            }
        };
        pos(self.dt, "dt")?;
        pos(self.search.side, "side")?;
        pos(self.search.r_c, "r_c")?;
        pos(self.sensor.r_s, "sensor.r_s")?;
        pos(self.sensor.max_range, "sensor.max_range")?;
        pos(self.search.tol_theta, "tol_theta")?;
        pos(self.search.tol_q, "tol_q")?;
        if self.robots.count == 0 {
            return Err(ScenarioError::Invalid("robot count must be at least 1".into()));
        }
        if self.search.sample_every == 0 {
            return Err(ScenarioError::Invalid("sample_every must be at least 1".into()));
        }
        if let Some(poses) = &self.robots.poses {
            if poses.len() != self.robots.count {
                return Err(ScenarioError::PoseCount { count: self.robots.count, poses: poses.len() });
            }
            for (i, p) in poses.iter().enumerate() {
                if !w.contains_free(Point::new(p[0], p[1])) {
                    return Err(ScenarioError::PoseNotFree(i));
                }
            }
        }
        if let Mission::Targets { targets } = &self.search.mission {
            for (i, t) in targets.iter().enumerate() {
                if !w.contains_free(*t) {
                    return Err(ScenarioError::TargetNotFree(i));
                }
            }
        }
        if let Some(f) = &self.formation {
            f.limits.validate()?;
            f.configuration(self.robots.count).validate(&f.limits)?;
            f.avoid.validate(&f.limits)?;
            if let Some(a) = &f.anonymous {
                a.validate()?;
            }
        }
        Ok(())
    }
}

/// Obstacle course for formation runs: a workspace plus an optional spawn box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Course {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub workspace: WorkspaceSpec,
    #[serde(default)]
    pub spawn: Option<[Point; 2]>,
    /// Robots past this x have cleared every obstacle.
    #[serde(default)]
    pub clear_x: Option<f64>,
}

impl Course {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io { path: path.into(), source: e })?;
        let c: Course = toml::from_str(&text).map_err(|e| ScenarioError::Parse { path: path.into(), source: e })?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(c.schema_version));
        }
        c.workspace.build()?;
        Ok(c)
    }

    /// Large empty field.
    pub fn open() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: "open".into(),
            workspace: WorkspaceSpec {
                boundary: vec![
                    Point::new(-50.0, -60.0),
                    Point::new(400.0, -60.0),
                    Point::new(400.0, 60.0),
                    Point::new(-50.0, 60.0),
                ],
                obstacles: Vec::new(),
                margin: 0.0,
            },
            spawn: None,
            clear_x: None,
        }
    }
}
