//! Run configuration (TOML or JSON). All quantities are dimensionless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{GroundwaterParams, SeriesParams};
use crate::error::{Error, Result};
use crate::estimate::{GridGeometry, WindowShape, DEFAULT_FLOOR_FRACTION, DEFAULT_N_CAP};
use crate::geometry::{BcKind, Domain, Shape};
use crate::model::{Direction, DiffusionField, TransportModel, Vec2, VelocityField};
use crate::respawn::{LedgerScope, DEFAULT_REORDER_INTERVAL};
use crate::sde::DEFAULT_SHARDS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    /// Constant coefficients. `dxy` exists only so that a cross term can be rejected.
    Constant {
        diffusion: Vec2,
        #[serde(default)]
        dxy: f64,
        #[serde(default)]
        velocity: Vec2,
        #[serde(default)]
        decay: f64,
    },
    Isotropic {
        d0: f64,
        #[serde(default)]
        decay: f64,
    },
    Groundwater(GroundwaterParams),
}

impl ModelConfig {
    pub fn decay(&self) -> f64 {
        match self {
            ModelConfig::Constant { decay, .. } | ModelConfig::Isotropic { decay, .. } => *decay,
            ModelConfig::Groundwater(p) => p.gamma,
        }
    }

    pub fn to_model(&self, direction: Direction) -> Result<TransportModel> {
        let m = match self {
            ModelConfig::Constant {
                diffusion,
                dxy,
                velocity,
                decay,
            } => {
                if *dxy != 0.0 {
                    return Err(Error::config(
                        "model.dxy",
                        "the diffusion tensor must be diagonal",
                    ));
                }
                TransportModel {
                    velocity: if *velocity == [0.0, 0.0] {
                        VelocityField::Zero
                    } else {
                        VelocityField::Constant(*velocity)
                    },
                    diffusion: DiffusionField::Constant(*diffusion),
                    decay: *decay,
                    direction,
                }
            }
            ModelConfig::Isotropic { d0, decay } => {
                if !(*d0 > 0.0) {
                    return Err(Error::config("model.d0", "must be > 0"));
                }
                TransportModel {
                    decay: *decay,
                    ..TransportModel::isotropic(*d0, direction)
                }
            }
            ModelConfig::Groundwater(p) => {
                if !(p.d0 > 0.0) {
                    return Err(Error::config("model.d0", "must be > 0"));
                }
                TransportModel::groundwater(p, direction)
            }
        };
        m.validate()?;
        Ok(m)
    }

    /// Isotropic constant diffusivity, if the model has one and no drift.
    pub fn pure_diffusivity(&self) -> Option<f64> {
        match self {
            ModelConfig::Isotropic { d0, .. } => Some(*d0),
            ModelConfig::Constant {
                diffusion,
                velocity,
                ..
            } if diffusion[0] == diffusion[1] && *velocity == [0.0, 0.0] => Some(diffusion[0]),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Square {
        #[serde(default)]
        bc: Option<BcKind>,
        #[serde(default)]
        segments: Option<Vec<BcKind>>,
    },
    Rectangle {
        extents: [f64; 4],
        #[serde(default)]
        bc: Option<BcKind>,
        #[serde(default)]
        segments: Option<Vec<BcKind>>,
    },
    Disk {
        center: Vec2,
        radius: f64,
        #[serde(default)]
        bc: Option<BcKind>,
    },
    Quadrant {
        #[serde(default)]
        bc: Option<BcKind>,
        #[serde(default)]
        segments: Option<Vec<BcKind>>,
    },
    Unbounded,
}

impl DomainConfig {
    pub fn to_domain(&self) -> Result<Domain> {
        let build = |shape: Shape, bc: &Option<BcKind>, segs: &Option<Vec<BcKind>>| match (bc, segs) {
            (Some(_), Some(_)) => Err(Error::config("domain", "give either `bc` or `segments`, not both")),
            (_, Some(s)) => Domain::new(shape, s.clone()),
            (b, None) => Domain::uniform(shape, b.unwrap_or(BcKind::Dirichlet)),
        };
        match self {
            DomainConfig::Square { bc, segments } => build(
                Shape::Rectangle {
                    x_min: 0.0,
                    x_max: 1.0,
                    y_min: 0.0,
                    y_max: 1.0,
                },
                bc,
                segments,
            ),
            DomainConfig::Rectangle {
                extents,
                bc,
                segments,
            } => build(
                Shape::Rectangle {
                    x_min: extents[0],
                    x_max: extents[1],
                    y_min: extents[2],
                    y_max: extents[3],
                },
                bc,
                segments,
            ),
            DomainConfig::Disk { center, radius, bc } => build(
                Shape::Disk {
                    center: *center,
                    radius: *radius,
                },
                bc,
                &None,
            ),
            DomainConfig::Quadrant { bc, segments } => {
                // Axes default to reflecting.
                let bc = match segments {
                    None => Some(bc.unwrap_or(BcKind::Neumann)),
                    Some(_) => *bc,
                };
                build(Shape::Quadrant, &bc, segments)
            }
            DomainConfig::Unbounded => Ok(Domain::unbounded()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Forward time at the launch point: response time (backward) or impulse time (forward).
    pub launch_time: f64,
    pub dt: f64,
    /// Snapshot instants in forward time.
    pub snapshots: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmSection {
    pub n_walkers: usize,
    #[serde(default = "yes")]
    pub respawn: bool,
    #[serde(default = "default_interval")]
    pub reorder_interval: usize,
    #[serde(default)]
    pub ledger_scope: LedgerScope,
    #[serde(default = "default_shards")]
    pub shards: usize,
    #[serde(default = "yes")]
    pub bridge_correction: bool,
}

fn yes() -> bool {
    true
}

fn default_interval() -> usize {
    DEFAULT_REORDER_INTERVAL
}

fn default_shards() -> usize {
    DEFAULT_SHARDS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum GridConfig {
    Fixed { extents: [f64; 4], nx: usize, ny: usize },
    /// `[0, mu_x + sigma_x] x [0, mu_y + sigma_y]` from the swarm at the last snapshot.
    Auto { nx: usize, ny: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    #[serde(default)]
    pub shape: WindowShape,
    #[serde(default = "default_n_cap")]
    pub n_cap: usize,
    /// Fixed half-width; required when no reference is configured.
    #[serde(default)]
    pub window: Option<usize>,
}

fn default_n_cap() -> usize {
    DEFAULT_N_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default = "default_floor")]
    pub floor_fraction: f64,
    #[serde(default)]
    pub series: Option<SeriesParams>,
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR_FRACTION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub direction: Direction,
    pub model: ModelConfig,
    pub domain: DomainConfig,
    pub launch: Vec2,
    pub time: TimeConfig,
    pub swarm: SwarmSection,
    pub grid: GridConfig,
    #[serde(default)]
    pub smoothing: Option<SmoothingSection>,
    #[serde(default)]
    pub reference: Option<ReferenceSection>,
}

/// Snapshot schedule derived from a config.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    /// Forward-time labels, in config order.
    pub labels: Vec<f64>,
    /// Elapsed times since launch, matching `labels`.
    pub elapsed: Vec<f64>,
    pub horizon: f64,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Reads a TOML config, or the config embedded in a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::config("manifest", e.to_string()))?;
            let inner = v.get("config").cloned().unwrap_or(v);
            serde_json::from_value(inner).map_err(|e| Error::config("manifest.config", e.to_string()))?
        } else {
            Self::from_toml_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let t0 = self.time.launch_time;
        if self.time.snapshots.is_empty() {
            return Err(Error::config("time.snapshots", "at least one snapshot is required"));
        }
        let mut elapsed = Vec::with_capacity(self.time.snapshots.len());
        for &s in &self.time.snapshots {
            let tau = match self.direction {
                Direction::Backward => t0 - s,
                Direction::Forward => s - t0,
            };
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::config(
                    "time.snapshots",
                    format!("snapshot {s} lies on the wrong side of launch time {t0}"),
                ));
            }
            elapsed.push(tau);
        }
        let horizon = elapsed.iter().cloned().fold(0.0, f64::max);
        Ok(Schedule {
            labels: self.time.snapshots.clone(),
            elapsed,
            horizon,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.to_model(self.direction)?;
        let domain = self.domain.to_domain()?;
        if !domain.contains(self.launch) {
            return Err(Error::config("launch", "launch point must be strictly inside the domain"));
        }
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return Err(Error::config("time.dt", "must be > 0"));
        }
        let sched = self.schedule()?;
        for &tau in &sched.elapsed {
            if crate::sde::steps_for(tau, self.time.dt).is_none() {
                return Err(Error::config(
                    "time.snapshots",
                    format!("elapsed time {tau} is not a multiple of dt"),
                ));
            }
        }
        if self.swarm.n_walkers == 0 {
            return Err(Error::config("swarm.n_walkers", "must be >= 1"));
        }
        if self.swarm.shards == 0 {
            return Err(Error::config("swarm.shards", "must be >= 1"));
        }
        if self.swarm.reorder_interval == 0 {
            return Err(Error::config("swarm.reorder_interval", "must be >= 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be >= 1"));
        }
        match &self.grid {
            GridConfig::Fixed { extents, nx, ny } => {
                GridGeometry::new(extents[0], extents[1], extents[2], extents[3], *nx, *ny)
                    .map_err(|e| Error::config("grid", e.to_string()))?;
            }
            GridConfig::Auto { nx, ny } => {
                if *nx == 0 || *ny == 0 {
                    return Err(Error::config("grid", "nx and ny must be >= 1"));
                }
                if sched.elapsed.len() != 1 {
                    return Err(Error::config(
                        "grid.mode",
                        "an automatic grid supports exactly one snapshot",
                    ));
                }
            }
        }
        if let Some(r) = &self.reference {
            if !(0.0..1.0).contains(&r.floor_fraction) {
                return Err(Error::config("reference.floor_fraction", "must be in [0, 1)"));
            }
            if let Some(s) = &r.series {
                s.validate()?;
            }
        }
        if let Some(s) = &self.smoothing {
            if self.reference.is_none() && s.window.is_none() {
                return Err(Error::config(
                    "smoothing.window",
                    "a fixed window is required without a reference",
                ));
            }
        }
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))
}

/// Spatial or space-time data for the convolution solver.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSpec {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// Lowest Dirichlet eigenmode of a rectangle.
    Eigenmode,
    /// Gaussian of standard deviation `width` and unit mass.
    Delta {
        at: Vec2,
        width: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_cells")]
    pub space_cells: usize,
    #[serde(default = "default_cells")]
    pub time_slabs: usize,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_cells() -> usize {
    40
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self {
            space_cells: default_cells(),
            time_slabs: default_cells(),
            tolerance: None,
        }
    }
}

/// Config for the `solve` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub d0: f64,
    pub time: f64,
    pub domain: DomainConfig,
    #[serde(default)]
    pub points: Vec<Vec2>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub initial: DataSpec,
    #[serde(default)]
    pub source: DataSpec,
    #[serde(default)]
    pub dirichlet: DataSpec,
    #[serde(default)]
    pub neumann: DataSpec,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub series: Option<SeriesParams>,
}

impl SolveConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let c: Self = toml::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?;
        if !(c.d0 > 0.0) {
            return Err(Error::config("d0", "must be > 0"));
        }
        if !(c.time > 0.0) {
            return Err(Error::config("time", "must be > 0"));
        }
        if c.points.is_empty() && c.grid.is_none() {
            return Err(Error::config("points", "give `points`, a `grid`, or both"));
        }
        if matches!(c.grid, Some(GridConfig::Auto { .. })) {
            return Err(Error::config("grid.mode", "the solver needs a fixed grid"));
        }
        c.domain.to_domain()?;
        Ok(c)
    }
}
