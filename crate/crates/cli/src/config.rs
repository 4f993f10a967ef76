//! Run configuration: a versioned JSON schema.

use std::path::Path;

use disloc_core::complex::ConvexLatticePolygon;
use disloc_core::kmc::{BarrierMode, RateModel};
use disloc_core::LatticeKind;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dislocation {
    pub x: f64,
    pub y: f64,
    pub b: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    pub lambda: f64,
    pub beta: f64,
    pub a0: f64,
    pub t_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensionless {
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmcOptions {
    pub horizon: f64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_mode")]
    pub barrier_mode: BarrierMode,
}

fn default_trajectories() -> usize {
    100
}

fn default_grid_points() -> usize {
    21
}

fn default_mode() -> BarrierMode {
    BarrierMode::Exact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshOptions {
    /// Grid nodes per coordinate.
    pub nodes: usize,
    /// Half-width of the box around the initial positions.
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DddConfig {
    pub horizon: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_n_coarse")]
    pub force_n_coarse: u32,
    #[serde(default)]
    pub mesh: Option<MeshOptions>,
}

fn default_rtol() -> f64 {
    1e-8
}

fn default_n_coarse() -> u32 {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub lattice: LatticeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<ConvexLatticePolygon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<u32>>,
    pub epsilon: f64,
    #[serde(default)]
    pub dislocations: Vec<Dislocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<Physical>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimensionless: Option<Dimensionless>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmc: Option<KmcOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ddd: Option<DddConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl RunConfig {
    /// Parses a config, or the config embedded in a run manifest.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        let value = match value.get("config") {
            Some(inner) if value.get("manifest_version").is_some() => inner.clone(),
            _ => value,
        };
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| ConfigError(format!("schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, msg: &str| Err(ConfigError(format!("field `{field}`: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return err("schema_version", &format!("expected {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        if self.physical.is_some() == self.dimensionless.is_some() {
            return err("physical/dimensionless", "exactly one of the two blocks must be present");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return err("epsilon", "must lie in (0, 0.5)");
        }
        if self.n.is_none() && self.n_values.as_ref().map_or(true, |v| v.is_empty()) {
            return err("n", "give `n` or a nonempty `n_values`");
        }
        if let Some(n) = self.n {
            if n < 4 {
                return err("n", "must be at least 4");
            }
        }
        for (i, d) in self.dislocations.iter().enumerate() {
            if d.b != 1 && d.b != -1 {
                return err(&format!("dislocations[{i}].b"), "Burgers sign must be ±1");
            }
            if !(d.x.is_finite() && d.y.is_finite()) {
                return err(&format!("dislocations[{i}]"), "position must be finite");
            }
        }
        if let Err(e) = self.rate_model().validate() {
            return err(if self.physical.is_some() { "physical" } else { "dimensionless" }, &e.to_string());
        }
        if let Some(k) = &self.kmc {
            if !(k.horizon > 0.0) || k.trajectories == 0 || k.grid_points < 2 {
                return err("kmc", "horizon > 0, trajectories ≥ 1 and grid_points ≥ 2 required");
            }
        }
        if let Some(d) = &self.ddd {
            if !(d.horizon > 0.0) || !(d.rtol > 0.0) || d.grid_points < 2 {
                return err("ddd", "horizon > 0, rtol > 0 and grid_points ≥ 2 required");
            }
        }
        Ok(())
    }

    pub fn rate_model(&self) -> RateModel {
        match (&self.physical, &self.dimensionless) {
            (Some(p), _) => RateModel::Physical { lambda: p.lambda, beta: p.beta, a0: p.a0, t_n: p.t_n },
            (_, Some(d)) => RateModel::Dimensionless { a: d.a, b: d.b },
            _ => RateModel::Dimensionless { a: f64::NAN, b: f64::NAN },
        }
    }

    pub fn polygon(&self) -> ConvexLatticePolygon {
        self.polygon.clone().unwrap_or_else(|| ConvexLatticePolygon::default_for(self.lattice))
    }

    /// The single scale, or the first of the sweep.
    pub fn scale(&self) -> u32 {
        self.n.or_else(|| self.n_values.as_ref().and_then(|v| v.first().copied())).unwrap_or(0)
    }

    pub fn scales(&self) -> Vec<u32> {
        self.n_values.clone().unwrap_or_else(|| vec![self.scale()])
    }

    pub fn lambda(&self) -> f64 {
        self.physical.as_ref().map_or(1.0, |p| p.lambda)
    }
}
