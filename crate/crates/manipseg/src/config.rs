//! Pipeline configuration file (JSON). Every field has a default; unknown
//! keys are rejected. Relative paths resolve against the config file's
//! directory.

use std::path::{Path, PathBuf};

use manipseg_core::actor::{ActorSelector, DEFAULT_ACTOR_RADIUS};
use manipseg_core::contact::{DEFAULT_CONTACT_DIST, DEFAULT_MIN_DURATION};
use manipseg_core::normals::DEFAULT_NORMAL_K;
use manipseg_core::object::{ObjectParams, RansacParams};
use manipseg_core::{Point, RegistrationParams};
use manipseg_core::solver::Preconditioner;
use serde::{Deserialize, Serialize};

use crate::rgbd::DEFAULT_DEPTH_SCALE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// `*.ply` files in the input directory, in file-name order.
    Ply,
    /// `depth_<id>.png` / `color_<id>.png` pairs plus `intrinsics.json`.
    Rgbd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub path: PathBuf,
    pub format: InputFormat,
    /// Meters per raw depth unit.
    pub depth_scale: f64,
    /// Depths beyond this (m) are dropped on back-projection.
    pub max_depth: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("frames"),
            format: InputFormat::Ply,
            depth_scale: DEFAULT_DEPTH_SCALE,
            max_depth: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Voxel leaf (m) for downsampling the first frame into the model; 0 keeps every point.
    pub voxel_leaf: f64,
    pub normal_k: usize,
    /// Recompute normals even when the input carries them.
    pub estimate_normals: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            voxel_leaf: 0.005,
            normal_k: DEFAULT_NORMAL_K,
            estimate_normals: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationConfig {
    pub w_point: f64,
    pub w_stiff: f64,
    pub delta: f64,
    pub sigma_reg: f64,
    pub max_dist: f64,
    pub max_normal_angle_deg: f64,
    pub max_color_diff: f64,
    pub icp_iters: usize,
    pub gn_iters: usize,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub preconditioner: PreconditionerKind,
    pub graph_k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    #[default]
    Jacobi,
    /// One 6x6 block per local transform.
    BlockJacobi,
}

impl PreconditionerKind {
    pub fn solver(self) -> Preconditioner {
        match self {
            PreconditionerKind::Jacobi => Preconditioner::Jacobi,
            PreconditionerKind::BlockJacobi => Preconditioner::BlockJacobi(6),
        }
    }
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        let p = RegistrationParams::default();
        Self {
            w_point: p.w_point,
            w_stiff: p.w_stiff,
            delta: p.delta,
            sigma_reg: p.sigma_reg,
            max_dist: p.max_dist,
            max_normal_angle_deg: p.max_normal_angle.to_degrees(),
            max_color_diff: p.max_color_diff,
            icp_iters: p.icp_iters,
            gn_iters: p.gn_iters,
            cg_iters: p.cg_iters,
            cg_tol: p.cg_tol,
            preconditioner: match p.preconditioner {
                Preconditioner::Jacobi => PreconditionerKind::Jacobi,
                Preconditioner::BlockJacobi(_) => PreconditionerKind::BlockJacobi,
            },
            graph_k: p.graph_k,
        }
    }
}

impl RegistrationConfig {
    pub fn params(&self) -> RegistrationParams {
        RegistrationParams {
            w_point: self.w_point,
            w_stiff: self.w_stiff,
            delta: self.delta,
            sigma_reg: self.sigma_reg,
            max_dist: self.max_dist,
            max_normal_angle: self.max_normal_angle_deg.to_radians(),
            max_color_diff: self.max_color_diff,
            icp_iters: self.icp_iters,
            gn_iters: self.gn_iters,
            cg_iters: self.cg_iters,
            cg_tol: self.cg_tol,
            preconditioner: self.preconditioner.solver(),
            graph_k: self.graph_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ActorSelect {
    Largest,
    ClosestTo([f64; 3]),
    SizeRange([usize; 2]),
}

impl ActorSelect {
    pub fn selector(&self) -> ActorSelector {
        match self {
            ActorSelect::Largest => ActorSelector::Largest,
            ActorSelect::ClosestTo(p) => ActorSelector::ClosestTo(Point::new(p[0], p[1], p[2])),
            ActorSelect::SizeRange([min, max]) => ActorSelector::SizeRange { min: *min, max: *max },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActorConfig {
    /// Proximity graph / region growing radius (m).
    pub radius: f64,
    /// Grow the actor from the model point nearest this position; overrides `select`.
    pub seed: Option<[f64; 3]>,
    pub select: ActorSelect,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self {
            radius: DEFAULT_ACTOR_RADIUS,
            seed: None,
            select: ActorSelect::Largest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactConfig {
    pub contact_dist: f64,
    pub min_duration: usize,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            contact_dist: DEFAULT_CONTACT_DIST,
            min_duration: DEFAULT_MIN_DURATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectConfig {
    pub attention_radius: f64,
    pub sigma: f64,
    pub ransac_inlier_dist: f64,
    pub ransac_iterations: usize,
    pub ransac_seed: u64,
    pub kmeans_restarts: usize,
    pub cluster_seed: u64,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        let p = ObjectParams::default();
        Self {
            attention_radius: p.attention_radius,
            sigma: p.sigma,
            ransac_inlier_dist: p.ransac.inlier_dist,
            ransac_iterations: p.ransac.iterations,
            ransac_seed: p.ransac.seed,
            kmeans_restarts: p.kmeans_restarts,
            cluster_seed: p.cluster_seed,
        }
    }
}

impl ObjectConfig {
    pub fn params(&self) -> ObjectParams {
        ObjectParams {
            attention_radius: self.attention_radius,
            sigma: self.sigma,
            ransac: RansacParams {
                inlier_dist: self.ransac_inlier_dist,
                iterations: self.ransac_iterations,
                seed: self.ransac_seed,
            },
            kmeans_restarts: self.kmeans_restarts,
            cluster_seed: self.cluster_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub input: InputConfig,
    /// Run directory receiving every artifact.
    pub output: PathBuf,
    pub model: ModelConfig,
    pub registration: RegistrationConfig,
    pub actor: ActorConfig,
    pub contacts: ContactConfig,
    pub objects: ObjectConfig,
    /// Write overlay PLYs as ASCII instead of binary.
    pub ascii_overlays: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

fn check(ok: bool, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg.to_string()))
    }
}

impl PipelineConfig {
    /// Parse a config, or the `config` member of a run's manifest.json.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        let value = match value {
            serde_json::Value::Object(mut m) if m.contains_key("tool") && m.contains_key("config") => {
                m.remove("config").expect("checked")
            }
            v => v,
        };
        let cfg: Self = serde_json::from_value(value).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse and validate, resolving relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
        // absolute, so a manifest written from this config works from any directory
        let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = std::path::absolute(parent)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        cfg.input.path = base.join(&cfg.input.path);
        cfg.output = base.join(&cfg.output);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let i = &self.input;
        check(i.depth_scale > 0.0, "input.depth_scale must be > 0")?;
        check(i.max_depth > 0.0, "input.max_depth must be > 0")?;
        let m = &self.model;
        check(m.voxel_leaf >= 0.0 && m.voxel_leaf.is_finite(), "model.voxel_leaf must be >= 0")?;
        check(m.normal_k >= 3, "model.normal_k must be >= 3")?;
        let r = &self.registration;
        check(r.w_point >= 0.0, "registration.w_point must be >= 0")?;
        check(r.w_stiff >= 0.0, "registration.w_stiff must be >= 0")?;
        check(r.delta > 0.0, "registration.delta must be > 0")?;
        check(r.sigma_reg > 0.0, "registration.sigma_reg must be > 0")?;
        check(r.max_dist > 0.0, "registration.max_dist must be > 0")?;
        check(
            (0.0..=180.0).contains(&r.max_normal_angle_deg),
            "registration.max_normal_angle_deg must be in [0, 180]",
        )?;
        check(r.max_color_diff >= 0.0, "registration.max_color_diff must be >= 0")?;
        check(r.graph_k >= 1, "registration.graph_k must be >= 1")?;
        check(r.cg_tol > 0.0, "registration.cg_tol must be > 0")?;
        r.params().validate().map_err(|e| ConfigError(e.to_string()))?;
        check(self.actor.radius > 0.0, "actor.radius must be > 0")?;
        if let ActorSelect::SizeRange([lo, hi]) = self.actor.select {
            check(lo <= hi, "actor.select.size_range needs min <= max")?;
        }
        check(self.contacts.contact_dist > 0.0, "contacts.contact_dist must be > 0")?;
        check(self.contacts.min_duration >= 1, "contacts.min_duration must be >= 1")?;
        let o = &self.objects;
        check(o.attention_radius > 0.0, "objects.attention_radius must be > 0")?;
        check(o.sigma > 0.0, "objects.sigma must be > 0")?;
        check(o.ransac_inlier_dist > 0.0, "objects.ransac_inlier_dist must be > 0")?;
        check(o.ransac_iterations >= 1, "objects.ransac_iterations must be >= 1")?;
        check(o.kmeans_restarts >= 1, "objects.kmeans_restarts must be >= 1")?;
        Ok(())
    }
}
