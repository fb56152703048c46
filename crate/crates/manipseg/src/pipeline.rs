//! File-based pipeline: each stage reads its inputs from the run directory
//! and writes its artifacts back, so `run` is exactly the staged chain.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use manipseg_core::actor::{nearest_point, segment_by_component, segment_by_seed, ActorSegmentation};
use manipseg_core::contact::detect_contacts;
use manipseg_core::object::segment_object;
use manipseg_core::tracker::track_from_model;
use manipseg_core::{
    back_project_with, estimate_normals, voxel_downsample, Error as CoreError, Label, LabeledTrajectorySet, Point,
    PointCloud, TrajectorySet, Vec3,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, InputFormat, PipelineConfig};
use crate::error::FormatError;
use crate::formats::{
    read_json_file, read_trajectories_file, write_json_file, write_trajectories_file, write_warp_binary,
    ContactRecord, LabelsFile, ObjectRecord,
};
use crate::ply::{read_ply_file, write_ply_file, PlyEncoding};
use crate::rgbd::{read_intrinsics, read_rgbd};

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const LABELS: &str = "labels.json";
pub const CONTACTS: &str = "contacts.json";
pub const MANIFEST: &str = "manifest.json";
pub const MODEL: &str = "model.ply";
pub const WARPS: &str = "warps";

pub fn object_file(k: usize) -> String {
    format!("object_{k}.json")
}

pub fn overlay_dir(k: usize) -> String {
    format!("object_{k}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Track,
    SegmentActor,
    Contacts,
    SegmentObjects,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Track, Stage::SegmentActor, Stage::Contacts, Stage::SegmentObjects];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Track => "track",
            Stage::SegmentActor => "segment-actor",
            Stage::Contacts => "contacts",
            Stage::SegmentObjects => "segment-objects",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Input(String),
    #[error("track: frame {frame}: {reason}")]
    Track { frame: usize, reason: String },
    #[error("segment-actor: {0}")]
    Actor(String),
    #[error("contacts: {0}")]
    Contacts(String),
    #[error("segment-objects: event {event} (frames {start}..={end}): {reason}")]
    Objects {
        event: usize,
        start: usize,
        end: usize,
        reason: String,
    },
    #[error("{stage}: missing upstream artifact {}", path.display())]
    Dependency { stage: &'static str, path: PathBuf },
    #[error("{stage}: {source}")]
    Io {
        stage: &'static str,
        #[source]
        source: FormatError,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. } => 1,
            PipelineError::Config(_) => 2,
            PipelineError::Input(_) => 3,
            PipelineError::Track { .. } => 4,
            PipelineError::Actor(_) => 5,
            PipelineError::Contacts(_) => 6,
            PipelineError::Objects { .. } => 7,
            PipelineError::Dependency { .. } => 8,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn io(stage: Stage) -> impl Fn(FormatError) -> PipelineError {
    move |source| PipelineError::Io {
        stage: stage.name(),
        source,
    }
}

/// Read an upstream artifact; a missing file is a dependency error.
fn upstream<T>(stage: Stage, path: &Path, read: impl FnOnce(&Path) -> std::result::Result<T, FormatError>) -> Result<T> {
    if !path.exists() {
        return Err(PipelineError::Dependency {
            stage: stage.name(),
            path: path.to_path_buf(),
        });
    }
    read(path).map_err(io(stage))
}

// ---------------------------------------------------------------- input

fn sorted_files(dir: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| PipelineError::Input(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(&keep))
        .collect();
    files.sort();
    Ok(files)
}

/// Load the input frames named by the config, in sequence order.
pub fn load_frames(cfg: &PipelineConfig) -> Result<Vec<PointCloud>> {
    let dir = &cfg.input.path;
    let bad = |e: FormatError| PipelineError::Input(e.to_string());
    let frames = match cfg.input.format {
        InputFormat::Ply => sorted_files(dir, |n| n.to_ascii_lowercase().ends_with(".ply"))?
            .iter()
            .map(|p| read_ply_file(p).map_err(bad))
            .collect::<Result<Vec<_>>>()?,
        InputFormat::Rgbd => {
            let depths = sorted_files(dir, |n| n.starts_with("depth_") && n.ends_with(".png"))?;
            if depths.is_empty() {
                Vec::new()
            } else {
                let k = read_intrinsics(&dir.join("intrinsics.json")).map_err(bad)?;
                depths
                    .iter()
                    .map(|d| {
                        let name = d.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                        let c = dir.join(name.replacen("depth_", "color_", 1));
                        let frame = read_rgbd(d, &c, &k, cfg.input.depth_scale).map_err(bad)?;
                        back_project_with(&frame, cfg.input.max_depth)
                            .map_err(|e| PipelineError::Input(format!("{}: {e}", d.display())))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        }
    };
    if frames.len() < 2 {
        return Err(PipelineError::Input(format!(
            "{} holds {} usable frame(s); at least 2 are needed",
            dir.display(),
            frames.len()
        )));
    }
    if frames[0].is_empty() {
        return Err(PipelineError::Input("first frame has no points".into()));
    }
    Ok(frames)
}

fn with_normals(cloud: PointCloud, cfg: &PipelineConfig) -> std::result::Result<PointCloud, CoreError> {
    if cloud.normals().is_some() && !cfg.model.estimate_normals {
        return Ok(cloud);
    }
    // camera at the origin
    Ok(estimate_normals(&cloud, cfg.model.normal_k, &Point::origin())?.cloud)
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    #[serde(default)]
    pub summary: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    /// Seeds of every randomized step, also present in `config`.
    pub seeds: BTreeMap<String, u64>,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    fn new(cfg: &PipelineConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            seeds: BTreeMap::from([
                ("ransac".into(), cfg.objects.ransac_seed),
                ("kmeans".into(), cfg.objects.cluster_seed),
            ]),
            stages: BTreeMap::new(),
        }
    }
}

fn record_stage(cfg: &PipelineConfig, stage: Stage, started: Instant, summary: BTreeMap<String, serde_json::Value>) -> Result<()> {
    let path = cfg.output.join(MANIFEST);
    let mut manifest = match read_json_file::<Manifest>(&path) {
        Ok(m) => Manifest {
            config: cfg.clone(),
            ..m
        },
        Err(_) => Manifest::new(cfg),
    };
    manifest.seeds = Manifest::new(cfg).seeds;
    // timings vary run to run, so they are logged rather than recorded
    log::info!("{}: done in {:.1} s", stage.name(), started.elapsed().as_secs_f64());
    manifest.stages.insert(stage.name().into(), StageRecord { summary });
    write_json_file(&path, &manifest).map_err(io(stage))
}

fn summary<const N: usize>(items: [(&str, serde_json::Value); N]) -> BTreeMap<String, serde_json::Value> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn prepare_output(cfg: &PipelineConfig, stage: Stage) -> Result<()> {
    fs::create_dir_all(&cfg.output).map_err(|e| io(stage)(FormatError::from(e).at(&cfg.output)))
}

// ---------------------------------------------------------------- stages

pub fn run_track(cfg: &PipelineConfig) -> Result<()> {
    let started = Instant::now();
    let frames = load_frames(cfg)?;
    let mut frames = frames.into_iter();
    let first = frames.next().expect("checked length");
    let first = with_normals(first, cfg).map_err(|e| PipelineError::Input(format!("frame 0: {e}")))?;
    let model = if cfg.model.voxel_leaf > 0.0 {
        voxel_downsample(&first, cfg.model.voxel_leaf)
            .map_err(|e| PipelineError::Input(format!("frame 0: {e}")))?
            .0
    } else {
        first
    };
    let rest = frames
        .enumerate()
        .map(|(k, f)| with_normals(f, cfg).map_err(|e| PipelineError::Input(format!("frame {}: {e}", k + 1))))
        .collect::<Result<Vec<_>>>()?;
    log::info!("track: model has {} points, {} frames", model.len(), rest.len() + 1);

    let params = cfg.registration.params();
    let out = track_from_model(model.clone(), &rest, &params, |frame, report| {
        log::info!(
            "track: frame {frame}: {} ICP iterations, {} correspondences, {} steps",
            report.icp_iterations,
            report.correspondences.last().copied().unwrap_or(0),
            report.steps.len()
        );
    })
    .map_err(|e| match e {
        CoreError::Tracking { frame, reason } => PipelineError::Track {
            frame,
            reason: reason.to_string(),
        },
        e => PipelineError::Track {
            frame: 0,
            reason: e.to_string(),
        },
    })?;

    prepare_output(cfg, Stage::Track)?;
    let dir = &cfg.output;
    write_ply_file(&dir.join(MODEL), &model, PlyEncoding::BinaryLittleEndian).map_err(io(Stage::Track))?;
    write_trajectories_file(&dir.join(TRAJECTORIES), &out.trajectories, None).map_err(io(Stage::Track))?;
    let warp_dir = dir.join(WARPS);
    fs::create_dir_all(&warp_dir).map_err(|e| io(Stage::Track)(FormatError::from(e).at(&warp_dir)))?;
    for (k, warp) in out.warps.iter().enumerate() {
        let path = warp_dir.join(format!("warp_{:04}.bin", k + 1));
        fs::File::create(&path)
            .map_err(FormatError::from)
            .and_then(|f| write_warp_binary(std::io::BufWriter::new(f), warp))
            .map_err(|e| io(Stage::Track)(e.at(&path)))?;
    }
    record_stage(
        cfg,
        Stage::Track,
        started,
        summary([
            ("frames", out.trajectories.frame_count().into()),
            ("model_points", out.trajectories.point_count().into()),
        ]),
    )
}

fn load_trajectories(cfg: &PipelineConfig, stage: Stage) -> Result<TrajectorySet> {
    upstream(stage, &cfg.output.join(TRAJECTORIES), read_trajectories_file).map(|(t, _)| t)
}

fn load_labeled(cfg: &PipelineConfig, stage: Stage) -> Result<LabeledTrajectorySet> {
    let traj = load_trajectories(cfg, stage)?;
    let labels = upstream(stage, &cfg.output.join(LABELS), read_json_file::<LabelsFile>)?;
    let labels = labels
        .to_labels(traj.point_count())
        .map_err(|e| io(stage)(e.at(&cfg.output.join(LABELS))))?;
    LabeledTrajectorySet::new(traj, labels).map_err(|e| io(stage)(e.into()))
}

pub fn segment_actor(cfg: &PipelineConfig, model: &PointCloud) -> std::result::Result<ActorSegmentation, CoreError> {
    match cfg.actor.seed {
        Some([x, y, z]) => {
            let seed = nearest_point(model, &Point::new(x, y, z))?;
            segment_by_seed(model, seed, cfg.actor.radius)
        }
        None => segment_by_component(model, cfg.actor.radius, &cfg.actor.select.selector()),
    }
}

pub fn run_segment_actor(cfg: &PipelineConfig) -> Result<()> {
    let started = Instant::now();
    let traj = load_trajectories(cfg, Stage::SegmentActor)?;
    let seg = segment_actor(cfg, traj.state(0)).map_err(|e| PipelineError::Actor(e.to_string()))?;
    if seg.actor.len() == traj.point_count() {
        return Err(PipelineError::Actor("every model point was labeled actor".into()));
    }
    if seg.fragile {
        log::warn!(
            "segment-actor: the actor splits at half the radius ({} m); labels may be fragile",
            cfg.actor.radius / 2.0
        );
    }
    log::info!("segment-actor: {} actor points of {}", seg.actor.len(), traj.point_count());
    let dir = &cfg.output;
    write_json_file(&dir.join(LABELS), &LabelsFile::from_labels(&seg.labels)).map_err(io(Stage::SegmentActor))?;
    write_trajectories_file(&dir.join(TRAJECTORIES), &traj, Some(&seg.labels)).map_err(io(Stage::SegmentActor))?;
    record_stage(
        cfg,
        Stage::SegmentActor,
        started,
        summary([("actor_points", seg.actor.len().into()), ("fragile", seg.fragile.into())]),
    )
}

pub fn run_contacts(cfg: &PipelineConfig) -> Result<()> {
    let started = Instant::now();
    let traj = load_labeled(cfg, Stage::Contacts)?;
    let events = detect_contacts(&traj, cfg.contacts.contact_dist, cfg.contacts.min_duration)
        .map_err(|e| PipelineError::Contacts(e.to_string()))?;
    for e in &events {
        log::info!("contacts: frames {}..={}, {} background points", e.start_frame, e.end_frame, e.background_points.len());
    }
    let records: Vec<ContactRecord> = events.iter().map(ContactRecord::from).collect();
    write_json_file(&cfg.output.join(CONTACTS), &records).map_err(io(Stage::Contacts))?;
    record_stage(cfg, Stage::Contacts, started, summary([("events", events.len().into())]))
}

const SEGMENT_COLOR: [f64; 3] = [0.9, 0.1, 0.1];
const ACTOR_COLOR: [f64; 3] = [0.1, 0.3, 0.9];
const OTHER_COLOR: [f64; 3] = [0.6, 0.6, 0.6];

fn overlay(state: &PointCloud, labels: &[Label], segment: &[usize]) -> PointCloud {
    let mut colors: Vec<Vec3> = labels
        .iter()
        .map(|l| Vec3::from(if *l == Label::Actor { ACTOR_COLOR } else { OTHER_COLOR }))
        .collect();
    for &i in segment {
        colors[i] = Vec3::from(SEGMENT_COLOR);
    }
    PointCloud::new(state.positions().to_vec())
        .with_colors(colors)
        .expect("palette is in range")
}

fn clear_object_outputs(dir: &Path) -> Result<()> {
    let Ok(entries) = fs::read_dir(dir) else { return Ok(()) };
    for e in entries.flatten() {
        let name = e.file_name().to_string_lossy().into_owned();
        let Some(rest) = name.strip_prefix("object_") else { continue };
        let id = rest.strip_suffix(".json").unwrap_or(rest);
        if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let path = e.path();
        let removed = if path.is_dir() { fs::remove_dir_all(&path) } else { fs::remove_file(&path) };
        removed.map_err(|err| io(Stage::SegmentObjects)(FormatError::from(err).at(&path)))?;
    }
    Ok(())
}

pub fn run_segment_objects(cfg: &PipelineConfig) -> Result<()> {
    let started = Instant::now();
    let traj = load_labeled(cfg, Stage::SegmentObjects)?;
    let records: Vec<ContactRecord> =
        upstream(Stage::SegmentObjects, &cfg.output.join(CONTACTS), read_json_file)?;
    let params = cfg.objects.params();
    let dir = &cfg.output;
    clear_object_outputs(dir)?;
    let encoding = if cfg.ascii_overlays {
        PlyEncoding::Ascii
    } else {
        PlyEncoding::BinaryLittleEndian
    };

    let mut failure = None;
    let mut written = 0usize;
    for (k, rec) in records.iter().enumerate() {
        let objects_err = |reason: String| PipelineError::Objects {
            event: k,
            start: rec.start,
            end: rec.end,
            reason,
        };
        let event = match rec.to_event() {
            Ok(e) => e,
            Err(e) => {
                failure.get_or_insert(objects_err(e.to_string()));
                continue;
            }
        };
        let result = match segment_object(&traj, &event, &params) {
            Ok(r) => r,
            Err(e) => {
                let reason = match &e {
                    CoreError::ObjectLost { inlier_counts } => format!("{e}; inliers per frame {inlier_counts:?}"),
                    _ => e.to_string(),
                };
                log::error!("segment-objects: event {k}: {reason}");
                failure.get_or_insert(objects_err(reason));
                continue;
            }
        };
        log::info!(
            "segment-objects: event {k}: {} segment points, {} in the initial cluster",
            result.segment.len(),
            result.initial_cluster.len()
        );
        write_json_file(&dir.join(object_file(k)), &ObjectRecord::from(&result)).map_err(io(Stage::SegmentObjects))?;
        let odir = dir.join(overlay_dir(k));
        fs::create_dir_all(&odir).map_err(|e| io(Stage::SegmentObjects)(FormatError::from(e).at(&odir)))?;
        for f in result.window.frames() {
            let cloud = overlay(traj.trajectories.state(f), traj.labels(), &result.segment);
            write_ply_file(&odir.join(format!("frame_{f:04}.ply")), &cloud, encoding).map_err(io(Stage::SegmentObjects))?;
        }
        written += 1;
    }
    record_stage(
        cfg,
        Stage::SegmentObjects,
        started,
        summary([("events", records.len().into()), ("objects", written.into())]),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<()> {
    match stage {
        Stage::Track => run_track(cfg),
        Stage::SegmentActor => run_segment_actor(cfg),
        Stage::Contacts => run_contacts(cfg),
        Stage::SegmentObjects => run_segment_objects(cfg),
    }
}

/// Every stage in order.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    for stage in Stage::ALL {
        run_stage(cfg, stage)?;
    }
    Ok(())
}
