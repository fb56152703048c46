//! Piecewise-rigid synthetic scenes with ground truth, and scoring of
//! pipeline outputs against it.

use std::fs;
use std::path::{Path, PathBuf};

use manipseg_core::contact::detect_contacts;
use manipseg_core::object::{rotation_angle, RigidPose};
use manipseg_core::{Label, LabeledTrajectorySet, Point, PointCloud, TrajectorySet, Vec3};
use nalgebra::{Rotation3, Unit, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{InputFormat, PipelineConfig};
use crate::error::{FormatError, FormatResult};
use crate::formats::{
    read_json_file, read_trajectories_file, write_json_file, ContactRecord, LabelsFile, ObjectRecord, PoseRecord,
};
use crate::pipeline::{object_file, CONTACTS, LABELS, TRAJECTORIES};
use crate::ply::{write_ply_file, PlyEncoding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Surface of an axis-aligned box, grid-sampled at roughly `spacing`.
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
        spacing: f64,
    },
    /// Sphere surface, Fibonacci-sampled at roughly `spacing`.
    Sphere { center: [f64; 3], radius: f64, spacing: f64 },
}

/// Body motion at a frame: rotation by `angle_deg` about `axis` through the
/// body's pivot, then a shift by `offset`. Between keyframes the motion is
/// eased (smoothstep) from one to the next; outside them it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub frame: usize,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub angle_deg: f64,
    #[serde(default)]
    pub offset: [f64; 3],
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub name: String,
    pub shape: Shape,
    pub color: [f64; 3],
    #[serde(default)]
    pub pivot: [f64; 3],
    #[serde(default)]
    pub keyframes: Vec<Keyframe>,
    /// Body this one rides on: its own keyframed motion is applied first,
    /// then the parent's pose.
    #[serde(default)]
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub frames: usize,
    /// Std of isotropic Gaussian position noise (m), drawn afresh per frame.
    pub noise_sigma: f64,
    pub seed: u64,
    pub bodies: Vec<BodySpec>,
    pub actor: usize,
    /// The body the actor manipulates, if any.
    #[serde(default)]
    pub object: Option<usize>,
    /// Hinge direction of a purely rotating object.
    #[serde(default)]
    pub hinge_axis: Option<[f64; 3]>,
    /// Thresholds used to derive the true contact intervals.
    #[serde(default = "default_contact_dist")]
    pub contact_dist: f64,
    #[serde(default = "default_min_duration")]
    pub min_duration: usize,
}

fn default_contact_dist() -> f64 {
    manipseg_core::contact::DEFAULT_CONTACT_DIST
}

fn default_min_duration() -> usize {
    manipseg_core::contact::DEFAULT_MIN_DURATION
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn p3(a: [f64; 3]) -> Point {
    Point::new(a[0], a[1], a[2])
}

fn sample_shape(shape: &Shape) -> (Vec<Point>, Vec<Vec3>) {
    let mut pts = Vec::new();
    let mut nrm = Vec::new();
    match shape {
        Shape::Box {
            center,
            half_extents,
            spacing,
        } => {
            let (c, h) = (p3(*center), v3(*half_extents));
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let nu = ((2.0 * h[u] / spacing).round() as usize).max(1);
                let nv = ((2.0 * h[v] / spacing).round() as usize).max(1);
                for sign in [-1.0, 1.0] {
                    for i in 0..nu {
                        for j in 0..nv {
                            let mut off = Vec3::zeros();
                            off[axis] = sign * h[axis];
                            off[u] = h[u] * (-1.0 + 2.0 * (i as f64 + 0.5) / nu as f64);
                            off[v] = h[v] * (-1.0 + 2.0 * (j as f64 + 0.5) / nv as f64);
                            pts.push(c + off);
                            let mut n = Vec3::zeros();
                            n[axis] = sign;
                            nrm.push(n);
                        }
                    }
                }
            }
        }
        Shape::Sphere {
            center,
            radius,
            spacing,
        } => {
            let n = ((4.0 * std::f64::consts::PI * radius * radius / (spacing * spacing)).round() as usize).max(4);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..n {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let th = golden * i as f64;
                let dir = Vec3::new(r * th.cos(), y, r * th.sin());
                pts.push(p3(*center) + dir * *radius);
                nrm.push(dir);
            }
        }
    }
    (pts, nrm)
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn keyframe_rotation(k: &Keyframe) -> UnitQuaternion<f64> {
    if k.angle_deg == 0.0 || v3(k.axis).norm() == 0.0 {
        UnitQuaternion::identity()
    } else {
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(v3(k.axis)), k.angle_deg.to_radians())
    }
}

/// Own (parent-free) motion of a body at `frame`.
fn own_pose(body: &BodySpec, frame: usize) -> RigidPose {
    let kf = &body.keyframes;
    if kf.is_empty() {
        return RigidPose::identity();
    }
    let (q, off) = match kf.iter().position(|k| k.frame > frame) {
        Some(0) => (keyframe_rotation(&kf[0]), v3(kf[0].offset)),
        None => {
            let last = kf.last().unwrap();
            (keyframe_rotation(last), v3(last.offset))
        }
        Some(b) => {
            let (ka, kb) = (&kf[b - 1], &kf[b]);
            let s = smoothstep((frame - ka.frame) as f64 / (kb.frame - ka.frame) as f64);
            let (qa, qb) = (keyframe_rotation(ka), keyframe_rotation(kb));
            (qa.slerp(&qb, s), v3(ka.offset) * (1.0 - s) + v3(kb.offset) * s)
        }
    };
    let r = *q.to_rotation_matrix().matrix();
    let pivot = p3(body.pivot);
    RigidPose::new(r, pivot.coords - r * pivot.coords + off)
}

impl Scenario {
    pub fn validate(&self) -> FormatResult<()> {
        let bad = |m: String| Err(FormatError::Malformed(format!("scenario '{}': {m}", self.name)));
        if self.bodies.is_empty() {
            return bad("needs at least one body".into());
        }
        if self.frames < 2 {
            return bad("needs at least two frames".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be >= 0".into());
        }
        if self.actor >= self.bodies.len() || self.object.is_some_and(|o| o >= self.bodies.len() || o == self.actor) {
            return bad("actor/object body index out of range".into());
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if b.keyframes.windows(2).any(|w| w[0].frame >= w[1].frame) {
                return bad(format!("body {i}: keyframes must have increasing frames"));
            }
            // parents must come first so poses resolve in one pass
            if b.parent.is_some_and(|p| p >= i) {
                return bad(format!("body {i}: parent must be an earlier body"));
            }
            let spacing = match b.shape {
                Shape::Box { spacing, .. } | Shape::Sphere { spacing, .. } => spacing,
            };
            if !(spacing > 0.0) {
                return bad(format!("body {i}: spacing must be > 0"));
            }
        }
        Ok(())
    }

    /// World pose of every body at every frame, `[frame][body]`.
    pub fn body_poses(&self) -> Vec<Vec<RigidPose>> {
        (0..self.frames)
            .map(|f| {
                let mut poses: Vec<RigidPose> = Vec::with_capacity(self.bodies.len());
                for b in &self.bodies {
                    let own = own_pose(b, f);
                    poses.push(match b.parent {
                        Some(p) => poses[p].compose(&own),
                        None => own,
                    });
                }
                poses
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyTruth {
    pub name: String,
    /// Point index range `[start, end)`.
    pub range: [usize; 2],
    pub poses: Vec<PoseRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub scenario: String,
    pub frames: usize,
    /// Body-frame sample positions; world position at `t` is the body pose applied to these.
    pub points: Vec<[f64; 3]>,
    pub bodies: Vec<BodyTruth>,
    pub actor_indices: Vec<usize>,
    pub contacts: Vec<Interval>,
    pub object_indices: Vec<usize>,
    /// Object motion relative to frame 0, one per frame.
    pub object_poses: Vec<PoseRecord>,
    pub hinge_axis: Option<[f64; 3]>,
}

impl Truth {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    fn body_of(&self) -> Vec<usize> {
        let mut owner = vec![0; self.points.len()];
        for (b, body) in self.bodies.iter().enumerate() {
            for o in &mut owner[body.range[0]..body.range[1]] {
                *o = b;
            }
        }
        owner
    }

    /// Noise-free trajectories of every point.
    pub fn trajectories(&self) -> TrajectorySet {
        let owner = self.body_of();
        let poses: Vec<Vec<RigidPose>> = self.bodies.iter().map(|b| b.poses.iter().map(PoseRecord::pose).collect()).collect();
        TrajectorySet::new(
            (0..self.frames)
                .map(|f| {
                    PointCloud::new(
                        self.points
                            .iter()
                            .zip(&owner)
                            .map(|(p, &b)| poses[b][f].apply(&p3(*p)))
                            .collect(),
                    )
                })
                .collect(),
        )
        .expect("equal point counts")
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut l = vec![Label::Background; self.points.len()];
        for &i in &self.actor_indices {
            l[i] = Label::Actor;
        }
        l
    }

    /// Object motion from frame `from` to frame `to`.
    pub fn object_motion(&self, from: usize, to: usize) -> RigidPose {
        let a = self.object_poses[from].pose();
        self.object_poses[to].pose().compose(&a.inverse())
    }
}

pub struct SyntheticRun {
    pub frames: Vec<PointCloud>,
    pub truth: Truth,
}

/// Sample, move and perturb every body.
pub fn generate(scn: &Scenario) -> FormatResult<SyntheticRun> {
    scn.validate()?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let mut owner = Vec::new();
    let mut ranges = Vec::new();
    for (b, body) in scn.bodies.iter().enumerate() {
        let (p, n) = sample_shape(&body.shape);
        let start = points.len();
        owner.extend(std::iter::repeat_n(b, p.len()));
        colors.extend(std::iter::repeat_n(v3(body.color), p.len()));
        points.extend(p);
        normals.extend(n);
        ranges.push([start, points.len()]);
    }
    let poses = scn.body_poses();
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let noise = Normal::new(0.0, scn.noise_sigma.max(0.0)).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let mut frames = Vec::with_capacity(scn.frames);
    for pose in &poses {
        let mut pos = Vec::with_capacity(points.len());
        let mut nrm = Vec::with_capacity(points.len());
        for ((p, n), &b) in points.iter().zip(&normals).zip(&owner) {
            let jitter = if scn.noise_sigma > 0.0 {
                Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                Vec3::zeros()
            };
            pos.push(pose[b].apply(p) + jitter);
            nrm.push(pose[b].rotation * n);
        }
        frames.push(PointCloud::from_parts(pos, Some(nrm), Some(colors.clone()))?);
    }

    let bodies: Vec<BodyTruth> = scn
        .bodies
        .iter()
        .enumerate()
        .map(|(b, body)| BodyTruth {
            name: body.name.clone(),
            range: ranges[b],
            poses: poses.iter().enumerate().map(|(f, p)| PoseRecord::new(f, &p[b])).collect(),
        })
        .collect();
    let actor_indices: Vec<usize> = (ranges[scn.actor][0]..ranges[scn.actor][1]).collect();
    let mut truth = Truth {
        scenario: scn.name.clone(),
        frames: scn.frames,
        points: points.iter().map(|p| [p.x, p.y, p.z]).collect(),
        bodies,
        actor_indices,
        contacts: Vec::new(),
        object_indices: scn.object.map_or(Vec::new(), |o| (ranges[o][0]..ranges[o][1]).collect()),
        object_poses: Vec::new(),
        hinge_axis: scn.hinge_axis,
    };
    truth.object_poses = match scn.object {
        Some(o) => poses
            .iter()
            .enumerate()
            .map(|(f, p)| PoseRecord::new(f, &p[o].compose(&poses[0][o].inverse())))
            .collect(),
        None => Vec::new(),
    };
    let clean = LabeledTrajectorySet::new(truth.trajectories(), truth.labels())?;
    truth.contacts = detect_contacts(&clean, scn.contact_dist, scn.min_duration)?
        .into_iter()
        .map(|e| Interval {
            start: e.start_frame,
            end: e.end_frame,
        })
        .collect();
    truth.contacts.dedup();
    Ok(SyntheticRun { frames, truth })
}

// ---------------------------------------------------------------- canned scenes

// Bodies are kept at least 4 cm apart: closer than the k-th neighbor spacing,
// the frame-0 regularization graph links them and a few such edges can pin a
// moving body to a static one.
const SPACING: f64 = 0.012;
const NOISE: f64 = 0.002;
const SKIN: [f64; 3] = [0.85, 0.6, 0.45];

fn kf(frame: usize, offset: [f64; 3]) -> Keyframe {
    Keyframe {
        frame,
        axis: default_axis(),
        angle_deg: 0.0,
        offset,
    }
}

fn kf_rot(frame: usize, axis: [f64; 3], angle_deg: f64, offset: [f64; 3]) -> Keyframe {
    Keyframe {
        frame,
        axis,
        angle_deg,
        offset,
    }
}

fn hand(center: [f64; 3], keyframes: Vec<Keyframe>, parent: usize) -> BodySpec {
    BodySpec {
        name: "hand".into(),
        shape: Shape::Sphere {
            center,
            radius: 0.04,
            spacing: SPACING,
        },
        color: SKIN,
        pivot: [0.0; 3],
        keyframes,
        parent: Some(parent),
    }
}

/// A drawer pulled straight out of a cabinet towards the camera.
pub fn drawer() -> Scenario {
    let cabinet = BodySpec {
        name: "cabinet".into(),
        shape: Shape::Box {
            center: [0.0, 0.05, 0.95],
            half_extents: [0.2, 0.16, 0.15],
            spacing: SPACING * 1.6,
        },
        color: [0.55, 0.4, 0.25],
        pivot: [0.0; 3],
        keyframes: vec![],
        parent: None,
    };
    let drawer = BodySpec {
        name: "drawer".into(),
        shape: Shape::Box {
            center: [0.0, 0.0, 0.73],
            half_extents: [0.12, 0.06, 0.03],
            spacing: SPACING,
        },
        color: [0.2, 0.6, 0.3],
        pivot: [0.0; 3],
        keyframes: vec![kf(8, [0.0; 3]), kf(20, [0.0, 0.0, -0.16])],
        parent: None,
    };
    // hand in front of the drawer face (z = 0.70), 1 cm off it once in contact
    let contact = [0.0, 0.0, 0.70 - 0.01 - 0.04];
    let hand = hand(
        contact,
        vec![
            kf(0, [0.25, 0.2, -0.05]),
            kf(4, [0.0, 0.0, -0.06]),
            kf(6, [0.0; 3]),
            kf(22, [0.0; 3]),
            kf(24, [0.0, 0.06, -0.06]),
            kf(26, [0.2, 0.2, -0.08]),
        ],
        1,
    );
    Scenario {
        name: "drawer".into(),
        frames: 27,
        noise_sigma: NOISE,
        seed: 11,
        bodies: vec![cabinet, drawer, hand],
        actor: 2,
        object: Some(1),
        hinge_axis: None,
        contact_dist: default_contact_dist(),
        min_duration: default_min_duration(),
    }
}

/// A box picked up from a table, lifted and turned over in the air.
pub fn pitcher() -> Scenario {
    let table = BodySpec {
        name: "table".into(),
        shape: Shape::Box {
            center: [0.0, 0.17, 0.85],
            half_extents: [0.3, 0.02, 0.22],
            spacing: SPACING * 1.6,
        },
        color: [0.5, 0.5, 0.55],
        pivot: [0.0; 3],
        keyframes: vec![],
        parent: None,
    };
    // camera y points down, so "up" is -y; the pitcher stands 4 cm above the table top (y = 0.15)
    let center = [0.0, 0.03, 0.85];
    let pitcher = BodySpec {
        name: "pitcher".into(),
        shape: Shape::Box {
            center,
            half_extents: [0.045, 0.08, 0.045],
            spacing: SPACING,
        },
        color: [0.2, 0.35, 0.8],
        pivot: center,
        keyframes: vec![
            kf_rot(8, [0.0, 0.0, 1.0], 0.0, [0.0; 3]),
            kf_rot(22, [0.0, 0.0, 1.0], -80.0, [-0.06, -0.1, 0.0]),
        ],
        parent: None,
    };
    // hand on the +x side, 1 cm off the face at x = 0.045
    let contact = [0.045 + 0.01 + 0.04, 0.03, 0.85];
    let hand = hand(
        contact,
        vec![
            kf(0, [0.2, -0.15, -0.05]),
            kf(4, [0.06, 0.0, 0.0]),
            kf(6, [0.0; 3]),
            kf(24, [0.0; 3]),
            kf(26, [0.06, 0.0, 0.0]),
            kf(28, [0.2, -0.1, -0.05]),
        ],
        1,
    );
    Scenario {
        name: "pitcher".into(),
        frames: 29,
        noise_sigma: NOISE,
        seed: 12,
        bodies: vec![table, pitcher, hand],
        actor: 2,
        object: Some(1),
        hinge_axis: None,
        contact_dist: default_contact_dist(),
        min_duration: default_min_duration(),
    }
}

/// A door panel swung open about a vertical hinge next to a static frame.
pub fn door() -> Scenario {
    let frame = BodySpec {
        name: "frame".into(),
        shape: Shape::Box {
            center: [-0.3, 0.0, 0.9],
            half_extents: [0.06, 0.22, 0.05],
            spacing: SPACING * 1.3,
        },
        color: [0.6, 0.55, 0.5],
        pivot: [0.0; 3],
        keyframes: vec![],
        parent: None,
    };
    // panel spans x in [-0.2, 0.1]; hinge line at x = -0.2, z = 0.9, along y
    let hinge = [-0.2, 0.0, 0.9];
    let door = BodySpec {
        name: "door".into(),
        shape: Shape::Box {
            center: [-0.05, 0.0, 0.9],
            half_extents: [0.15, 0.2, 0.015],
            spacing: SPACING,
        },
        color: [0.7, 0.3, 0.2],
        pivot: hinge,
        keyframes: vec![
            kf_rot(8, [0.0, 1.0, 0.0], 0.0, [0.0; 3]),
            kf_rot(18, [0.0, 1.0, 0.0], 45.0, [0.0; 3]),
        ],
        parent: None,
    };
    // hand pushing the camera-facing side (z = 0.885) near the free edge
    let contact = [0.05, 0.0, 0.885 - 0.01 - 0.04];
    let hand = hand(
        contact,
        vec![
            kf(0, [0.15, -0.2, -0.1]),
            kf(4, [0.0, 0.0, -0.06]),
            kf(6, [0.0; 3]),
            kf(20, [0.0; 3]),
            kf(22, [0.0, 0.0, -0.06]),
            kf(24, [0.15, -0.2, -0.1]),
        ],
        1,
    );
    Scenario {
        name: "door".into(),
        frames: 25,
        noise_sigma: NOISE,
        seed: 13,
        bodies: vec![frame, door, hand],
        actor: 2,
        object: Some(1),
        hinge_axis: Some([0.0, 1.0, 0.0]),
        contact_dist: default_contact_dist(),
        min_duration: default_min_duration(),
    }
}

pub fn canned(name: &str) -> Option<Scenario> {
    match name {
        "drawer" => Some(drawer()),
        "pitcher" | "pitcher-flip" => Some(pitcher()),
        "door" => Some(door()),
        _ => None,
    }
}

pub const CANNED: [&str; 3] = ["pitcher", "drawer", "door"];

/// Frames directory, truth and a pipeline config ready for `run`.
pub fn pipeline_config_for(scn: &Scenario, truth: &Truth) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.input.path = PathBuf::from("frames");
    cfg.input.format = InputFormat::Ply;
    cfg.output = PathBuf::from("run");
    // keep every sample so model indices are truth indices
    cfg.model.voxel_leaf = 0.0;
    let actor: Vec<Point> = truth.actor_indices.iter().map(|&i| p3(truth.points[i])).collect();
    let pose = truth.bodies[scn.actor].poses[0].pose();
    let c = pose.apply(&manipseg_core::cloud::centroid(&actor).expect("actor has points"));
    // the hand sphere is hollow; its surface point nearest the centre seeds the growth
    cfg.actor.seed = Some([c.x, c.y, c.z]);
    cfg.contacts.contact_dist = scn.contact_dist;
    cfg.contacts.min_duration = scn.min_duration;
    cfg
}

pub fn write_scenario(scn: &Scenario, dir: &Path) -> FormatResult<Truth> {
    let run = generate(scn)?;
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| FormatError::from(e).at(&frames_dir))?;
    for (f, cloud) in run.frames.iter().enumerate() {
        write_ply_file(&frames_dir.join(format!("frame_{f:04}.ply")), cloud, PlyEncoding::BinaryLittleEndian)?;
    }
    write_json_file(&dir.join("scenario.json"), scn)?;
    write_json_file(&dir.join("truth.json"), &run.truth)?;
    write_json_file(&dir.join("config.json"), &pipeline_config_for(scn, &run.truth))?;
    Ok(run.truth)
}

// ---------------------------------------------------------------- scoring

/// What the pipeline produced, as read back from a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub trajectories: TrajectorySet,
    pub labels: Vec<Label>,
    pub contacts: Vec<Interval>,
    pub objects: Vec<ObjectRecord>,
}

impl RunOutputs {
    pub fn load(run: &Path) -> FormatResult<Self> {
        let (trajectories, _) = read_trajectories_file(&run.join(TRAJECTORIES))?;
        let labels = read_json_file::<LabelsFile>(&run.join(LABELS))?
            .to_labels(trajectories.point_count())
            .map_err(|e| e.at(&run.join(LABELS)))?;
        let contacts: Vec<ContactRecord> = read_json_file(&run.join(CONTACTS))?;
        let mut objects = Vec::new();
        for k in 0..contacts.len() {
            let path = run.join(object_file(k));
            if path.exists() {
                objects.push(read_json_file(&path)?);
            }
        }
        Ok(Self {
            trajectories,
            labels,
            contacts: contacts.iter().map(|c| Interval { start: c.start, end: c.end }).collect(),
            objects,
        })
    }

    /// The outputs a perfect pipeline would produce.
    pub fn from_truth(truth: &Truth) -> Self {
        let objects = truth
            .contacts
            .iter()
            .map(|c| ObjectRecord {
                segment: truth.object_indices.clone(),
                initial_cluster: truth.object_indices.clone(),
                poses: (c.start..=c.end)
                    .map(|f| PoseRecord::new(f, &truth.object_motion(c.start, f)))
                    .collect(),
                candidates: Vec::new(),
                ransac_poses: Vec::new(),
                inlier_counts: Vec::new(),
            })
            .collect();
        Self {
            trajectories: truth.trajectories(),
            labels: truth.labels(),
            contacts: truth.contacts.clone(),
            objects,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// Mean over true contacts of the best interval IoU with a detected one.
    pub contact_iou: f64,
    pub label_agreement: f64,
    pub segment_iou: Option<f64>,
    pub rotation_error_deg: Vec<f64>,
    pub translation_error_m: Vec<f64>,
    pub max_rotation_error_deg: f64,
    pub max_translation_error_m: f64,
    pub axis_error_deg: Option<f64>,
    pub trajectory_rmse: f64,
}

pub fn interval_iou(a: &Interval, b: &Interval) -> f64 {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    let inter = if hi >= lo { hi - lo + 1 } else { 0 };
    let union = (a.end - a.start + 1) + (b.end - b.start + 1) - inter;
    inter as f64 / union as f64
}

pub fn set_iou(a: &[usize], b: &[usize]) -> f64 {
    let sa: std::collections::BTreeSet<_> = a.iter().collect();
    let sb: std::collections::BTreeSet<_> = b.iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Rotation axis of a pose, `None` for no rotation.
pub fn axis_of(pose: &RigidPose) -> Option<Vec3> {
    pose.axis_angle().map(|(a, _)| a)
}

pub fn score(out: &RunOutputs, truth: &Truth) -> FormatResult<Score> {
    let mismatch = |what: &str, a: usize, b: usize| {
        Err(FormatError::Malformed(format!("{what}: run has {a}, truth has {b}")))
    };
    if out.trajectories.frame_count() != truth.frames {
        return mismatch("frame count", out.trajectories.frame_count(), truth.frames);
    }
    if out.trajectories.point_count() != truth.point_count() {
        return mismatch("point count", out.trajectories.point_count(), truth.point_count());
    }
    if out.labels.len() != truth.point_count() {
        return mismatch("label count", out.labels.len(), truth.point_count());
    }

    let contact_iou = if truth.contacts.is_empty() {
        if out.contacts.is_empty() { 1.0 } else { 0.0 }
    } else {
        truth
            .contacts
            .iter()
            .map(|t| out.contacts.iter().map(|o| interval_iou(t, o)).fold(0.0, f64::max))
            .sum::<f64>()
            / truth.contacts.len() as f64
    };
    let true_labels = truth.labels();
    let label_agreement =
        out.labels.iter().zip(&true_labels).filter(|(a, b)| a == b).count() as f64 / true_labels.len() as f64;

    // the object result whose window best overlaps the first true contact
    let target = truth.contacts.first();
    let best = target.and_then(|t| {
        out.objects
            .iter()
            .filter_map(|o| {
                let (first, last) = (o.poses.first()?.frame, o.poses.last()?.frame);
                Some((interval_iou(t, &Interval { start: first, end: last }), o))
            })
            .filter(|(iou, _)| *iou > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, o)| o)
    });
    let clean = truth.trajectories();
    let mut rotation_error_deg = Vec::new();
    let mut translation_error_m = Vec::new();
    let mut axis_error_deg = None;
    let segment_iou = if truth.object_indices.is_empty() {
        None
    } else {
        Some(best.map_or(0.0, |o| set_iou(&o.segment, &truth.object_indices)))
    };
    if let (Some(o), false) = (best, truth.object_indices.is_empty()) {
        let start = o.poses[0].frame;
        let pts: Vec<Point> = truth.object_indices.iter().map(|&i| clean.position(start, i)).collect();
        let c = manipseg_core::cloud::centroid(&pts).expect("object has points");
        for rec in &o.poses {
            let est = rec.pose();
            let gt = truth.object_motion(start, rec.frame);
            rotation_error_deg.push(rotation_angle(&(est.rotation.transpose() * gt.rotation)).to_degrees());
            translation_error_m.push((est.apply(&c) - gt.apply(&c)).norm());
        }
        if let (Some(h), Some(last)) = (truth.hinge_axis, o.poses.last()) {
            axis_error_deg = Some(match axis_of(&last.pose()) {
                Some(a) => a.dot(&v3(h).normalize()).abs().min(1.0).acos().to_degrees(),
                None => 90.0,
            });
        }
    }
    let mut sq = 0.0;
    for f in 0..truth.frames {
        for (a, b) in out.trajectories.state(f).positions().iter().zip(clean.state(f).positions()) {
            sq += (a - b).norm_squared();
        }
    }
    let trajectory_rmse = (sq / (truth.frames * truth.point_count()) as f64).sqrt();
    Ok(Score {
        contact_iou,
        label_agreement,
        segment_iou,
        max_rotation_error_deg: rotation_error_deg.iter().copied().fold(0.0, f64::max),
        max_translation_error_m: translation_error_m.iter().copied().fold(0.0, f64::max),
        rotation_error_deg,
        translation_error_m,
        axis_error_deg,
        trajectory_rmse,
    })
}

/// Geodesic angle in degrees between two rotations, exposed for checks.
pub fn rotation_error_deg(a: &RigidPose, b: &RigidPose) -> f64 {
    rotation_angle(&(a.rotation.transpose() * b.rotation)).to_degrees()
}

#[doc(hidden)]
pub fn rotation_about(axis: Vec3, deg: f64) -> RigidPose {
    RigidPose::new(
        *Rotation3::from_axis_angle(&Unit::new_normalize(axis), deg.to_radians()).matrix(),
        Vec3::zeros(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_static_box(noise: f64) -> Scenario {
        Scenario {
            name: "still".into(),
            frames: 4,
            noise_sigma: noise,
            seed: 3,
            bodies: vec![
                BodySpec {
                    name: "box".into(),
                    shape: Shape::Box {
                        center: [0.0, 0.0, 1.0],
                        half_extents: [0.2, 0.2, 0.2],
                        spacing: 0.01,
                    },
                    color: [0.5; 3],
                    pivot: [0.0; 3],
                    keyframes: vec![],
                    parent: None,
                },
                BodySpec {
                    name: "ball".into(),
                    shape: Shape::Sphere {
                        center: [1.0, 0.0, 1.0],
                        radius: 0.05,
                        spacing: 0.01,
                    },
                    color: [0.9, 0.6, 0.5],
                    pivot: [0.0; 3],
                    keyframes: vec![],
                    parent: None,
                },
            ],
            actor: 1,
            object: None,
            hinge_axis: None,
            contact_dist: 0.02,
            min_duration: 3,
        }
    }

    #[test]
    fn static_noiseless_frames_are_identical() {
        let run = generate(&one_static_box(0.0)).unwrap();
        for f in &run.frames[1..] {
            assert_eq!(f, &run.frames[0]);
        }
        assert!(run.truth.contacts.is_empty());
    }

    #[test]
    fn jitter_matches_sigma() {
        let sigma = 0.002;
        let run = generate(&one_static_box(sigma)).unwrap();
        // frame differences of a static body carry sqrt(2) sigma per axis
        let (a, b) = (&run.frames[0], &run.frames[1]);
        let d: Vec<f64> = a
            .positions()
            .iter()
            .zip(b.positions())
            .flat_map(|(p, q)| (p - q).iter().copied().collect::<Vec<_>>())
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let est = (var / 2.0).sqrt();
        assert!((est - sigma).abs() < 0.1 * sigma, "{est}");
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&drawer()).unwrap();
        let b = generate(&drawer()).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.truth, b.truth);
        let mut other = drawer();
        other.seed += 1;
        assert_ne!(generate(&other).unwrap().frames, a.frames);
    }

    #[test]
    fn canned_scenes_have_one_scripted_contact() {
        for name in CANNED {
            let scn = canned(name).unwrap();
            let run = generate(&scn).unwrap();
            assert_eq!(run.truth.contacts.len(), 1, "{name}");
            let n = run.truth.point_count();
            assert!((2000..=5000).contains(&n), "{name}: {n} points");
            assert!((15..=30).contains(&scn.frames));
        }
        // the drawer hand settles at frame 6 and leaves after frame 22
        assert_eq!(generate(&drawer()).unwrap().truth.contacts, vec![Interval { start: 6, end: 22 }]);
    }

    #[test]
    fn perfect_outputs_score_perfectly() {
        for name in CANNED {
            let truth = generate(&canned(name).unwrap()).unwrap().truth;
            let s = score(&RunOutputs::from_truth(&truth), &truth).unwrap();
            assert_eq!(s.contact_iou, 1.0);
            assert_eq!(s.label_agreement, 1.0);
            assert_eq!(s.segment_iou, Some(1.0));
            assert!(s.max_rotation_error_deg < 1e-6, "{name}: {}", s.max_rotation_error_deg);
            assert!(s.max_translation_error_m < 1e-9);
            assert!(s.trajectory_rmse < 1e-12);
            if let Some(a) = s.axis_error_deg {
                assert!(a < 1e-6);
            }
        }
    }

    #[test]
    fn score_rejects_mismatched_runs() {
        let truth = generate(&one_static_box(0.0)).unwrap().truth;
        let mut out = RunOutputs::from_truth(&truth);
        out.labels.pop();
        assert!(score(&out, &truth).is_err());
    }

    #[test]
    fn interval_and_set_overlap() {
        let iv = |start, end| Interval { start, end };
        assert_eq!(interval_iou(&iv(0, 9), &iv(0, 9)), 1.0);
        assert_eq!(interval_iou(&iv(0, 4), &iv(5, 9)), 0.0);
        assert_eq!(interval_iou(&iv(0, 9), &iv(5, 14)), 5.0 / 15.0);
        assert_eq!(set_iou(&[1, 2, 3], &[2, 3, 4]), 0.5);
    }

    #[test]
    fn bad_scenarios_are_rejected() {
        let mut s = one_static_box(0.0);
        s.frames = 1;
        assert!(generate(&s).is_err());
        let mut s = one_static_box(0.0);
        s.noise_sigma = -1.0;
        assert!(generate(&s).is_err());
        let mut s = one_static_box(0.0);
        s.bodies[0].parent = Some(1);
        assert!(generate(&s).is_err());
    }
}
