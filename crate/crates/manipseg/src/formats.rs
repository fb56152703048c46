//! Pipeline artifacts: trajectories CSV, labels, contacts and object results
//! as JSON, and warp fields as raw little-endian doubles or JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use manipseg_core::contact::ContactEvent;
use manipseg_core::object::{ObjectResult, RigidPose};
use manipseg_core::registration::{LocalTransform, WarpField};
use manipseg_core::{Label, Point, PointCloud, TrajectorySet, Vec3};
use nalgebra::Matrix3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, FormatResult};

pub const TRAJECTORY_HEADER: [&str; 6] = ["frame", "point_id", "x", "y", "z", "label"];

/// One row per (frame, point), frame-major. The label column is left empty
/// when `labels` is `None`.
pub fn write_trajectories(w: impl Write, traj: &TrajectorySet, labels: Option<&[Label]>) -> FormatResult<()> {
    let mut out = csv::Writer::from_writer(BufWriter::new(w));
    out.write_record(TRAJECTORY_HEADER)?;
    let mut row: Vec<String> = Vec::with_capacity(6);
    for f in 0..traj.frame_count() {
        for (i, p) in traj.state(f).positions().iter().enumerate() {
            row.clear();
            row.push(f.to_string());
            row.push(i.to_string());
            row.extend([p.x, p.y, p.z].iter().map(|v| v.to_string()));
            row.push(labels.map_or(String::new(), |l| l[i].as_bit().to_string()));
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parsed trajectories plus the labels if the column is filled in.
pub fn read_trajectories(r: impl Read) -> FormatResult<(TrajectorySet, Option<Vec<Label>>)> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(r));
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(FormatError::malformed(format!(
            "trajectory header must be '{}'",
            TRAJECTORY_HEADER.join(",")
        )));
    }
    let mut frames: Vec<Vec<Option<(Point, Option<Label>)>>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| FormatError::malformed(format!("trajectory row {}: bad {what}", line + 2));
        let frame: usize = rec[0].parse().map_err(|_| bad("frame"))?;
        let id: usize = rec[1].parse().map_err(|_| bad("point_id"))?;
        let mut xyz = [0.0; 3];
        for k in 0..3 {
            xyz[k] = rec[2 + k].parse().map_err(|_| bad("coordinate"))?;
        }
        let label = match rec[5].trim() {
            "" => None,
            s => Some(
                s.parse::<u8>()
                    .ok()
                    .and_then(Label::from_bit)
                    .ok_or_else(|| bad("label"))?,
            ),
        };
        if frames.len() <= frame {
            frames.resize_with(frame + 1, Vec::new);
        }
        let slot = &mut frames[frame];
        if slot.len() <= id {
            slot.resize(id + 1, None);
        }
        if slot[id].replace((Point::new(xyz[0], xyz[1], xyz[2]), label)).is_some() {
            return Err(bad("duplicate (frame, point_id)"));
        }
    }
    if frames.is_empty() {
        return Err(FormatError::malformed("trajectory file has no rows"));
    }
    let n = frames[0].len();
    let mut labels: Option<Vec<Option<Label>>> = None;
    let mut states = Vec::with_capacity(frames.len());
    for (f, rows) in frames.into_iter().enumerate() {
        if rows.len() != n || rows.iter().any(Option::is_none) {
            return Err(FormatError::malformed(format!("frame {f} does not list points 0..{n}")));
        }
        let rows: Vec<(Point, Option<Label>)> = rows.into_iter().flatten().collect();
        let these: Vec<Option<Label>> = rows.iter().map(|r| r.1).collect();
        match &labels {
            None => labels = Some(these),
            Some(l) if *l != these => {
                return Err(FormatError::malformed(format!("labels change at frame {f}")));
            }
            _ => {}
        }
        states.push(PointCloud::new(rows.into_iter().map(|r| r.0).collect()));
    }
    let labels = labels.unwrap_or_default();
    let labels = if labels.iter().all(Option::is_some) {
        Some(labels.into_iter().flatten().collect())
    } else if labels.iter().all(Option::is_none) {
        None
    } else {
        return Err(FormatError::malformed("label column is only partly filled"));
    };
    Ok((TrajectorySet::new(states)?, labels))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub actor_indices: Vec<usize>,
}

impl LabelsFile {
    pub fn from_labels(labels: &[Label]) -> Self {
        Self {
            actor_indices: (0..labels.len()).filter(|&i| labels[i] == Label::Actor).collect(),
        }
    }

    pub fn to_labels(&self, point_count: usize) -> FormatResult<Vec<Label>> {
        let mut labels = vec![Label::Background; point_count];
        for &i in &self.actor_indices {
            *labels
                .get_mut(i)
                .ok_or_else(|| FormatError::malformed(format!("actor index {i} out of range ({point_count} points)")))? =
                Label::Actor;
        }
        Ok(labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub start: usize,
    pub end: usize,
    pub actor_points: Vec<usize>,
    pub background_points: Vec<usize>,
    pub centroids: Vec<[f64; 3]>,
}

impl From<&ContactEvent> for ContactRecord {
    fn from(e: &ContactEvent) -> Self {
        Self {
            start: e.start_frame,
            end: e.end_frame,
            actor_points: e.actor_points.clone(),
            background_points: e.background_points.clone(),
            centroids: e.centroids.iter().map(|c| [c.x, c.y, c.z]).collect(),
        }
    }
}

impl ContactRecord {
    pub fn to_event(&self) -> FormatResult<ContactEvent> {
        if self.start > self.end || self.centroids.len() != self.end - self.start + 1 {
            return Err(FormatError::malformed(format!(
                "contact {}..{} needs start <= end and one centroid per frame",
                self.start, self.end
            )));
        }
        Ok(ContactEvent {
            start_frame: self.start,
            end_frame: self.end,
            actor_points: self.actor_points.clone(),
            background_points: self.background_points.clone(),
            centroids: self.centroids.iter().map(|c| Point::new(c[0], c[1], c[2])).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame: usize,
    /// Row-major rotation.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl PoseRecord {
    pub fn new(frame: usize, pose: &RigidPose) -> Self {
        let m = pose.rotation;
        Self {
            frame,
            r: [
                m[(0, 0)],
                m[(0, 1)],
                m[(0, 2)],
                m[(1, 0)],
                m[(1, 1)],
                m[(1, 2)],
                m[(2, 0)],
                m[(2, 1)],
                m[(2, 2)],
            ],
            t: [pose.translation.x, pose.translation.y, pose.translation.z],
        }
    }

    pub fn pose(&self) -> RigidPose {
        RigidPose::new(Matrix3::from_row_slice(&self.r), Vec3::from(self.t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub segment: Vec<usize>,
    pub initial_cluster: Vec<usize>,
    pub poses: Vec<PoseRecord>,
    #[serde(default)]
    pub candidates: Vec<usize>,
    #[serde(default)]
    pub ransac_poses: Vec<PoseRecord>,
    /// `[frame, count]` of background points consistent with each frame's motion.
    #[serde(default)]
    pub inlier_counts: Vec<[usize; 2]>,
}

impl From<&ObjectResult> for ObjectRecord {
    fn from(r: &ObjectResult) -> Self {
        let frames = r.window.frames();
        Self {
            segment: r.segment.clone(),
            initial_cluster: r.initial_cluster.clone(),
            poses: frames.clone().zip(&r.poses).map(|(f, p)| PoseRecord::new(f, p)).collect(),
            candidates: r.candidates.clone(),
            ransac_poses: frames.zip(&r.ransac_poses).map(|(f, p)| PoseRecord::new(f, p)).collect(),
            inlier_counts: r.inlier_counts().into_iter().map(|(f, c)| [f, c]).collect(),
        }
    }
}

/// `6 n` little-endian doubles, `[alpha beta gamma tx ty tz]` per point.
pub fn write_warp_binary(mut w: impl Write, warp: &WarpField) -> FormatResult<()> {
    let mut buf = Vec::with_capacity(48 * warp.len());
    for v in warp.params() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_warp_binary(mut r: impl Read) -> FormatResult<WarpField> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() % 48 != 0 {
        return Err(FormatError::malformed(format!(
            "warp file size {} is not a multiple of 48 bytes",
            buf.len()
        )));
    }
    let params: Vec<f64> = buf
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(WarpField::from_params(&params)?)
}

/// JSON array of per-point `[alpha, beta, gamma, tx, ty, tz]`.
pub fn write_warp_json(w: impl Write, warp: &WarpField) -> FormatResult<()> {
    let rows: Vec<[f64; 6]> = warp.transforms().iter().map(|t| t.to_array()).collect();
    serde_json::to_writer(BufWriter::new(w), &rows)?;
    Ok(())
}

pub fn read_warp_json(r: impl Read) -> FormatResult<WarpField> {
    let rows: Vec<[f64; 6]> = serde_json::from_reader(BufReader::new(r))?;
    Ok(WarpField::new(rows.into_iter().map(LocalTransform::from_array).collect())?)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> FormatResult<()> {
    let write = || -> FormatResult<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| e.at(path))
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> FormatResult<T> {
    let read = || -> FormatResult<T> { Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?) };
    read().map_err(|e| e.at(path))
}

pub fn write_trajectories_file(path: &Path, traj: &TrajectorySet, labels: Option<&[Label]>) -> FormatResult<()> {
    File::create(path)
        .map_err(FormatError::from)
        .and_then(|f| write_trajectories(f, traj, labels))
        .map_err(|e| e.at(path))
}

pub fn read_trajectories_file(path: &Path) -> FormatResult<(TrajectorySet, Option<Vec<Label>>)> {
    File::open(path)
        .map_err(FormatError::from)
        .and_then(read_trajectories)
        .map_err(|e| e.at(path))
}
