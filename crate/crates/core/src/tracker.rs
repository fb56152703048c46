//! Dense scene tracking: warp the fixed model through the sequence and keep
//! every per-frame state.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::cloud::{Point, PointCloud};
use crate::error::{ensure_len, Error, Result};
use crate::graph::build_knn_graph;
use crate::registration::{apply_warp, register_with_graph, RegistrationParams, RegistrationReport, WarpField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Background,
    Actor,
}

impl Label {
    /// `1` for actor, `0` for background.
    pub fn as_bit(self) -> u8 {
        match self {
            Label::Background => 0,
            Label::Actor => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Background),
            1 => Some(Label::Actor),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Label::Background => Label::Actor,
            Label::Actor => Label::Background,
        }
    }
}

/// Model snapshots, one per frame. Point `i` is the same physical point in
/// every snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    states: Vec<PointCloud>,
}

impl TrajectorySet {
    pub fn new(states: Vec<PointCloud>) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::invalid("a trajectory set needs at least one frame"));
        };
        let n = first.len();
        for s in &states {
            ensure_len("trajectory snapshot", n, s.len())?;
        }
        Ok(Self { states })
    }

    #[inline]
    pub fn frame_count(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn point_count(&self) -> usize {
        self.states[0].len()
    }

    #[inline]
    pub fn states(&self) -> &[PointCloud] {
        &self.states
    }

    #[inline]
    pub fn state(&self, frame: usize) -> &PointCloud {
        &self.states[frame]
    }

    #[inline]
    pub fn position(&self, frame: usize, point: usize) -> Point {
        self.states[frame].positions()[point]
    }

    /// Positions of `point` over all frames.
    pub fn trajectory(&self, point: usize) -> impl Iterator<Item = Point> + '_ {
        self.states.iter().map(move |s| s.positions()[point])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrajectorySet {
    pub trajectories: TrajectorySet,
    labels: Vec<Label>,
}

impl LabeledTrajectorySet {
    pub fn new(trajectories: TrajectorySet, labels: Vec<Label>) -> Result<Self> {
        ensure_len("labels", trajectories.point_count(), labels.len())?;
        Ok(Self { trajectories, labels })
    }

    #[inline]
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn indices_with(&self, label: Label) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn actor_indices(&self) -> Vec<usize> {
        self.indices_with(Label::Actor)
    }

    pub fn background_indices(&self) -> Vec<usize> {
        self.indices_with(Label::Background)
    }

    /// Same trajectories with actor and background swapped.
    pub fn swapped(&self) -> Self {
        Self {
            trajectories: self.trajectories.clone(),
            labels: self.labels.iter().map(|l| l.other()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingOutput {
    pub trajectories: TrajectorySet,
    /// `warps[t - 1]` maps state `t - 1` onto frame `t`.
    pub warps: Vec<WarpField>,
}

/// Track `frames[0]` through the rest of the sequence.
pub fn track_sequence(frames: &[PointCloud], params: &RegistrationParams) -> Result<TrajectorySet> {
    if frames.len() < 2 {
        return Err(Error::invalid("tracking needs at least two frames"));
    }
    track_from_model(frames[0].clone(), &frames[1..], params, |_, _| {}).map(|o| o.trajectories)
}

/// Track an explicit `model` (state 0) through `frames`, which are frames
/// `1..` of the sequence. `observer` sees each frame index and its
/// registration report as soon as it is done.
///
/// The regularization graph topology is built once on the model and kept for
/// the whole sequence; its Gaussian edge weights follow the current state.
/// Each registration is warm-started from the previous frame's warp.
pub fn track_from_model(
    model: PointCloud,
    frames: &[PointCloud],
    params: &RegistrationParams,
    mut observer: impl FnMut(usize, &RegistrationReport),
) -> Result<TrackingOutput> {
    params.validate()?;
    if model.is_empty() {
        return Err(Error::invalid("tracking model is empty"));
    }
    if frames.is_empty() {
        return Err(Error::invalid("tracking needs at least two frames"));
    }
    let graph = build_knn_graph(&model, params.graph_k)?;
    let n = model.len();
    let mut states = Vec::with_capacity(frames.len() + 1);
    let mut warps: Vec<WarpField> = Vec::with_capacity(frames.len());
    states.push(model);
    for (k, frame) in frames.iter().enumerate() {
        let t = k + 1;
        let init = warps.last().cloned().unwrap_or_else(|| WarpField::identity(n));
        let prev = &states[t - 1];
        let report = register_with_graph(prev, frame, &init, Some(&graph), params).map_err(|e| {
            Error::Tracking {
                frame: t,
                reason: Box::new(e),
            }
        })?;
        observer(t, &report);
        let next = apply_warp(prev, &report.warp)?;
        states.push(next);
        warps.push(report.warp);
    }
    Ok(TrackingOutput {
        trajectories: TrajectorySet::new(states)?,
        warps,
    })
}
