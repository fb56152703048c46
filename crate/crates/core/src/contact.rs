//! Contact events between actor and background trajectories.

use alloc::vec::Vec;

use crate::cloud::{centroid, Point, PointCloud};
use crate::error::{Error, Result};
use crate::graph::{build_proximity_graph, connected_components};
use crate::kdtree::KdTree;
use crate::par;
use crate::tracker::LabeledTrajectorySet;

pub const DEFAULT_CONTACT_DIST: f64 = 0.02;
pub const DEFAULT_MIN_DURATION: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ContactEvent {
    /// First in-contact frame.
    pub start_frame: usize,
    /// Last in-contact frame (inclusive).
    pub end_frame: usize,
    /// Actor points within contact distance of `background_points` at `start_frame`.
    pub actor_points: Vec<usize>,
    /// Background points within contact distance of the actor at `start_frame`.
    pub background_points: Vec<usize>,
    /// Mean of `background_points` for each frame `start_frame..=end_frame`.
    pub centroids: Vec<Point>,
}

impl ContactEvent {
    #[inline]
    pub fn duration(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn frames(&self) -> core::ops::RangeInclusive<usize> {
        self.start_frame..=self.end_frame
    }
}

fn split_labels(traj: &LabeledTrajectorySet) -> Result<(Vec<usize>, Vec<usize>)> {
    let actor = traj.actor_indices();
    let background = traj.background_indices();
    if actor.is_empty() || background.is_empty() {
        return Err(Error::invalid("contact detection needs both actor and background points"));
    }
    Ok((actor, background))
}

/// Smallest actor-background distance in every frame.
pub fn min_distance_per_frame(traj: &LabeledTrajectorySet) -> Result<Vec<f64>> {
    let (actor, background) = split_labels(traj)?;
    let (small, large) = if actor.len() <= background.len() {
        (&actor, &background)
    } else {
        (&background, &actor)
    };
    let t = &traj.trajectories;
    Ok(par::map_indexed(t.frame_count(), |f| {
        let pos = t.state(f).positions();
        let tree = KdTree::new(&small.iter().map(|&i| pos[i]).collect::<Vec<_>>());
        large
            .iter()
            .filter_map(|&i| tree.nearest(&pos[i]))
            .map(|n| n.distance)
            .fold(f64::INFINITY, f64::min)
    }))
}

/// Actor/background pairs within `dist` at `frame`, as (actor set, background set).
fn participants(traj: &LabeledTrajectorySet, frame: usize, dist: f64) -> (Vec<usize>, Vec<usize>) {
    let pos = traj.trajectories.state(frame).positions();
    let actor = traj.actor_indices();
    let background = traj.background_indices();
    let tree = KdTree::new(&background.iter().map(|&i| pos[i]).collect::<Vec<_>>());
    let mut a_hit = Vec::new();
    let mut b_hit = Vec::new();
    for &a in &actor {
        let near = tree.within_radius(&pos[a], dist);
        if !near.is_empty() {
            a_hit.push(a);
            b_hit.extend(near.into_iter().map(|k| background[k]));
        }
    }
    b_hit.sort_unstable();
    b_hit.dedup();
    (a_hit, b_hit)
}

/// Maximal runs of frames whose actor-background distance is at most
/// `contact_dist`, kept if at least `min_duration` long. A run whose
/// background contact points form several clusters (linked at twice the
/// contact distance) yields one event per cluster, all sharing the interval.
pub fn detect_contacts(
    traj: &LabeledTrajectorySet,
    contact_dist: f64,
    min_duration: usize,
) -> Result<Vec<ContactEvent>> {
    if !(contact_dist > 0.0) {
        return Err(Error::invalid("contact distance must be positive"));
    }
    let dists = min_distance_per_frame(traj)?;
    let mut runs = Vec::new();
    let mut start = None;
    for (f, &d) in dists.iter().enumerate() {
        match (d <= contact_dist, start) {
            (true, None) => start = Some(f),
            (false, Some(s)) => {
                runs.push((s, f - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, dists.len() - 1));
    }

    let mut events = Vec::new();
    for (s, e) in runs {
        if e - s + 1 < min_duration.max(1) {
            continue;
        }
        let (_, background) = participants(traj, s, contact_dist);
        let pos = traj.trajectories.state(s).positions();
        let groups: Vec<Vec<usize>> = if background.len() > 1 {
            let sub = PointCloud::new(background.iter().map(|&i| pos[i]).collect());
            connected_components(&build_proximity_graph(&sub, 2.0 * contact_dist)?)
                .into_iter()
                .map(|c| c.into_iter().map(|k| background[k]).collect())
                .collect()
        } else {
            alloc::vec![background]
        };
        let actor_all = traj.actor_indices();
        for group in groups {
            let tree = KdTree::new(&group.iter().map(|&i| pos[i]).collect::<Vec<_>>());
            let actor_points: Vec<usize> = actor_all
                .iter()
                .copied()
                .filter(|&a| !tree.within_radius(&pos[a], contact_dist).is_empty())
                .collect();
            let centroids = (s..=e)
                .map(|f| {
                    let p = traj.trajectories.state(f).positions();
                    centroid(&group.iter().map(|&i| p[i]).collect::<Vec<_>>()).expect("non-empty group")
                })
                .collect();
            events.push(ContactEvent {
                start_frame: s,
                end_frame: e,
                actor_points,
                background_points: group,
                centroids,
            });
        }
    }
    Ok(events)
}
