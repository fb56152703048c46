//! Actor/background labeling of the initial model by Euclidean clustering.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::cloud::{centroid, Point, PointCloud};
use crate::error::{Error, Result};
use crate::graph::{build_proximity_graph, connected_components};
use crate::kdtree::KdTree;
use crate::tracker::Label;

pub const DEFAULT_ACTOR_RADIUS: f64 = 0.05;

/// What a component selector gets to see about each proximity-graph component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSummary {
    /// Position in the deterministic component order (by smallest member).
    pub index: usize,
    pub size: usize,
    pub centroid: Point,
    pub bbox_min: Point,
    pub bbox_max: Point,
}

impl ComponentSummary {
    fn of(index: usize, members: &[usize], positions: &[Point]) -> Self {
        let pts: Vec<Point> = members.iter().map(|&i| positions[i]).collect();
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in &pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Self {
            index,
            size: members.len(),
            centroid: centroid(&pts).expect("components are non-empty"),
            bbox_min: lo,
            bbox_max: hi,
        }
    }
}

/// Picks the actor component. Must return exactly one component index for
/// segmentation to succeed.
pub trait ComponentSelector {
    fn select(&self, components: &[ComponentSummary]) -> Vec<usize>;
}

/// Any per-component predicate is a selector.
impl<F: Fn(&ComponentSummary) -> bool> ComponentSelector for F {
    fn select(&self, components: &[ComponentSummary]) -> Vec<usize> {
        components.iter().filter(|c| self(c)).map(|c| c.index).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActorSelector {
    /// Most points. Equal sizes are ambiguous.
    Largest,
    /// Centroid nearest to the given point. Equal distances are ambiguous.
    ClosestTo(Point),
    /// Every component with `min <= size <= max`.
    SizeRange { min: usize, max: usize },
}

impl ComponentSelector for ActorSelector {
    fn select(&self, components: &[ComponentSummary]) -> Vec<usize> {
        let argmax_all = |score: &dyn Fn(&ComponentSummary) -> f64| {
            let best = components.iter().map(score).fold(f64::NEG_INFINITY, f64::max);
            components
                .iter()
                .filter(|c| score(c) == best)
                .map(|c| c.index)
                .collect()
        };
        match self {
            ActorSelector::Largest => argmax_all(&|c| c.size as f64),
            ActorSelector::ClosestTo(p) => argmax_all(&|c| -(c.centroid - p).norm()),
            ActorSelector::SizeRange { min, max } => components
                .iter()
                .filter(|c| (*min..=*max).contains(&c.size))
                .map(|c| c.index)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorSegmentation {
    pub labels: Vec<Label>,
    /// Actor point indices, ascending.
    pub actor: Vec<usize>,
    /// The actor set falls apart into several pieces at half the radius, so
    /// its connectivity hangs on a few bridging points.
    pub fragile: bool,
}

impl ActorSegmentation {
    fn from_actor(model: &PointCloud, actor: Vec<usize>, radius: f64) -> Result<Self> {
        let mut labels = vec![Label::Background; model.len()];
        for &i in &actor {
            labels[i] = Label::Actor;
        }
        let fragile = if actor.len() > 1 {
            let sub = build_proximity_graph(&model.select(&actor), radius / 2.0)?;
            connected_components(&sub).len() > 1
        } else {
            false
        };
        Ok(Self {
            labels,
            actor,
            fragile,
        })
    }
}

/// Label as actor the single proximity-graph component chosen by `selector`.
pub fn segment_by_component(
    model: &PointCloud,
    radius: f64,
    selector: &impl ComponentSelector,
) -> Result<ActorSegmentation> {
    let graph = build_proximity_graph(model, radius)?;
    let components = connected_components(&graph);
    let summaries: Vec<ComponentSummary> = components
        .iter()
        .enumerate()
        .map(|(k, c)| ComponentSummary::of(k, c, model.positions()))
        .collect();
    let chosen = selector.select(&summaries);
    if chosen.len() != 1 || chosen[0] >= components.len() {
        return Err(Error::AmbiguousSelection {
            candidates: chosen
                .iter()
                .filter_map(|&k| summaries.get(k).cloned())
                .collect(),
        });
    }
    ActorSegmentation::from_actor(model, components[chosen[0]].clone(), radius)
}

/// Region growing from `seed`: every point reachable by hops of length in
/// `(0, radius]` is actor.
pub fn segment_by_seed(model: &PointCloud, seed: usize, radius: f64) -> Result<ActorSegmentation> {
    if seed >= model.len() {
        return Err(Error::invalid(alloc::format!(
            "seed index {seed} out of range for {} points",
            model.len()
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("growing radius must be positive"));
    }
    let tree = KdTree::from_cloud(model);
    let pts = model.positions();
    let mut reached = vec![false; model.len()];
    reached[seed] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(i) = queue.pop_front() {
        for j in tree.within_radius(&pts[i], radius) {
            if !reached[j] && (pts[j] - pts[i]).norm() > 0.0 {
                reached[j] = true;
                queue.push_back(j);
            }
        }
    }
    let actor = (0..model.len()).filter(|&i| reached[i]).collect();
    ActorSegmentation::from_actor(model, actor, radius)
}

/// Index of the model point nearest to `p`.
pub fn nearest_point(model: &PointCloud, p: &Point) -> Result<usize> {
    KdTree::from_cloud(model)
        .nearest(p)
        .map(|n| n.index)
        .ok_or_else(|| Error::invalid("empty model"))
}
