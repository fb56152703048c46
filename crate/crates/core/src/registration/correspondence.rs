use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;


use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::par;

use super::RegistrationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
}

/// Source-to-target pairs, ascending by source index, at most one per source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorrespondenceSet {
    pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(mut pairs: Vec<Correspondence>, source_len: usize, target_len: usize) -> Result<Self> {
        pairs.sort_by_key(|c| c.source);
        if pairs.windows(2).any(|w| w[0].source == w[1].source) {
            return Err(Error::invalid("duplicate source index in correspondences"));
        }
        if pairs
            .iter()
            .any(|c| c.source >= source_len || c.target >= target_len)
        {
            return Err(Error::invalid("correspondence index out of range"));
        }
        Ok(Self { pairs })
    }

    #[inline]
    pub fn pairs(&self) -> &[Correspondence] {
        &self.pairs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Nearest target neighbor of every source point, kept only if it passes the
/// distance, normal-angle and color gates. A gate is skipped when either cloud
/// lacks the attribute it inspects.
pub fn find_correspondences(
    source: &PointCloud,
    target: &PointCloud,
    params: &RegistrationParams,
) -> Result<CorrespondenceSet> {
    if target.is_empty() {
        return Err(Error::invalid("correspondence search against an empty target"));
    }
    find_correspondences_in(source, target, &KdTree::from_cloud(target), params)
}

/// As [`find_correspondences`], reusing a kd-tree built over `target`.
pub fn find_correspondences_in(
    source: &PointCloud,
    target: &PointCloud,
    target_tree: &KdTree,
    params: &RegistrationParams,
) -> Result<CorrespondenceSet> {
    if target.is_empty() {
        return Err(Error::invalid("correspondence search against an empty target"));
    }
    if target_tree.len() != target.len() {
        return Err(Error::invalid("kd-tree does not match the target cloud"));
    }
    let cos_gate = params.max_normal_angle.min(core::f64::consts::PI).cos();
    let normals = source.normals().zip(target.normals());
    let colors = source.colors().zip(target.colors());
    let found = par::map_indexed(source.len(), |i| {
        let nn = target_tree.nearest(&source.positions()[i])?;
        if !(nn.distance <= params.max_dist) {
            return None;
        }
        if let Some((sn, tn)) = normals {
            if sn[i].dot(&tn[nn.index]) < cos_gate {
                return None;
            }
        }
        if let Some((sc, tc)) = colors {
            if !((sc[i] - tc[nn.index]).norm() <= params.max_color_diff) {
                return None;
            }
        }
        Some(Correspondence {
            source: i,
            target: nn.index,
        })
    });
    Ok(CorrespondenceSet {
        pairs: found.into_iter().flatten().collect(),
    })
}
