use alloc::vec::Vec;


use crate::cloud::PointCloud;
use crate::error::{ensure_len, Error, Result};
use crate::graph::{build_knn_graph, NeighborhoodGraph};
use crate::kdtree::KdTree;
use crate::solver::solve_normal_equations_with;

use super::energy::{stiffness_edges, Problem};
use super::{apply_warp, find_correspondences_in, RegistrationParams, WarpField};

/// Backtracking halvings tried before a Gauss-Newton step is given up on.
const MAX_BACKTRACKS: usize = 10;

/// An outer iteration whose largest accepted parameter change is below this
/// ends the ICP loop early.
const CONVERGED_STEP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub icp_iteration: usize,
    pub cost_before: f64,
    pub cost_after: f64,
    /// Fraction of the full Gauss-Newton increment that was applied.
    pub step_scale: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationReport {
    pub warp: WarpField,
    pub icp_iterations: usize,
    /// Correspondence count of each ICP iteration.
    pub correspondences: Vec<usize>,
    /// Accepted Gauss-Newton steps in order.
    pub steps: Vec<StepRecord>,
}

/// Non-rigid ICP of `model` onto `target` starting from `init`.
pub fn register(
    model: &PointCloud,
    target: &PointCloud,
    init: &WarpField,
    params: &RegistrationParams,
) -> Result<WarpField> {
    register_with_graph(model, target, init, None, params).map(|r| r.warp)
}

/// As [`register`], optionally reusing a regularization graph over `model`
/// (otherwise a symmetrized `graph_k`-NN graph is built), and reporting the
/// per-step cost trace.
pub fn register_with_graph(
    model: &PointCloud,
    target: &PointCloud,
    init: &WarpField,
    graph: Option<&NeighborhoodGraph>,
    params: &RegistrationParams,
) -> Result<RegistrationReport> {
    params.validate()?;
    ensure_len("initial warp", model.len(), init.len())?;
    if target.is_empty() {
        return Err(Error::invalid("registration target is empty"));
    }
    if target.normals().is_none() {
        return Err(Error::invalid("registration target needs normals"));
    }
    let mut report = RegistrationReport {
        warp: init.clone(),
        icp_iterations: 0,
        correspondences: Vec::new(),
        steps: Vec::new(),
    };
    if params.gn_iters == 0 || params.icp_iters == 0 {
        return Ok(report);
    }

    let owned_graph;
    let graph = match graph {
        Some(g) => {
            ensure_len("regularization graph", model.len(), g.node_count())?;
            g
        }
        None => {
            owned_graph = build_knn_graph(model, params.graph_k)?;
            &owned_graph
        }
    };
    let edges = stiffness_edges(model, graph, params.sigma_reg);
    let tree = KdTree::from_cloud(target);

    for icp in 0..params.icp_iters {
        report.icp_iterations = icp + 1;
        let current = apply_warp(model, &report.warp)?;
        let corr = find_correspondences_in(&current, target, &tree, params)?;
        report.correspondences.push(corr.len());
        let problem = Problem::new(model, target, &corr, &edges, params)?;

        let mut largest_step: f64 = 0.0;
        let mut cost = problem.cost(&report.warp).total;
        for _ in 0..params.gn_iters {
            let sys = problem.linearize(&report.warp);
            let cg = solve_normal_equations_with(
                &sys.jacobian,
                &sys.residuals,
                params.cg_iters,
                params.cg_tol,
                params.preconditioner,
            );
            let step_max = cg.solution.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if step_max == 0.0 {
                break;
            }
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_BACKTRACKS {
                let candidate = report.warp.stepped(&cg.solution, scale);
                let c = problem.cost(&candidate).total;
                if c <= cost {
                    accepted = Some((candidate, c));
                    break;
                }
                scale *= 0.5;
            }
            let Some((candidate, c)) = accepted else { break };
            report.steps.push(StepRecord {
                icp_iteration: icp,
                cost_before: cost,
                cost_after: c,
                step_scale: scale,
                cg_iterations: cg.iterations,
            });
            report.warp = candidate;
            cost = c;
            largest_step = largest_step.max(scale * step_max);
        }
        if !corr.is_empty() && largest_step < CONVERGED_STEP {
            break;
        }
    }

    if report.correspondences.iter().all(|&n| n == 0) {
        return Err(Error::NoOverlap);
    }
    Ok(report)
}
