use core::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::solver::Preconditioner;

/// Tunables of the non-rigid ICP loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationParams {
    /// Weight of the point-to-point data term.
    pub w_point: f64,
    /// Weight of the as-rigid-as-possible stiffness term.
    pub w_stiff: f64,
    /// Huber threshold on transform-parameter differences.
    pub delta: f64,
    /// Radius (m) of the Gaussian falloff of stiffness edge weights.
    pub sigma_reg: f64,
    /// Correspondence gates. Set a gate to `f64::INFINITY` to disable it.
    pub max_dist: f64,
    pub max_normal_angle: f64,
    pub max_color_diff: f64,
    /// Outer ICP iterations (correspondence search + optimization).
    pub icp_iters: usize,
    /// Gauss-Newton iterations per outer iteration.
    pub gn_iters: usize,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub preconditioner: Preconditioner,
    /// Neighbor count of the regularization graph.
    pub graph_k: usize,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            w_point: 0.1,
            w_stiff: 200.0,
            delta: 1e-4,
            sigma_reg: 0.03,
            max_dist: 0.1,
            max_normal_angle: FRAC_PI_4,
            max_color_diff: 0.2,
            icp_iters: 10,
            gn_iters: 3,
            cg_iters: 200,
            cg_tol: 1e-6,
            preconditioner: Preconditioner::Jacobi,
            graph_k: 6,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, name: &str| {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(alloc::format!("{name} must be >= 0")))
            }
        };
        nonneg(self.w_point, "w_point")?;
        nonneg(self.w_stiff, "w_stiff")?;
        nonneg(self.max_dist, "max_dist")?;
        nonneg(self.max_normal_angle, "max_normal_angle")?;
        nonneg(self.max_color_diff, "max_color_diff")?;
        nonneg(self.cg_tol, "cg_tol")?;
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta must be > 0"));
        }
        if !(self.sigma_reg > 0.0) {
            return Err(Error::invalid("sigma_reg must be > 0"));
        }
        if self.graph_k == 0 {
            return Err(Error::invalid("graph_k must be >= 1"));
        }
        Ok(())
    }
}
