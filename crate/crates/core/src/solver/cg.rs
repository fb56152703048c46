//! Preconditioned conjugate gradient on the normal equations.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::DMatrix;

use super::CsrMatrix;

/// Diagonal preconditioner entries below this are clamped.
pub const DIAGONAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `|J^T r - J^T J x|` at exit.
    pub residual_norm: f64,
    /// `|J^T r|`, the scale `residual_norm` is compared against.
    pub rhs_norm: f64,
    pub converged: bool,
}

/// How `J^T J` is approximated for preconditioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    /// Inverse of the diagonal.
    #[default]
    Jacobi,
    /// Inverse of the diagonal `b x b` blocks, e.g. the 6 parameters of one
    /// local transform. Couples rotation and translation of a node, which
    /// are nearly collinear when rotating about a far-away origin.
    BlockJacobi(usize),
}

enum Applied {
    Diagonal(Vec<f64>),
    Blocks { b: usize, inv: Vec<f64> },
}

impl Applied {
    fn new(j: &CsrMatrix, kind: Preconditioner) -> Self {
        let diagonal = || {
            Applied::Diagonal(
                j.normal_diagonal()
                    .into_iter()
                    .map(|d| 1.0 / d.max(DIAGONAL_FLOOR))
                    .collect(),
            )
        };
        match kind {
            Preconditioner::BlockJacobi(b) if b > 1 && j.ncols() % b == 0 => {
                let mut inv = j.normal_block_diagonal(b);
                for block in inv.chunks_exact_mut(b * b) {
                    let mut m = DMatrix::from_row_slice(b, b, block);
                    for k in 0..b {
                        m[(k, k)] = m[(k, k)].max(DIAGONAL_FLOOR);
                    }
                    match m.clone().cholesky() {
                        Some(c) => block.copy_from_slice(c.inverse().transpose().as_slice()),
                        // semidefinite block: fall back to its diagonal
                        None => {
                            block.fill(0.0);
                            for k in 0..b {
                                block[k * b + k] = 1.0 / m[(k, k)];
                            }
                        }
                    }
                }
                Applied::Blocks { b, inv }
            }
            _ => diagonal(),
        }
    }

    fn apply(&self, res: &[f64], z: &mut [f64]) {
        match self {
            Applied::Diagonal(d) => {
                for k in 0..res.len() {
                    z[k] = res[k] * d[k];
                }
            }
            Applied::Blocks { b, inv } => {
                let b = *b;
                for ((zb, rb), m) in z.chunks_exact_mut(b).zip(res.chunks_exact(b)).zip(inv.chunks_exact(b * b)) {
                    for (row, zk) in zb.iter_mut().enumerate() {
                        *zk = dot(&m[row * b..(row + 1) * b], rb);
                    }
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `J^T J x = J^T r` without forming `J^T J`.
///
/// Stops once `|J^T r - J^T J x| <= tol * |J^T r|` or after `max_iters`
/// iterations.
pub fn solve_normal_equations(j: &CsrMatrix, r: &[f64], max_iters: usize, tol: f64) -> CgOutcome {
    solve_normal_equations_with(j, r, max_iters, tol, Preconditioner::Jacobi)
}

pub fn solve_normal_equations_with(
    j: &CsrMatrix,
    r: &[f64],
    max_iters: usize,
    tol: f64,
    preconditioner: Preconditioner,
) -> CgOutcome {
    let n = j.ncols();
    assert_eq!(r.len(), j.nrows(), "residual length must match Jacobian rows");

    let mut b = vec![0.0; n];
    j.tr_mul_vec(r, &mut b);
    let rhs_norm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return CgOutcome {
            solution: x,
            iterations: 0,
            residual_norm: 0.0,
            rhs_norm,
            converged: true,
        };
    }

    let precond = Applied::new(j, preconditioner);
    let mut res = b;
    let mut z = vec![0.0; n];
    precond.apply(&res, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&res, &z);
    let mut jp = vec![0.0; j.nrows()];
    let mut ap = vec![0.0; n];
    let threshold = tol * rhs_norm;
    let mut res_norm = rhs_norm;
    let mut iterations = 0;

    while iterations < max_iters && res_norm > threshold {
        j.mul_vec(&p, &mut jp);
        j.tr_mul_vec(&jp, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            res[k] -= alpha * ap[k];
        }
        iterations += 1;
        res_norm = dot(&res, &res).sqrt();
        if res_norm <= threshold {
            break;
        }
        precond.apply(&res, &mut z);
        let rz_next = dot(&res, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }

    CgOutcome {
        solution: x,
        iterations,
        residual_norm: res_norm,
        rhs_norm,
        converged: res_norm <= threshold,
    }
}

/// Gauss-Newton increment `x` with `J^T J x = J^T r`. The caller applies it
/// as `params - x`.
pub fn gauss_newton_step(j: &CsrMatrix, r: &[f64], cg_iters: usize, cg_tol: f64) -> Vec<f64> {
    solve_normal_equations(j, r, cg_iters, cg_tol).solution
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_oracle(j: &DMatrix<f64>, r: &[f64]) -> DVector<f64> {
        let jt = j.transpose();
        let a = &jt * j;
        let b = &jt * DVector::from_column_slice(r);
        a.lu().solve(&b).expect("well-conditioned")
    }

    #[test]
    fn identity_system() {
        let j = CsrMatrix::from_dense(&DMatrix::identity(4, 4));
        let x = gauss_newton_step(&j, &[1.0, 0.0, 0.0, 0.0], 10, 1e-12);
        assert_eq!(x, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_residual_gives_zero_step() {
        let j = CsrMatrix::from_dense(&DMatrix::from_fn(5, 3, |r, c| (r + 2 * c) as f64 + 1.0));
        let out = solve_normal_equations(&j, &[0.0; 5], 10, 1e-12);
        assert_eq!(out.solution, vec![0.0; 3]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn matches_dense_solve_30x12() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let j = DMatrix::from_fn(30, 12, |r, c| {
            rng.random_range(-1.0..1.0) + if r == c { 3.0 } else { 0.0 }
        });
        let r: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = gauss_newton_step(&CsrMatrix::from_dense(&j), &r, 100, 1e-14);
        let oracle = dense_oracle(&j, &r);
        for (a, b) in x.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn block_preconditioner_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let j = DMatrix::from_fn(60, 24, |r, c| {
            rng.random_range(-1.0..1.0) + if r == c { 3.0 } else { 0.0 }
        });
        let r: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let oracle = dense_oracle(&j, &r);
        let j = CsrMatrix::from_dense(&j);
        for pc in [Preconditioner::BlockJacobi(6), Preconditioner::BlockJacobi(24), Preconditioner::BlockJacobi(5)] {
            let out = solve_normal_equations_with(&j, &r, 200, 1e-14, pc);
            for (a, b) in out.solution.iter().zip(oracle.iter()) {
                assert!((a - b).abs() < 1e-8, "{pc:?}: {a} vs {b}");
            }
        }
        // one block spanning everything is an exact solve
        let out = solve_normal_equations_with(&j, &r, 200, 1e-12, Preconditioner::BlockJacobi(24));
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn zero_column_is_clamped_not_fatal() {
        let mut j = CsrMatrix::new(3);
        j.push_row([(0, 2.0)]);
        j.push_row([(1, 1.0)]);
        let x = gauss_newton_step(&j, &[4.0, 1.0], 10, 1e-12);
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn stops_at_iteration_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let j = DMatrix::from_fn(40, 20, |_, _| rng.random_range(-1.0..1.0));
        let r: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = solve_normal_equations(&CsrMatrix::from_dense(&j), &r, 2, 1e-15);
        assert_eq!(out.iterations, 2);
        assert!(!out.converged);
    }
}
