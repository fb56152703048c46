//! Two-way spectral clustering with the random-walk Laplacian.
//!
//! The generalized eigenvectors of `L_rw = I - D^-1 S` with the smallest
//! eigenvalues are `D^-1/2 u`, where `u` are the leading eigenvectors of the
//! symmetric `D^-1/2 S D^-1/2`. We find those by subspace iteration on the
//! shifted operator `(D^-1/2 S D^-1/2 + I) / 2`, whose spectrum lies in
//! `[0, 1]`, and run seeded k-means on the embedded rows.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::similarity::TrajectorySimilarity;

/// Points whose off-diagonal similarity mass is below this are isolated.
pub const ISOLATION_TOL: f64 = 1e-12;
pub const DEFAULT_KMEANS_RESTARTS: usize = 10;

/// Up to this size the embedding comes from a dense eigendecomposition.
const DENSE_LIMIT: usize = 64;
const SUBSPACE_EXTRA: usize = 6;
const SUBSPACE_MAX_ITERS: usize = 1000;
const SUBSPACE_TOL: f64 = 1e-10;
const KMEANS_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            restarts: DEFAULT_KMEANS_RESTARTS,
        }
    }
}

/// Split the candidates in two. Returns local (row) indices, each set sorted,
/// the set holding index 0 first.
///
/// Isolated rows (no similarity to anything else) form one side on their own
/// and the remaining rows the other.
pub fn spectral_cluster_2(similarity: &TrajectorySimilarity, seed: u64) -> Result<[Vec<usize>; 2]> {
    spectral_cluster_2_with(
        similarity,
        &SpectralParams {
            seed,
            ..Default::default()
        },
    )
}

pub fn spectral_cluster_2_with(similarity: &TrajectorySimilarity, params: &SpectralParams) -> Result<[Vec<usize>; 2]> {
    let s = &similarity.matrix;
    let n = s.nrows();
    if n < 2 || s.ncols() != n {
        return Err(Error::invalid("spectral clustering needs a square similarity with >= 2 rows"));
    }
    let off_mass: Vec<f64> = (0..n).map(|i| s.row(i).sum() - s[(i, i)]).collect();
    let isolated: Vec<usize> = (0..n).filter(|&i| off_mass[i] < ISOLATION_TOL).collect();
    if !isolated.is_empty() && isolated.len() < n {
        let connected: Vec<usize> = (0..n).filter(|&i| off_mass[i] >= ISOLATION_TOL).collect();
        return Ok(ordered(connected, isolated));
    }

    let degree: Vec<f64> = (0..n).map(|i| s.row(i).sum()).collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let op = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (s[(i, j)] * inv_sqrt[i] * inv_sqrt[j] + if i == j { 1.0 } else { 0.0 })
    });
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let u = leading_eigenvectors(&op, 2, &mut rng);
    let embedded: Vec<[f64; 2]> = (0..n)
        .map(|i| [u[(i, 0)] * inv_sqrt[i], u[(i, 1)] * inv_sqrt[i]])
        .collect();
    let labels = kmeans(&embedded, 2, params.restarts.max(1), &mut rng).labels;
    let a: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    let b: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    Ok(ordered(a, b))
}

fn ordered(a: Vec<usize>, b: Vec<usize>) -> [Vec<usize>; 2] {
    if a.first() <= b.first() && !a.is_empty() || b.is_empty() {
        [a, b]
    } else {
        [b, a]
    }
}

/// Orthonormal columns spanning the `k` leading eigenvectors of a symmetric
/// positive semi-definite `a`, ordered by decreasing eigenvalue.
fn leading_eigenvectors(a: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = a.nrows();
    if n <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(a.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        return DMatrix::from_fn(n, k, |i, j| eig.eigenvectors[(i, order[j])]);
    }
    let b = (k + SUBSPACE_EXTRA).min(n);
    let init = DMatrix::from_fn(n, b, |_, _| rng.random_range(-1.0..1.0));
    let mut q = init.qr().q();
    let mut ritz = q.columns(0, k).into_owned();
    for _ in 0..SUBSPACE_MAX_ITERS {
        let z = a * &q;
        let h = q.transpose() * &z;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        let v = DMatrix::from_fn(b, b, |i, j| eig.eigenvectors[(i, order[j])]);
        let qv = &q * &v;
        let zv = &z * &v;
        ritz = qv.columns(0, k).into_owned();
        let converged = (0..k).all(|j| {
            let theta = eig.eigenvalues[order[j]];
            (zv.column(j) - qv.column(j) * theta).norm() <= SUBSPACE_TOL
        });
        if converged {
            break;
        }
        q = zv.qr().q();
    }
    ritz
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<const D: usize> {
    pub labels: Vec<usize>,
    pub centers: Vec<[f64; D]>,
    pub inertia: f64,
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding; the best of `restarts` runs by
/// inertia wins (earlier runs win ties). Assignment ties go to the lower
/// cluster index.
pub fn kmeans<const D: usize>(
    points: &[[f64; D]],
    k: usize,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> KMeansResult<D> {
    assert!(k >= 1 && points.len() >= k, "k-means needs at least k points");
    let mut best: Option<KMeansResult<D>> = None;
    for _ in 0..restarts.max(1) {
        let run = kmeans_once(points, k, rng);
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one run")
}

fn kmeans_once<const D: usize>(points: &[[f64; D]], k: usize, rng: &mut ChaCha8Rng) -> KMeansResult<D> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)]];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, di) in d.iter().enumerate() {
                if target < *di {
                    pick = i;
                    break;
                }
                target -= di;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next]);
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        // an emptied cluster takes the point farthest from its own center
        for c in 0..k {
            if labels.iter().all(|&l| l != c) {
                let far = (0..n)
                    .filter(|&i| labels.iter().filter(|&&l| l == labels[i]).count() > 1)
                    .max_by(|&a, &b| {
                        dist2(&points[a], &centers[labels[a]]).total_cmp(&dist2(&points[b], &centers[labels[b]]))
                    });
                if let Some(i) = far {
                    labels[i] = c;
                    changed = true;
                }
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let mut sum = [0.0; D];
            let mut count = 0usize;
            for (p, _) in points.iter().zip(&labels).filter(|(_, &l)| l == c) {
                for d in 0..D {
                    sum[d] += p[d];
                }
                count += 1;
            }
            if count > 0 {
                for d in 0..D {
                    center[d] = sum[d] / count as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| dist2(p, &centers[l]))
        .sum();
    KMeansResult {
        labels,
        centers,
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_matrix(sizes: &[usize], cross: f64) -> DMatrix<f64> {
        let n: usize = sizes.iter().sum();
        let mut block = vec![0; n];
        let mut at = 0;
        for (b, &s) in sizes.iter().enumerate() {
            for slot in block.iter_mut().skip(at).take(s) {
                *slot = b;
            }
            at += s;
        }
        // interleave members so recovery cannot lean on index order
        let perm: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j || block[perm[i]] == block[perm[j]] {
                1.0
            } else {
                cross
            }
        })
    }

    fn expected_blocks(sizes: &[usize]) -> [Vec<usize>; 2] {
        let n: usize = sizes.iter().sum();
        let a: Vec<usize> = (0..n).filter(|&i| (i * 7) % n < sizes[0]).collect();
        let b: Vec<usize> = (0..n).filter(|&i| (i * 7) % n >= sizes[0]).collect();
        ordered(a, b)
    }

    #[test]
    fn ideal_blocks_are_recovered_small() {
        let s = TrajectorySimilarity::from_matrix(block_matrix(&[20, 13], 1e-6), 0.01).unwrap();
        assert_eq!(spectral_cluster_2(&s, 1).unwrap(), expected_blocks(&[20, 13]));
    }

    #[test]
    fn ideal_blocks_are_recovered_large() {
        // above the dense limit: exercises subspace iteration
        let s = TrajectorySimilarity::from_matrix(block_matrix(&[150, 73], 1e-6), 0.01).unwrap();
        assert_eq!(spectral_cluster_2(&s, 1).unwrap(), expected_blocks(&[150, 73]));
    }

    #[test]
    fn all_ones_split_is_deterministic_partition() {
        for n in [10, 100] {
            let s = TrajectorySimilarity::from_matrix(DMatrix::from_element(n, n, 1.0), 0.01).unwrap();
            let a = spectral_cluster_2(&s, 9).unwrap();
            let b = spectral_cluster_2(&s, 9).unwrap();
            assert_eq!(a, b);
            let mut all: Vec<usize> = a[0].iter().chain(&a[1]).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn isolated_rows_form_their_own_side() {
        let mut m = block_matrix(&[5, 5], 0.5);
        for j in 0..10 {
            if j != 3 {
                m[(3, j)] = 0.0;
                m[(j, 3)] = 0.0;
            }
        }
        let s = TrajectorySimilarity::from_matrix(m, 0.01).unwrap();
        let [a, b] = spectral_cluster_2(&s, 0).unwrap();
        assert_eq!(b, vec![3]);
        assert_eq!(a.len(), 9);
    }

    #[test]
    fn kmeans_two_obvious_groups() {
        let pts: Vec<[f64; 2]> = (0..20)
            .map(|i| if i % 2 == 0 { [0.0 + i as f64 * 1e-3, 0.0] } else { [5.0, 5.0 + i as f64 * 1e-3] })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = kmeans(&pts, 2, 10, &mut rng);
        for i in 0..20 {
            assert_eq!(r.labels[i] == r.labels[0], i % 2 == 0);
        }
    }

    #[test]
    fn kmeans_identical_points_still_fills_clusters() {
        let pts = vec![[1.0, 1.0]; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = kmeans(&pts, 2, 3, &mut rng);
        assert!(r.labels.contains(&0) && r.labels.contains(&1));
    }
}
