//! Long-timescale grouping of pairs and orthogonal RB allocation.
//!
//! Pairs are grouped by spectral clustering of a Gaussian similarity over
//! pair midpoints: the rows of the eigenvectors of the `g` smallest
//! eigenvalues of the normalized Laplacian `I - D^-1/2 S D^-1/2`,
//! normalized to unit length, are clustered by k-means. Inside a group the
//! RBs are dealt out round-robin so no RB is used twice.

pub mod jacobi;
pub mod kmeans;

use rand::Rng;

use crate::error::Result;
use crate::mobility::{distance, Point};

pub use jacobi::{jacobi_eigen, SymEigen, SymMatrix};
pub use kmeans::{kmeans, Clusters, RESTARTS};

/// Gaussian similarity `exp(-|v_k - v_k'|^2 / gamma^2)`, zero beyond `phi`.
pub fn similarity(midpoints: &[Point], gamma: f64, phi: f64) -> SymMatrix {
    SymMatrix::from_fn(midpoints.len(), |i, j| {
        let d = distance(midpoints[i], midpoints[j]);
        if d <= phi {
            (-(d * d) / (gamma * gamma)).exp()
        } else {
            0.0
        }
    })
}

/// `I - D^-1/2 S D^-1/2` with `D` the diagonal degree matrix of `S`.
pub fn normalized_laplacian(s: &SymMatrix) -> SymMatrix {
    let n = s.dim();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = (0..n).map(|j| s.get(i, j)).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    SymMatrix::from_fn(n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * s.get(i, j) * inv_sqrt[j]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// One unit-length row per pair, `g` columns.
    pub rows: Vec<Vec<f64>>,
    /// The `g` smallest Laplacian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// The `g`-th and `(g+1)`-th eigenvalues coincide, so the embedding
    /// depends on an arbitrary basis choice.
    pub degenerate: bool,
}

/// Spectral embedding of a similarity matrix into `g` dimensions.
pub fn spectral_embed(s: &SymMatrix, g: usize) -> Result<Embedding> {
    let n = s.dim();
    let g = g.min(n);
    let eig = jacobi_eigen(&normalized_laplacian(s))?;
    let degenerate = g < n && (eig.values[g] - eig.values[g - 1]).abs() < 1e-9;
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..g).map(|j| eig.vector_component(i, j)).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
            row
        })
        .collect();
    Ok(Embedding {
        rows,
        eigenvalues: eig.values[..g].to_vec(),
        degenerate,
    })
}

/// Partition of the pairs into groups `0..groups`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    pub labels: Vec<usize>,
    pub groups: usize,
    pub degenerate: bool,
}

impl GroupAssignment {
    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&k| self.labels[k] == group).collect()
    }
}

/// Spectral clustering of pair midpoints into `g` groups.
pub fn cluster_pairs<R: Rng + ?Sized>(
    midpoints: &[Point],
    g: usize,
    gamma: f64,
    phi: f64,
    rng: &mut R,
) -> Result<GroupAssignment> {
    let g = g.min(midpoints.len()).max(1);
    let emb = spectral_embed(&similarity(midpoints, gamma, phi), g)?;
    let c = kmeans(&emb.rows, g, RESTARTS, rng);
    Ok(GroupAssignment {
        labels: c.labels,
        groups: g,
        degenerate: emb.degenerate,
    })
}

/// RB sets per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RbMap {
    pub per_pair: Vec<Vec<usize>>,
    /// Pairs left without an RB because their group exceeds `N`.
    pub starved: Vec<usize>,
}

impl RbMap {
    /// Pairs using each RB.
    pub fn users(&self, rbs: usize) -> Vec<Vec<usize>> {
        let mut users = vec![Vec::new(); rbs];
        for (k, set) in self.per_pair.iter().enumerate() {
            for &n in set {
                users[n].push(k);
            }
        }
        users
    }
}

/// Deals the `rbs` RBs round-robin over each group's members in index
/// order. Members beyond the first `rbs` of an oversized group get nothing.
pub fn allocate_rbs(assignment: &GroupAssignment, rbs: usize) -> RbMap {
    let mut per_pair = vec![Vec::new(); assignment.labels.len()];
    let mut starved = Vec::new();
    for g in 0..assignment.groups {
        let members = assignment.members(g);
        if members.is_empty() {
            continue;
        }
        if members.len() <= rbs {
            for n in 0..rbs {
                per_pair[members[n % members.len()]].push(n);
            }
        } else {
            for (n, &k) in members.iter().enumerate() {
                if n < rbs {
                    per_pair[k].push(n);
                } else {
                    starved.push(k);
                }
            }
        }
    }
    starved.sort_unstable();
    RbMap { per_pair, starved }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng;

    #[test]
    fn similarity_kernel() {
        let s = similarity(&[[0.0, 0.0], [30.0, 0.0], [181.0, 0.0]], 30.0, 150.0);
        assert!((s.get(0, 1) - (-1f64).exp()).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.3679).abs() < 1e-4);
        assert_eq!(s.get(1, 2), 0.0);
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(1, 0), s.get(0, 1));
    }

    #[test]
    fn identity_similarity_is_degenerate() {
        let s = SymMatrix::from_fn(4, |i, j| if i == j { 1.0 } else { 0.0 });
        let e = spectral_embed(&s, 2).unwrap();
        assert!(e.degenerate);
        assert!(e.eigenvalues.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn two_blocks_separate_exactly() {
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push([10.0 + 3.0 * i as f64, 0.0]);
        }
        for i in 0..5 {
            pts.push([240.0, 200.0 + 4.0 * i as f64]);
        }
        let s = similarity(&pts, 30.0, 150.0);
        let e = spectral_embed(&s, 2).unwrap();
        assert!(e.eigenvalues[0].abs() < 1e-12 && e.eigenvalues[1].abs() < 1e-12);
        let a = cluster_pairs(&pts, 2, 30.0, 150.0, &mut stream(1, Stream::Clustering)).unwrap();
        assert!(a.labels[..6].iter().all(|&l| l == a.labels[0]));
        assert!(a.labels[6..].iter().all(|&l| l == a.labels[6]));
        assert_ne!(a.labels[0], a.labels[6]);
    }

    #[test]
    fn round_robin_sizes() {
        let a = GroupAssignment {
            labels: vec![0; 8],
            groups: 1,
            degenerate: false,
        };
        let m = allocate_rbs(&a, 20);
        let mut sizes: Vec<usize> = m.per_pair.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3, 3, 3, 3]);

        let a = GroupAssignment {
            labels: vec![0],
            groups: 1,
            degenerate: false,
        };
        assert_eq!(allocate_rbs(&a, 20).per_pair[0], (0..20).collect::<Vec<_>>());

        let a = GroupAssignment {
            labels: vec![0; 25],
            groups: 1,
            degenerate: false,
        };
        let m = allocate_rbs(&a, 20);
        assert_eq!(m.per_pair.iter().filter(|s| s.len() == 1).count(), 20);
        assert_eq!(m.starved, (20..25).collect::<Vec<_>>());
    }

    #[test]
    fn rbs_orthogonal_within_groups() {
        let labels: Vec<usize> = (0..37).map(|k| (k * 7) % 5).collect();
        let a = GroupAssignment {
            labels,
            groups: 5,
            degenerate: false,
        };
        let m = allocate_rbs(&a, 20);
        for g in 0..5 {
            let mut seen = std::collections::HashSet::new();
            let mut total = 0;
            for k in a.members(g) {
                for &n in &m.per_pair[k] {
                    assert!(seen.insert(n), "RB {n} reused in group {g}");
                    total += 1;
                }
            }
            assert_eq!(total, 20);
        }
    }

    /// Eigenvalues of a symmetric 3x3 matrix from the trigonometric roots of
    /// its characteristic cubic, ascending.
    fn cubic_eigenvalues(a: &SymMatrix) -> [f64; 3] {
        let g = |i, j| a.get(i, j);
        let p1 = g(0, 1).powi(2) + g(0, 2).powi(2) + g(1, 2).powi(2);
        let q = (g(0, 0) + g(1, 1) + g(2, 2)) / 3.0;
        let p2 = (g(0, 0) - q).powi(2) + (g(1, 1) - q).powi(2) + (g(2, 2) - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            return [q; 3];
        }
        let b = |i, j| (g(i, j) - if i == j { q } else { 0.0 }) / p;
        let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
            + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
        let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [lo, 3.0 * q - hi - lo, hi]
    }

    fn random_midpoints(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = stream(seed, Stream::Mobility);
        (0..n)
            .map(|_| [rng.random_range(0.0..250.0), rng.random_range(0.0..250.0)])
            .collect()
    }

    #[test]
    fn three_by_three_matches_cubic_roots() {
        for seed in 0..20 {
            let s = similarity(&random_midpoints(3, seed), 30.0, 150.0);
            let l = normalized_laplacian(&s);
            let e = jacobi_eigen(&l).unwrap();
            let oracle = cubic_eigenvalues(&l);
            for (x, y) in e.values.iter().zip(oracle) {
                assert!((x - y).abs() < 1e-8, "seed {seed}: {:?} vs {oracle:?}", e.values);
            }
        }
    }

    #[test]
    fn laplacian_spectrum_and_orthonormal_vectors() {
        for seed in 0..5 {
            let n = 40;
            let l = normalized_laplacian(&similarity(&random_midpoints(n, seed), 30.0, 150.0));
            let e = jacobi_eigen(&l).unwrap();
            assert!(e.values[0].abs() < 1e-10);
            assert!(e.values.iter().all(|&v| (-1e-10..=2.0 + 1e-10).contains(&v)));
            let g = 10;
            for a in 0..g {
                for b in 0..g {
                    let dot: f64 = (0..n)
                        .map(|i| e.vector_component(i, a) * e.vector_component(i, b))
                        .sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-8);
                }
            }
            let emb = spectral_embed(&similarity(&random_midpoints(n, seed), 30.0, 150.0), g).unwrap();
            for row in &emb.rows {
                assert!((row.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
