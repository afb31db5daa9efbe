//! Lloyd's k-means with k-means++ seeding and restarts.

use rand::Rng;

pub const RESTARTS: usize = 20;
const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Clusters {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].clone());
        let c = centroids.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centroids
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Clusters {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (l, p) in labels.iter_mut().zip(points) {
            let (j, _) = nearest(p, &centroids);
            if *l != j {
                *l = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&l, p) in labels.iter().zip(points) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for s in sums[j].iter_mut() {
                    *s /= counts[j] as f64;
                }
                centroids[j] = std::mem::take(&mut sums[j]);
            }
        }
        // an emptied cluster is re-seeded at the point farthest from its centroid
        for j in 0..k {
            if counts[j] == 0 {
                let far = points
                    .iter()
                    .zip(&labels)
                    .map(|(p, &l)| sq_dist(p, &centroids[l]))
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                centroids[j] = points[far].clone();
                labels[far] = j;
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    Clusters { labels, inertia }
}

/// Clusters `points` into `k` groups, keeping the lowest-inertia restart.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, restarts: usize, rng: &mut R) -> Clusters {
    assert!(k >= 1 && points.len() >= k, "k-means needs at least k points");
    let mut best: Option<Clusters> = None;
    for _ in 0..restarts.max(1) {
        let c = lloyd(points, plus_plus(points, k, rng));
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    best.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn separated_blobs() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(vec![0.0 + 0.01 * i as f64, 0.0]);
            pts.push(vec![10.0, 10.0 + 0.01 * i as f64]);
        }
        let c = kmeans(&pts, 2, RESTARTS, &mut stream(1, Stream::Clustering));
        for i in 0..10 {
            assert_eq!(c.labels[2 * i], c.labels[0]);
            assert_eq!(c.labels[2 * i + 1], c.labels[1]);
        }
        assert_ne!(c.labels[0], c.labels[1]);
    }

    #[test]
    fn one_point_per_cluster() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let c = kmeans(&pts, 5, RESTARTS, &mut stream(2, Stream::Clustering));
        assert_eq!(c.inertia, 0.0);
        let mut l = c.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn seeded_determinism() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()])
            .collect();
        let a = kmeans(&pts, 4, RESTARTS, &mut stream(3, Stream::Clustering));
        let b = kmeans(&pts, 4, RESTARTS, &mut stream(3, Stream::Clustering));
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_fill_every_cluster() {
        let pts = vec![vec![1.0, 1.0]; 6];
        let c = kmeans(&pts, 3, 2, &mut stream(4, Stream::Clustering));
        assert_eq!(c.inertia, 0.0);
        assert_eq!(c.labels.len(), 6);
    }
}
