use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExemplarError;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    /// Euclidean on unit-normalized vectors.
    Cosine,
}

impl Metric {
    /// Vectors as the clustering sees them.
    pub fn prepare(self, vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
        match self {
            Metric::Euclidean => vectors.to_vec(),
            Metric::Cosine => vectors
                .iter()
                .map(|v| {
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n == 0.0 {
                        v.clone()
                    } else {
                        v.iter().map(|x| x / n).collect()
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub seed: u64,
    pub metric: Metric,
    pub iterations: usize,
    /// Within-cluster sum of squares after each iteration.
    pub distortion: Vec<f64>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (c, cv) in centroids.iter().enumerate() {
        let d = sq_dist(p, cv);
        if d < bd {
            bd = d;
            best = c;
        }
    }
    best
}

/// Within-cluster sum of squared distances.
pub fn wcss(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points.iter().zip(assignments).map(|(p, &a)| sq_dist(p, &centroids[a])).sum()
}

/// Seeded start, then repeatedly the point farthest from every chosen
/// centroid (lowest index on ties).
fn init_centroids(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..points.len());
    let mut centroids = vec![points[first].clone()];
    let mut min_d: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let mut far = 0;
        for (i, &d) in min_d.iter().enumerate() {
            if d > min_d[far] {
                far = i;
            }
        }
        centroids.push(points[far].clone());
        for (i, p) in points.iter().enumerate() {
            min_d[i] = min_d[i].min(sq_dist(p, &points[far]));
        }
    }
    centroids
}

/// Fills each empty cluster with the point farthest from its own centroid,
/// taken from a cluster that can spare one.
fn repair(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let mut victim: Option<(usize, f64)> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = sq_dist(&points[i], &centroids[a]);
            if victim.is_none_or(|(_, vd)| d > vd) {
                victim = Some((i, d));
            }
        }
        let (i, _) = victim.expect("k <= n leaves a cluster with two points");
        assignments[i] = empty;
        centroids[empty] = points[i].clone();
    }
}

fn means(points: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        for x in s.iter_mut() {
            *x /= n as f64;
        }
    }
    sums
}

/// Lloyd's algorithm until the assignment stops changing or
/// [`MAX_ITERATIONS`] is reached.
pub fn cluster_kmeans(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
    metric: Metric,
) -> Result<ClusterModel, ExemplarError> {
    if k == 0 || vectors.len() < k {
        return Err(ExemplarError::PoolTooSmall { needed: k.max(1), available: vectors.len() });
    }
    let dim = vectors[0].len();
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(ExemplarError::DimensionMismatch { id: i.to_string(), expected: dim, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ExemplarError::NonFinite { id: i.to_string() });
        }
    }
    let points = metric.prepare(vectors);
    let mut centroids = init_centroids(&points, k, seed);
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    repair(&points, &mut centroids, &mut assignments);
    let mut distortion = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        centroids = means(&points, &assignments, k, dim);
        distortion.push(wcss(&points, &centroids, &assignments));
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        // Keep the current cluster when it is as close as the new one, so
        // equal-distance points do not oscillate.
        for (i, n) in next.iter_mut().enumerate() {
            let cur = assignments[i];
            if sq_dist(&points[i], &centroids[cur]) <= sq_dist(&points[i], &centroids[*n]) {
                *n = cur;
            }
        }
        repair(&points, &mut centroids, &mut next);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    centroids = means(&points, &assignments, k, dim);
    Ok(ClusterModel { k, centroids, assignments, seed, metric, iterations, distortion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_square_each_point_own_cluster() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let m = cluster_kmeans(&pts, 4, 42, Metric::Euclidean).unwrap();
        let mut seen = m.assignments.clone();
        seen.sort();
        assert_eq!(seen, [0, 1, 2, 3]);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(&m.centroids[m.assignments[i]], p);
        }
        assert_eq!(*m.distortion.last().unwrap(), 0.0);
    }

    #[test]
    fn identical_points_are_repaired() {
        let pts = vec![vec![2.0, 2.0]; 5];
        let m = cluster_kmeans(&pts, 2, 1, Metric::Euclidean).unwrap();
        assert!(m.assignments.contains(&0) && m.assignments.contains(&1));
        assert_eq!(m.centroids[0], m.centroids[1]);
    }

    #[test]
    fn too_small_pool() {
        assert!(matches!(
            cluster_kmeans(&[vec![0.0]], 2, 0, Metric::Euclidean),
            Err(ExemplarError::PoolTooSmall { needed: 2, available: 1 })
        ));
    }

    #[test]
    fn cosine_ignores_length() {
        let pts = vec![vec![1.0, 0.0], vec![10.0, 0.0], vec![0.0, 1.0], vec![0.0, 7.0]];
        let m = cluster_kmeans(&pts, 2, 5, Metric::Cosine).unwrap();
        assert_eq!(m.assignments[0], m.assignments[1]);
        assert_eq!(m.assignments[2], m.assignments[3]);
        assert_ne!(m.assignments[0], m.assignments[2]);
    }

    proptest! {
        #[test]
        fn distortion_never_increases(
            pts in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 4..40),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let m = cluster_kmeans(&pts, k, seed, Metric::Euclidean).unwrap();
            for w in m.distortion.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", m.distortion);
            }
            prop_assert_eq!(m.assignments.len(), pts.len());
            for c in 0..k {
                prop_assert!(m.assignments.contains(&c));
            }
            prop_assert!(m.centroids.iter().flatten().all(|x| x.is_finite()));
            let again = cluster_kmeans(&pts, k, seed, Metric::Euclidean).unwrap();
            prop_assert_eq!(again, m);
        }
    }
}
