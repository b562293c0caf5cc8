//! Seeded k-means (k-means++ init, Lloyd iterations) used as the IVF coarse
//! quantizer. Clustering runs on squared Euclidean distance; probe selection
//! at query time is a separate, inner-product decision.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::IndexError;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome {
    /// k * dim, row-major.
    pub centroids: Vec<f32>,
    /// For each input vector, the centroid it belongs to.
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub wcss_history: Vec<f64>,
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        acc += d * d;
    }
    acc
}

fn nearest_centroid(v: &[f32], centroids: &[f32], dim: usize, k: usize) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for c in 0..k {
        let d = sq_dist(v, &centroids[c * dim..(c + 1) * dim]);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Cluster `n` vectors of `dim` floats (flattened row-major) into `k`
/// centroids. Runs Lloyd iterations until the assignment fixpoint or
/// `max_iters`. A cluster that ends up empty is re-seeded to the point
/// farthest from its current centroid.
pub fn kmeans(
    vectors: &[f32],
    dim: usize,
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<KMeansOutcome, IndexError> {
    assert!(dim > 0, "dimension must be positive");
    let n = vectors.len() / dim;
    if k == 0 || k > n {
        return Err(IndexError::BadClusterCount { k, n });
    }
    let vec_at = |i: usize| &vectors[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding: first centroid uniform, then D^2-weighted
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(vec_at(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(vec_at(i), vec_at(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total <= 0.0 {
            // all remaining points coincide with a centroid; pick round-robin
            c % n
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centroids.extend_from_slice(vec_at(chosen));
        for (i, slot) in d2.iter_mut().enumerate() {
            let d = sq_dist(vec_at(i), vec_at(chosen));
            if d < *slot {
                *slot = d;
            }
        }
    }

    let mut assignments = vec![0usize; n];
    let mut wcss_history = Vec::new();
    for _ in 0..max_iters.max(1) {
        // assignment step
        let mut changed = false;
        let mut wcss = 0.0f64;
        for (i, assigned) in assignments.iter_mut().enumerate() {
            let (best, best_d) = nearest_centroid(vec_at(i), &centroids, dim, k);
            wcss += best_d;
            if *assigned != best {
                *assigned = best;
                changed = true;
            }
        }
        wcss_history.push(wcss);
        if !changed && wcss_history.len() > 1 {
            break;
        }

        // update step
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (j, &x) in vec_at(i).iter().enumerate() {
                sums[c * dim + j] += x as f64;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed to the point farthest from its assigned centroid
                let mut far = 0usize;
                let mut far_d = -1.0f64;
                for i in 0..n {
                    let d = sq_dist(
                        vec_at(i),
                        &centroids[assignments[i] * dim..(assignments[i] + 1) * dim],
                    );
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                centroids[c * dim..(c + 1) * dim].copy_from_slice(vec_at(far));
                assignments[far] = c;
            } else {
                for j in 0..dim {
                    centroids[c * dim + j] = (sums[c * dim + j] / counts[c] as f64) as f32;
                }
            }
        }
    }

    // final assignment so centroids and assignments agree on exit
    for (i, assigned) in assignments.iter_mut().enumerate() {
        *assigned = nearest_centroid(vec_at(i), &centroids, dim, k).0;
    }

    Ok(KMeansOutcome {
        centroids,
        assignments,
        wcss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_distant_pairs_find_midpoints() {
        // corners of two far-apart pairs; k=2 puts centroids at the midpoints
        let vectors = vec![
            0.0f32, 0.0, //
            0.0, 2.0, //
            100.0, 0.0, //
            100.0, 2.0,
        ];
        let out = kmeans(&vectors, 2, 2, 50, 3).unwrap();
        let mut mids: Vec<(f32, f32)> = (0..2)
            .map(|c| (out.centroids[c * 2], out.centroids[c * 2 + 1]))
            .collect();
        mids.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(mids[0], (0.0, 1.0));
        assert_eq!(mids[1], (100.0, 1.0));
        assert_eq!(out.assignments[0], out.assignments[1]);
        assert_eq!(out.assignments[2], out.assignments[3]);
        assert_ne!(out.assignments[0], out.assignments[2]);
    }

    #[test]
    fn k_equals_n_reaches_zero_wcss() {
        let vectors = vec![0.0f32, 0.0, 5.0, 5.0, -3.0, 9.0];
        let out = kmeans(&vectors, 2, 3, 50, 11).unwrap();
        assert_eq!(*out.wcss_history.last().unwrap(), 0.0);
        let mut assigned = out.assignments.clone();
        assigned.sort();
        assert_eq!(assigned, vec![0, 1, 2]);
    }

    #[test]
    fn wcss_is_monotone_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let vectors: Vec<f32> = (0..200 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = kmeans(&vectors, 6, 8, 40, 5).unwrap();
        for pair in out.wcss_history.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "wcss increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vectors: Vec<f32> = (0..50 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = kmeans(&vectors, 4, 5, 30, 42).unwrap();
        let b = kmeans(&vectors, 4, 5, 30, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_k() {
        let vectors = vec![0.0f32, 1.0];
        assert!(matches!(
            kmeans(&vectors, 1, 3, 10, 0),
            Err(IndexError::BadClusterCount { k: 3, n: 2 })
        ));
        assert!(kmeans(&vectors, 1, 0, 10, 0).is_err());
    }
}
