//! Reference algorithms: DP-means and Lloyd's k-means with k-means++ seeding.
//!
//! DP-means uses the same spawn rule as DP-MoM (a row spawns when its
//! squared distance to every centroid exceeds `lambda`) but refits each
//! centroid as its cluster mean. Its objective sums the losses instead of
//! averaging them, so the same `lambda` does not mean the same thing for
//! both algorithms.

use rand::Rng;

use crate::domain::{Assignment, CentroidSet, DataMatrix};
use crate::dpmom::spawn_sweep;
use crate::error::{contract, Result};
use crate::objective::{check_dims, nearest, sq_dist};
use crate::partition::sample_weighted;
use crate::result::{AlgorithmConfig, ClusteringResult};
use crate::rng::SeededRng;

fn cluster_means(data: &DataMatrix, labels: &Assignment, k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let p = data.cols();
    let mut sums = vec![vec![0.0; p]; k];
    let mut counts = vec![0usize; k];
    for (x, &l) in data.iter_rows().zip(labels.labels()) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    (sums, counts)
}

/// `sum_i min_j ||x_i - theta_j||^2 + lambda * k`.
pub fn dp_means_objective(data: &DataMatrix, centroids: &CentroidSet, lambda: f64) -> Result<f64> {
    check_dims(data, centroids)?;
    let loss: f64 = data.iter_rows().map(|x| nearest(x, centroids).loss).sum();
    Ok(loss + lambda * centroids.len() as f64)
}

/// Hard-clustering DP-means.
///
/// Starts from the grand mean. Each sweep labels rows in order, spawning a
/// centroid at any row farther than `lambda` from all centroids, then moves
/// every centroid to its cluster mean and drops clusters left empty. Stops
/// when the labels stop changing, the objective changes by a relative amount
/// of at most `delta`, or after `t_max` sweeps.
pub fn dp_means(data: &DataMatrix, lambda: f64, t_max: usize, delta: f64) -> Result<ClusteringResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(contract(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if t_max == 0 {
        return Err(contract("t_max must be at least 1"));
    }
    let n = data.rows();
    let mut centroids = CentroidSet::single(data.mean())?;
    let mut labels = Assignment::constant(n, 0);
    let mut previous: Option<Assignment> = None;
    let mut trace = Vec::new();
    let mut converged = false;

    while trace.len() < t_max {
        spawn_sweep(data, &mut centroids, &mut labels, lambda, n)?;
        let (means, counts) = cluster_means(data, &labels, centroids.len());
        let keep: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] > 0).collect();
        let mut remap = vec![0; counts.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        centroids = CentroidSet::new(keep.iter().map(|&j| means[j].clone()).collect())?;
        labels = Assignment::new(labels.labels().iter().map(|&l| remap[l]).collect());

        let objective = dp_means_objective(data, &centroids, lambda)?;
        let stalled = trace
            .last()
            .is_some_and(|&prev: &f64| prev == 0.0 || (objective / prev - 1.0).abs() <= delta);
        trace.push(objective);
        if previous.as_ref() == Some(&labels) || stalled {
            converged = true;
            break;
        }
        previous = Some(labels.clone());
    }

    let labels = Assignment::new(data.iter_rows().map(|x| nearest(x, &centroids).nearest).collect());
    Ok(ClusteringResult {
        labels,
        k: centroids.len(),
        centroids,
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        config: AlgorithmConfig::DpMeans { lambda, t_max, delta },
        seed: None,
    })
}

/// k-means++ seeding: the first seed is uniform, each later seed is drawn
/// with probability proportional to its squared distance from the nearest
/// seed chosen so far.
pub fn kmeans_pp_seed(data: &DataMatrix, k: usize, rng: &mut SeededRng) -> Result<CentroidSet> {
    let n = data.rows();
    if k == 0 || k > n {
        return Err(contract(format!("k must lie in 1..={n}, got {k}")));
    }
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut seeds = vec![data.row(first).to_vec()];
    let mut dist: Vec<f64> = data.iter_rows().map(|x| sq_dist(x, data.row(first))).collect();
    while seeds.len() < k {
        let weights: Vec<f64> = dist
            .iter()
            .zip(&chosen)
            .map(|(&d, &c)| if c { 0.0 } else { d })
            .collect();
        let pick = if weights.iter().any(|&w| w > 0.0) {
            sample_weighted(&weights, rng)
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let centre = data.row(pick);
        for (d, x) in dist.iter_mut().zip(data.iter_rows()) {
            *d = d.min(sq_dist(x, centre));
        }
        seeds.push(centre.to_vec());
    }
    CentroidSet::new(seeds)
}

/// Lloyd's alternating assignment / mean update from the given seeds.
///
/// A cluster that loses all its members is re-seeded at the row currently
/// farthest from its own centroid. Stops when an update leaves the centroids
/// unchanged, the objective changes by a relative amount of at most
/// `delta`, or after `t_max` iterations.
pub fn lloyd(data: &DataMatrix, seeds: &CentroidSet, t_max: usize, delta: f64) -> Result<ClusteringResult> {
    check_dims(data, seeds)?;
    if t_max == 0 {
        return Err(contract("t_max must be at least 1"));
    }
    let k = seeds.len();
    let mut centroids = seeds.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;

    while trace.len() < t_max {
        let labels = Assignment::new(data.iter_rows().map(|x| nearest(x, &centroids).nearest).collect());
        let (mut means, counts) = cluster_means(data, &labels, k);
        let mut taken = vec![false; data.rows()];
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = data
                .iter_rows()
                .enumerate()
                .filter(|(i, _)| !taken[*i])
                .map(|(i, x)| (i, sq_dist(x, centroids.get(labels.labels()[i]))))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            taken[far] = true;
            means[j] = data.row(far).to_vec();
        }
        let updated = CentroidSet::new(means)?;
        let objective: f64 = data.iter_rows().map(|x| nearest(x, &updated).loss).sum();
        let unchanged = updated == centroids;
        let stalled = trace
            .last()
            .is_some_and(|&prev: &f64| prev == 0.0 || (objective / prev - 1.0).abs() <= delta);
        centroids = updated;
        trace.push(objective);
        if unchanged || stalled {
            converged = true;
            break;
        }
    }

    let labels = Assignment::new(data.iter_rows().map(|x| nearest(x, &centroids).nearest).collect());
    Ok(ClusteringResult {
        labels,
        k,
        centroids,
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        config: AlgorithmConfig::Kmeans { k, t_max, delta, seed: None },
        seed: None,
    })
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans(data: &DataMatrix, k: usize, t_max: usize, delta: f64, seed: u64) -> Result<ClusteringResult> {
    let seeds = kmeans_pp_seed(data, k, &mut SeededRng::new(seed))?;
    let mut r = lloyd(data, &seeds, t_max, delta)?;
    r.config = AlgorithmConfig::Kmeans { k, t_max, delta, seed: Some(seed) };
    r.seed = Some(seed);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::dpmom::assign_and_spawn;
    use crate::metrics::ari;
    use crate::objective::pairwise_sq_extremes;
    use proptest::prelude::*;

    fn blobs(seed: u64, per: usize, centres: &[[f64; 2]], spread: f64) -> (DataMatrix, Assignment) {
        let mut rng = SeededRng::new(seed);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per {
                pts.push([
                    centre[0] + rng.random_range(-spread..spread),
                    centre[1] + rng.random_range(-spread..spread),
                ]);
                truth.push(c);
            }
        }
        (DataMatrix::from_rows(&pts).unwrap(), Assignment::new(truth))
    }

    fn blob_means(data: &DataMatrix, truth: &Assignment, k: usize) -> Vec<Vec<f64>> {
        cluster_means(data, truth, k).0
    }

    #[test]
    fn dp_means_large_lambda_gives_grand_mean() {
        let (data, _) = blobs(1, 10, &[[0.0, 0.0], [10.0, 0.0]], 1.0);
        let (_, max) = pairwise_sq_extremes(&data).unwrap();
        let r = dp_means(&data, max, 50, 1e-9).unwrap();
        assert_eq!(r.k, 1);
        let mean = data.mean();
        for (a, b) in r.centroids.get(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_means_recovers_blob_means() {
        let (data, truth) = blobs(2, 15, &[[0.0, 0.0], [20.0, 0.0]], 1.0);
        let r = dp_means(&data, 50.0, 100, 1e-12).unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(ari(&r.labels, &truth).unwrap(), 1.0);
        let means = blob_means(&data, &truth, 2);
        for (j, c) in r.centroids.iter().enumerate() {
            let m = &means[truth.labels()[r.labels.labels().iter().position(|&l| l == j).unwrap()]];
            assert!(sq_dist(c, m) < 1e-20);
        }
    }

    #[test]
    fn dp_means_is_dragged_by_an_outlier() {
        let (data, _) = blobs(3, 15, &[[0.0, 0.0], [20.0, 0.0]], 1.0);
        let clean = dp_means(&data, 50.0, 100, 1e-12).unwrap();
        let dirty_data = data.vstack(&DataMatrix::from_rows(&[[10.0, 6.0]]).unwrap()).unwrap();
        let dirty = dp_means(&dirty_data, 50.0, 100, 1e-12).unwrap();
        // Either a new cluster appears or one mean shifts.
        let shifted = clean
            .centroids
            .iter()
            .map(|c| dirty.centroids.iter().map(|d| sq_dist(c, d)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        assert!(dirty.k != clean.k || shifted > 1e-6);
    }

    #[test]
    fn dp_means_objective_never_increases() {
        for seed in 0..20 {
            let (data, _) = blobs(seed, 12, &[[0.0, 0.0], [6.0, 0.0], [3.0, 5.0]], 2.0);
            let r = dp_means(&data, 8.0, 100, 1e-15).unwrap();
            for w in r.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", r.objective_trace);
            }
        }
    }

    #[test]
    fn first_sweep_matches_dpmom_spawn_rule() {
        let (data, _) = blobs(4, 12, &[[0.0, 0.0], [9.0, 0.0], [4.0, 7.0]], 1.5);
        let start = CentroidSet::single(data.mean()).unwrap();
        let (labels, cs) = assign_and_spawn(&data, &start, 10.0, data.rows()).unwrap();
        let mut c2 = start.clone();
        let mut l2 = Assignment::constant(data.rows(), 0);
        spawn_sweep(&data, &mut c2, &mut l2, 10.0, data.rows()).unwrap();
        assert_eq!((labels, cs), (l2, c2));
    }

    #[test]
    fn seeding_examples() {
        let (data, _) = blobs(5, 5, &[[0.0, 0.0]], 1.0);
        let one = kmeans_pp_seed(&data, 1, &mut SeededRng::new(0)).unwrap();
        assert!(data.iter_rows().any(|x| x == one.get(0)));
        let all = kmeans_pp_seed(&data, 5, &mut SeededRng::new(0)).unwrap();
        let mut picked: Vec<Vec<f64>> = all.into_inner();
        picked.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut rows: Vec<Vec<f64>> = data.iter_rows().map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(picked, rows);
        assert!(kmeans_pp_seed(&data, 6, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn seeding_separates_far_pairs() {
        let data = DataMatrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [100.0, 0.0], [100.1, 0.0]]).unwrap();
        let hits = (0..1000)
            .filter(|&s| {
                let cs = kmeans_pp_seed(&data, 2, &mut SeededRng::new(s)).unwrap();
                (cs.get(0)[0] > 50.0) != (cs.get(1)[0] > 50.0)
            })
            .count();
        assert!(hits >= 900, "{hits}");
    }

    #[test]
    fn lloyd_examples() {
        let data = DataMatrix::from_rows(&[[0.0], [1.0], [9.0], [10.0]]).unwrap();
        let seeds = CentroidSet::new(vec![vec![0.0], vec![10.0]]).unwrap();
        let r = lloyd(&data, &seeds, 100, 1e-12).unwrap();
        assert_eq!(r.centroids.as_slice(), &[vec![0.5], vec![9.5]]);

        let one = lloyd(&data, &CentroidSet::single(vec![3.0]).unwrap(), 1, 1e-12).unwrap();
        assert_eq!(one.centroids.get(0), &[5.0]);

        let (data, truth) = blobs(6, 10, &[[0.0, 0.0], [30.0, 0.0]], 1.0);
        let means = CentroidSet::new(blob_means(&data, &truth, 2)).unwrap();
        let r = lloyd(&data, &means, 100, 1e-12).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(ari(&r.labels, &truth).unwrap(), 1.0);
    }

    #[test]
    fn lloyd_reseeds_empty_clusters() {
        let data = DataMatrix::from_rows(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
        let seeds = CentroidSet::new(vec![vec![1.0], vec![500.0]]).unwrap();
        let r = lloyd(&data, &seeds, 100, 1e-12).unwrap();
        assert_eq!(r.cluster_sizes().iter().filter(|&&s| s > 0).count(), 2);
    }

    proptest! {
        #[test]
        fn lloyd_objective_is_monotone(seed in 0u64..500, k in 1usize..5) {
            let (data, _) = blobs(seed, 8, &[[0.0, 0.0], [5.0, 1.0], [2.0, 6.0]], 2.5);
            let seeds = kmeans_pp_seed(&data, k, &mut SeededRng::new(seed)).unwrap();
            let start: f64 = data.iter_rows().map(|x| nearest(x, &seeds).loss).sum();
            let r = lloyd(&data, &seeds, 100, 1e-15).unwrap();
            let mut prev = start;
            for &v in &r.objective_trace {
                prop_assert!(v <= prev * (1.0 + 1e-12));
                prev = v;
            }
        }
    }
}
