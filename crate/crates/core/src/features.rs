//! Site features from regime-wise activations, k-means, and the silhouette
//! and adjusted Rand index used to select and score clusterings.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row `n` concatenates the activations of site `n` under regimes 1..E:
/// `C` rows `n, N+n, …, (E−1)N+n`.
pub fn site_features<T: Scalar>(c: &Array2<T>, regimes: usize, sites: usize) -> Result<Array2<T>> {
    if regimes == 0 || sites == 0 || c.nrows() != regimes * sites {
        return Err(Error::DimensionMismatch(format!(
            "activation matrix has {} rows, expected E·N = {}·{}",
            c.nrows(),
            regimes,
            sites
        )));
    }
    let r = c.ncols();
    Ok(Array2::from_shape_fn((sites, regimes * r), |(n, col)| {
        let (e, q) = (col / r, col % r);
        c[[e * sites + n, q]]
    }))
}

fn sq_dist<T: Scalar>(x: ArrayView1<'_, T>, y: ArrayView1<'_, T>) -> T {
    x.iter()
        .zip(y.iter())
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct KMeansResult<T> {
    pub labels: Vec<usize>,
    pub centers: Array2<T>,
    pub inertia: T,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<T>,
}

const LLOYD_MAX_ITER: usize = 300;

fn plus_plus_seed<T: Scalar>(points: &Array2<T>, k: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let n = points.nrows();
    let mut centers = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)).to_f64_lossy())
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            let nd = sq_dist(points.row(i), centers.row(c)).to_f64_lossy();
            if nd < *d {
                *d = nd;
            }
        }
    }
    centers
}

fn assign<T: Scalar>(points: &Array2<T>, centers: &Array2<T>, labels: &mut [usize], dist: &mut [T]) -> T {
    let mut inertia = T::zero();
    for i in 0..points.nrows() {
        let mut best = 0;
        let mut best_d = T::infinity();
        for c in 0..centers.nrows() {
            let d = sq_dist(points.row(i), centers.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
        dist[i] = best_d;
        inertia += best_d;
    }
    inertia
}

fn lloyd<T: Scalar>(points: &Array2<T>, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult<T> {
    let (n, dim) = points.dim();
    let mut centers = plus_plus_seed(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![T::zero(); n];
    let mut trace = Vec::new();
    let mut previous: Vec<usize> = Vec::new();
    for _ in 0..LLOYD_MAX_ITER {
        let inertia = assign(points, &centers, &mut labels, &mut dist);
        trace.push(inertia);
        if labels == previous {
            break;
        }
        previous.clone_from(&labels);
        let mut sums = Array2::<T>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = sums.row_mut(labels[i]);
            row += &points.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = T::from_usize_lossy(counts[c]);
                centers.row_mut(c).assign(&sums.row(c).mapv(|v| v / cnt));
            } else {
                // Empty cluster: move it onto the point farthest from its center.
                let far = (0..n)
                    .max_by(|&x, &y| dist[x].partial_cmp(&dist[y]).unwrap_or(std::cmp::Ordering::Equal))
                    .expect("non-empty point set");
                centers.row_mut(c).assign(&points.row(far));
                dist[far] = T::zero();
            }
        }
    }
    let inertia = *trace.last().expect("at least one assignment");
    KMeansResult {
        labels,
        centers,
        inertia,
        inertia_trace: trace,
    }
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by inertia.
pub fn kmeans<T: Scalar>(points: &Array2<T>, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult<T>> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    let mut best: Option<KMeansResult<T>> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(restart as u64));
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let compact = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect();
    (compact, ids.len())
}

/// Mean silhouette with Euclidean distance. Points alone in their cluster
/// score 0, as does `0/0`.
pub fn silhouette<T: Scalar>(points: &Array2<T>, labels: &[usize]) -> Result<T> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    let (ids, clusters) = compact_labels(labels);
    if clusters < 2 {
        return Err(Error::InvalidConfig("silhouette needs at least 2 clusters".into()));
    }
    let mut sizes = vec![0usize; clusters];
    for &c in &ids {
        sizes[c] += 1;
    }
    let mut total = T::zero();
    let mut sums = vec![T::zero(); clusters];
    for i in 0..n {
        if sizes[ids[i]] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = T::zero());
        for j in 0..n {
            if i != j {
                sums[ids[j]] += sq_dist(points.row(i), points.row(j)).sqrt();
            }
        }
        let own = ids[i];
        let a = sums[own] / T::from_usize_lossy(sizes[own] - 1);
        let mut b = T::infinity();
        for c in 0..clusters {
            if c != own {
                b = b.min(sums[c] / T::from_usize_lossy(sizes[c]));
            }
        }
        let denom = a.max(b);
        if denom > T::zero() {
            total += (b - a) / denom;
        }
    }
    Ok(total / T::from_usize_lossy(n))
}

fn comb2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Pair-counting adjusted Rand index. Two trivial partitions (where the
/// index is undefined) score 1.
pub fn adjusted_rand_index(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "label lengths {} and {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    let n = labels_a.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in labels_a.iter().zip(labels_b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: u64 = table.values().map(|&v| v * v.saturating_sub(1) / 2).sum();
    let sum_a: u64 = rows.values().map(|&v| v * v.saturating_sub(1) / 2).sum();
    let sum_b: u64 = cols.values().map(|&v| v * v.saturating_sub(1) / 2).sum();
    ari_from_pair_counts(index, sum_a, sum_b, n)
}

/// ARI from pair counts: pairs together in both partitions, pairs together
/// in the first, pairs together in the second, and the number of points.
pub fn ari_from_pair_counts(both: u64, in_a: u64, in_b: u64, n: u64) -> Result<f64> {
    let total = comb2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = in_a as f64 * in_b as f64 / total;
    let max = 0.5 * (in_a as f64 + in_b as f64);
    if max == expected {
        return Ok(1.0);
    }
    Ok((both as f64 - expected) / (max - expected))
}

#[derive(Debug, Clone)]
pub struct KSelection<T> {
    pub best_k: usize,
    /// `(k, silhouette)` for every candidate that produced ≥ 2 clusters.
    pub scores: Vec<(usize, T)>,
    pub labels: Vec<usize>,
}

/// Runs k-means for each `k` in `k_min..=k_max` and keeps the best mean
/// silhouette (ties go to the smaller `k`).
pub fn select_k_by_silhouette<T: Scalar>(
    points: &Array2<T>,
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<KSelection<T>> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::InvalidConfig(format!(
            "invalid cluster range {k_min}..={k_max}"
        )));
    }
    if k_max > points.nrows() {
        return Err(Error::InvalidConfig(format!(
            "cannot form {k_max} clusters from {} points",
            points.nrows()
        )));
    }
    let mut best: Option<(usize, T, Vec<usize>)> = None;
    let mut scores = Vec::new();
    for k in k_min..=k_max {
        let run = kmeans(points, k, seed, restarts)?;
        let Ok(score) = silhouette(points, &run.labels) else { continue };
        scores.push((k, score));
        if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
            best = Some((k, score, run.labels));
        }
    }
    let (best_k, _, labels) = best.ok_or_else(|| {
        Error::InvalidConfig("no candidate k produced two or more clusters".into())
    })?;
    Ok(KSelection {
        best_k,
        scores,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn features_layout() {
        let c = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]];
        let f1 = site_features(&c, 1, 4).unwrap();
        assert_eq!(f1, c);
        let f2 = site_features(&c, 2, 2).unwrap();
        assert_eq!(f2, array![[1.0, 2.0, 5.0, 6.0], [3.0, 4.0, 7.0, 8.0]]);
        let single = site_features(&c.slice(ndarray::s![0..2, ..]).to_owned(), 2, 1).unwrap();
        assert_eq!(single, array![[1.0, 2.0, 3.0, 4.0]]);
        assert!(site_features(&c, 3, 2).is_err());
    }

    #[test]
    fn kmeans_duplicated_pairs() {
        let p = array![[0.0, 0.0], [0.0, 0.0], [10.0, 10.0], [10.0, 10.0]];
        let run = kmeans(&p, 2, 1, 10).unwrap();
        assert_eq!(run.inertia, 0.0);
        assert_eq!(run.labels[0], run.labels[1]);
        assert_eq!(run.labels[2], run.labels[3]);
        assert_ne!(run.labels[0], run.labels[2]);
        assert_eq!(silhouette(&p, &run.labels).unwrap(), 1.0);
    }

    #[test]
    fn kmeans_k_equals_n() {
        let p = array![[0.0], [1.0], [5.0], [7.5]];
        assert_eq!(kmeans(&p, 4, 3, 5).unwrap().inertia, 0.0);
        assert!(kmeans(&p, 5, 3, 5).is_err());
    }

    fn blobs(centers: &[[f64; 2]], per: usize, sigma: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut pts = Array2::zeros((centers.len() * per, 2));
        let mut labels = Vec::new();
        for (c, ctr) in centers.iter().enumerate() {
            for p in 0..per {
                let row = c * per + p;
                pts[[row, 0]] = ctr[0] + noise.sample(&mut rng);
                pts[[row, 1]] = ctr[1] + noise.sample(&mut rng);
                labels.push(c);
            }
        }
        (pts, labels)
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let (pts, truth) = blobs(&[[0.0, 0.0], [12.0, 0.0], [0.0, 12.0]], 15, 1.0, 11);
        let run = kmeans(&pts, 3, 5, 10).unwrap();
        assert_eq!(adjusted_rand_index(&run.labels, &truth).unwrap(), 1.0);
        for w in run.inertia_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn silhouette_examples() {
        let (pts, truth) = blobs(&[[0.0, 0.0], [50.0, 0.0]], 10, 0.5, 2);
        assert!(silhouette(&pts, &truth).unwrap() >= 0.9);
        let same = Array2::<f64>::zeros((4, 2));
        assert_eq!(silhouette(&same, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(silhouette(&same, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 2], &[5, 5, 2, 0]).unwrap(), 1.0);
        // Pairs: together in a {01, 23}, in b {02, 13}, both none.
        // expected = 2·2/6, max = 2 → (0 − 2/3)/(2 − 2/3) = −0.5
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-15);
        assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn select_k_examples() {
        let (three, _) = blobs(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]], 8, 0.5, 7);
        assert_eq!(select_k_by_silhouette(&three, 2, 9, 1, 10).unwrap().best_k, 3);
        let (two, _) = blobs(&[[0.0, 0.0], [20.0, 20.0]], 8, 0.5, 8);
        assert_eq!(select_k_by_silhouette(&two, 2, 9, 1, 10).unwrap().best_k, 2);
        assert_eq!(select_k_by_silhouette(&two, 4, 4, 1, 10).unwrap().best_k, 4);
    }

    proptest! {
        #[test]
        fn ari_permutation_invariant(labels in proptest::collection::vec(0usize..4, 2..30),
                                     other in proptest::collection::vec(0usize..3, 30),
                                     shift in 1usize..4) {
            let other = &other[..labels.len()];
            let permuted: Vec<usize> = labels.iter().map(|l| (l + shift) % 4 + 10).collect();
            let x = adjusted_rand_index(&labels, other).unwrap();
            let y = adjusted_rand_index(&permuted, other).unwrap();
            prop_assert_eq!(x, y);
            prop_assert!(x <= 1.0);
        }

        #[test]
        fn silhouette_bounded(vals in proptest::collection::vec(-5.0f64..5.0, 20), labels in proptest::collection::vec(0usize..3, 10)) {
            prop_assume!(labels.iter().collect::<std::collections::HashSet<_>>().len() >= 2);
            let pts = Array2::from_shape_vec((10, 2), vals).unwrap();
            let s = silhouette(&pts, &labels).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
        }

        #[test]
        fn inertia_monotone(vals in proptest::collection::vec(-5.0f64..5.0, 40), k in 1usize..6, seed in 0u64..100) {
            let pts = Array2::from_shape_vec((20, 2), vals).unwrap();
            let run = kmeans(&pts, k, seed, 3).unwrap();
            for w in run.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
