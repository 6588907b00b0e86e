use rand::Rng;

use super::{check_matrix, sq_dist};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Cluster of each row; clusters are numbered by their smallest member.
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every Lloyd step.
    pub history: Vec<f64>,
}

pub fn kmeans(x: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    kmeans_fit(x, k, seed).map(|f| f.labels)
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans_fit(x: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansFit> {
    check_matrix(x)?;
    let n = x.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k = {k} must lie in 1..={n}")));
    }
    let mut rng = rng_for(seed, "kmeans++");
    let mut centers = plus_plus_init(x, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        let mut changed = false;
        for (i, row) in x.iter().enumerate() {
            let (best, d) = nearest(row, &centers);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
            dist[i] = d;
        }
        if reseed_empty(x, &mut labels, &mut dist, &mut centers, k) {
            changed = true;
        }
        update_centers(x, &labels, &mut centers);
        let inertia = total_inertia(x, &labels, &centers);
        if let Some(&prev) = history.last() {
            if inertia > prev * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Internal(format!(
                    "k-means inertia increased from {prev} to {inertia} at iteration {iterations}"
                )));
            }
        }
        history.push(inertia);
        if !changed {
            break;
        }
    }

    let (labels, centers) = canonical_labels(&labels, centers, k);
    let inertia = *history.last().expect("at least one iteration");
    Ok(KMeansFit {
        labels,
        centers,
        inertia,
        iterations,
        history,
    })
}

fn plus_plus_init<R: Rng>(x: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![x[first].clone()];
    let mut d2: Vec<f64> = x.iter().map(|r| sq_dist(r, &x[first])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                if acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the cumulative sum just short of target
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive mass"))
        } else {
            // only duplicates remain
            chosen.iter().position(|c| !c).expect("k <= n")
        };
        chosen[pick] = true;
        centers.push(x[pick].clone());
        for (i, r) in x.iter().enumerate() {
            let d = sq_dist(r, &x[pick]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(row, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Moves the point farthest from its center into each empty cluster.
fn reseed_empty(
    x: &[Vec<f64>],
    labels: &mut [usize],
    dist: &mut [f64],
    centers: &mut [Vec<f64>],
    k: usize,
) -> bool {
    let mut reseeded = false;
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &d) in dist.iter().enumerate() {
            if sizes[labels[i]] > 1 && d > far_d {
                far = Some(i);
                far_d = d;
            }
        }
        let i = far.expect("k <= n leaves a donor cluster");
        sizes[labels[i]] -= 1;
        labels[i] = c;
        sizes[c] = 1;
        dist[i] = 0.0;
        centers[c] = x[i].clone();
        reseeded = true;
    }
    reseeded
}

fn update_centers(x: &[Vec<f64>], labels: &[usize], centers: &mut [Vec<f64>]) {
    let d = x[0].len();
    let k = centers.len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (row, &l) in x.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            centers[c] = sums[c].iter().map(|s| s * inv).collect();
        }
    }
}

fn total_inertia(x: &[Vec<f64>], labels: &[usize], centers: &[Vec<f64>]) -> f64 {
    x.iter()
        .zip(labels)
        .map(|(r, &l)| sq_dist(r, &centers[l]))
        .sum()
}

fn canonical_labels(
    labels: &[usize],
    centers: Vec<Vec<f64>>,
    k: usize,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let mut new_centers = vec![Vec::new(); k];
    for (old, c) in centers.into_iter().enumerate() {
        if map[old] != usize::MAX {
            new_centers[map[old]] = c;
        }
    }
    (labels.iter().map(|&l| map[l]).collect(), new_centers)
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let sum_a: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn separated_blobs() {
        let labels = kmeans(&col(&[0.0, 0.1, 10.0, 10.1]), 2, 3).unwrap();
        assert_eq!(labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn k_equals_n() {
        let x = col(&[3.0, 1.0, 4.0, 1.5, 9.0]);
        let fit = kmeans_fit(&x, 5, 0).unwrap();
        let mut l = fit.labels.clone();
        l.sort_unstable();
        l.dedup();
        assert_eq!(l.len(), 5);
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn duplicates_with_large_k() {
        let x = col(&[1.0, 1.0, 1.0, 2.0]);
        let fit = kmeans_fit(&x, 4, 0).unwrap();
        let mut l = fit.labels.clone();
        l.sort_unstable();
        l.dedup();
        assert_eq!(l.len(), 4);
    }

    #[test]
    fn k_too_large() {
        assert!(matches!(kmeans(&col(&[1.0, 2.0]), 3, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn deterministic_for_seed() {
        let x: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        assert_eq!(kmeans(&x, 4, 9).unwrap(), kmeans(&x, 4, 9).unwrap());
    }

    #[test]
    fn inertia_history_non_increasing() {
        let x: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![(i as f64 * 1.7).sin() * 3.0, (i as f64 * 0.3).cos()])
            .collect();
        let fit = kmeans_fit(&x, 7, 1).unwrap();
        for w in fit.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }
}
