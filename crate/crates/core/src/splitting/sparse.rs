//! Low-density ("sparse") task selection in descriptor or target space.

use serde::{Deserialize, Serialize};

use super::{
    complement, embed_2d, split_train_val, Scenario, ScenarioParams, SplitTask, Strategy,
    DEFAULT_K_DENSITY, DEFAULT_M_NEIGHBORS, DEFAULT_N_TASKS,
};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Minimum number of samples beyond `n_tasks`.
const SIZE_MARGIN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseParams {
    pub n_tasks: usize,
    pub m_neighbors: usize,
    pub k_density: usize,
}

impl Default for SparseParams {
    fn default() -> Self {
        Self {
            n_tasks: DEFAULT_N_TASKS,
            m_neighbors: DEFAULT_M_NEIGHBORS,
            k_density: DEFAULT_K_DENSITY,
        }
    }
}

/// Distance from each point to its `k`-th nearest other point.
pub fn knn_density<P, F>(points: &[P], k: usize, dist: F) -> Vec<f64>
where
    F: Fn(&P, &P) -> f64,
{
    let n = points.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| dist(&points[i], &points[j]))
                .collect();
            d.sort_by(f64::total_cmp);
            d.get(k.saturating_sub(1)).copied().unwrap_or(0.0)
        })
        .collect()
}

/// The `m` nearest other points to `anchor`, ties by ascending index.
fn neighbors_of<P, F>(points: &[P], anchor: usize, m: usize, dist: &F) -> Vec<usize>
where
    F: Fn(&P, &P) -> f64,
{
    let mut others: Vec<(f64, usize)> = (0..points.len())
        .filter(|&j| j != anchor)
        .map(|j| (dist(&points[anchor], &points[j]), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(m).map(|(_, j)| j).collect()
}

fn build<P, F>(
    points: &[P],
    params: SparseParams,
    cluster: bool,
    seed: u64,
    strategy: Strategy,
    dist: F,
) -> Result<Scenario>
where
    F: Fn(&P, &P) -> f64,
{
    let n = points.len();
    if params.n_tasks == 0 {
        return Err(Error::Argument("n_tasks must be positive".into()));
    }
    if n < params.n_tasks + SIZE_MARGIN {
        return Err(Error::Argument(format!(
            "{strategy} needs at least n_tasks + {SIZE_MARGIN} = {} samples, got {n}",
            params.n_tasks + SIZE_MARGIN
        )));
    }
    if params.k_density == 0 || params.k_density >= n {
        return Err(Error::Argument(format!(
            "k_density {} must lie in 1..{n}",
            params.k_density
        )));
    }
    if cluster && params.m_neighbors + 1 >= n {
        return Err(Error::Argument("m_neighbors leaves no training data".into()));
    }
    let density = knn_density(points, params.k_density, &dist);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| density[b].total_cmp(&density[a]).then(a.cmp(&b)));

    let mut tasks = Vec::with_capacity(params.n_tasks);
    for (rank, &anchor) in order.iter().take(params.n_tasks).enumerate() {
        let mut test = vec![anchor];
        if cluster {
            test.extend(neighbors_of(points, anchor, params.m_neighbors, &dist));
        }
        test.sort_unstable();
        let name = format!("sparse_{rank:03}_{anchor}");
        let mut rng = rng_for(seed, &format!("{strategy}/{name}"));
        let (train, val) = split_train_val(complement(n, &test), &mut rng)?;
        tasks.push(SplitTask {
            name,
            train,
            val,
            test,
        });
    }
    let scenario = Scenario {
        strategy,
        seed,
        n_samples: n,
        params: ScenarioParams {
            n_tasks: Some(params.n_tasks),
            m_neighbors: cluster.then_some(params.m_neighbors),
            k_density: Some(params.k_density),
            ..ScenarioParams::default()
        },
        tasks,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn planar(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn linear(a: &f64, b: &f64) -> f64 {
    (a - b).abs()
}

/// Singleton test sets at the sparsest points of the 2-D embedding of `x`.
pub fn sparse_x_single(x: &[Vec<f64>], params: SparseParams, seed: u64) -> Result<Scenario> {
    let e = embed_2d(x)?;
    build(&e, params, false, seed, Strategy::SparseXSingle, planar)
}

/// Sparsest embedded points plus their `m_neighbors` nearest neighbors.
pub fn sparse_x_cluster(x: &[Vec<f64>], params: SparseParams, seed: u64) -> Result<Scenario> {
    let e = embed_2d(x)?;
    build(&e, params, true, seed, Strategy::SparseXCluster, planar)
}

/// Singleton test sets at the sparsest target values.
pub fn sparse_y_single(y: &[f64], params: SparseParams, seed: u64) -> Result<Scenario> {
    check_targets(y)?;
    build(y, params, false, seed, Strategy::SparseYSingle, linear)
}

/// Sparsest target values plus their `m_neighbors` nearest in target space.
pub fn sparse_y_cluster(y: &[f64], params: SparseParams, seed: u64) -> Result<Scenario> {
    check_targets(y)?;
    build(y, params, true, seed, Strategy::SparseYCluster, linear)
}

fn check_targets(y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("targets must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with_outlier() -> Vec<Vec<f64>> {
        let mut x: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![(i % 10) as f64, (i / 10) as f64, ((i * 7) % 5) as f64 * 0.01])
            .collect();
        x.push(vec![100.0, 100.0, 0.0]);
        x
    }

    #[test]
    fn outlier_is_first_task() {
        let s = sparse_x_single(&grid_with_outlier(), SparseParams::default(), 0).unwrap();
        assert_eq!(s.tasks.len(), 50);
        assert_eq!(s.tasks[0].test, vec![100]);
        assert!(s.tasks.iter().all(|t| t.test.len() == 1));
    }

    #[test]
    fn sixty_points_pool_size() {
        let x: Vec<Vec<f64>> = (0..70)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.2).cos() * 2.0])
            .collect();
        let s = sparse_x_single(&x, SparseParams::default(), 1).unwrap();
        for t in &s.tasks {
            assert_eq!(t.train.len() + t.val.len(), 69);
            assert_eq!(t.val.len(), 69 / 5);
        }
        // N = 60 < n_tasks + 20
        assert!(sparse_x_single(&x[..60], SparseParams::default(), 1).is_err());
        let small = SparseParams {
            n_tasks: 40,
            ..SparseParams::default()
        };
        let s = sparse_x_single(&x[..60], small, 1).unwrap();
        assert!(s.tasks.iter().all(|t| t.train.len() + t.val.len() == 59));
    }

    #[test]
    fn cluster_tasks_have_eleven_and_contain_nearest() {
        let x = grid_with_outlier();
        let s = sparse_x_cluster(&x, SparseParams::default(), 0).unwrap();
        let e = embed_2d(&x).unwrap();
        for t in &s.tasks {
            assert_eq!(t.test.len(), 11);
            let anchor: usize = t.name.rsplit('_').next().unwrap().parse().unwrap();
            let nearest = neighbors_of(&e, anchor, 1, &planar)[0];
            assert!(t.test.contains(&nearest));
            assert!(!t.train.iter().chain(&t.val).any(|i| t.test.contains(i)));
        }
    }

    #[test]
    fn degenerate_x_is_deterministic() {
        let x = vec![vec![1.0, 1.0]; 80];
        let a = sparse_x_cluster(&x, SparseParams::default(), 5).unwrap();
        let b = sparse_x_cluster(&x, SparseParams::default(), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tasks[0].test, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn y_outlier_and_constant() {
        let mut y: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        y.push(100.0);
        let s = sparse_y_single(&y, SparseParams::default(), 0).unwrap();
        assert_eq!(s.tasks[0].test, vec![100]);
        let c = sparse_y_cluster(&y, SparseParams::default(), 0).unwrap();
        assert!(c.tasks.iter().all(|t| t.test.len() == 11));

        let flat = vec![2.0; 80];
        let s = sparse_y_single(&flat, SparseParams::default(), 0).unwrap();
        let anchors: Vec<usize> = s.tasks.iter().map(|t| t.test[0]).collect();
        assert_eq!(anchors, (0..50).collect::<Vec<_>>());
    }
}
