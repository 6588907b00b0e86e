use rand::seq::SliceRandom;

use super::{
    check_matrix, complement, kmeans, split_train_val, Scenario, ScenarioParams, SplitTask,
    Strategy,
};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Leave-one-cluster-out: k-means on `x`, one task per cluster with that
/// cluster as the test set and the rest split train:val = 4:1.
///
/// `strategy` should be [`Strategy::Loco`] or [`Strategy::SoapLoco`]; it only
/// labels the scenario and seeds the per-task shuffles.
pub fn loco_split(x: &[Vec<f64>], k: usize, seed: u64, strategy: Strategy) -> Result<Scenario> {
    if !strategy.is_partitioning() {
        return Err(Error::Argument(format!(
            "{strategy} is not a leave-one-cluster-out strategy"
        )));
    }
    check_matrix(x)?;
    if k < 2 {
        return Err(Error::Argument(format!("LOCO needs k >= 2, got {k}")));
    }
    let n = x.len();
    let labels = kmeans(x, k, seed)?;
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut tasks = Vec::with_capacity(k);
    for (c, test) in members.into_iter().enumerate() {
        if test.is_empty() {
            return Err(Error::Internal(format!("cluster {c} is empty after re-seeding")));
        }
        let name = format!("cluster_{c:03}");
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
            k: Some(k),
            ..ScenarioParams::default()
        },
        tasks,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Random hold-out tasks with the given test sizes (in-distribution baseline).
pub fn random_split(n: usize, test_sizes: &[usize], seed: u64) -> Result<Scenario> {
    let mut tasks = Vec::with_capacity(test_sizes.len());
    for (t, &size) in test_sizes.iter().enumerate() {
        if size == 0 || size >= n {
            return Err(Error::Argument(format!(
                "random test size {size} must lie in 1..{n}"
            )));
        }
        let name = format!("random_{t:03}");
        let mut rng = rng_for(seed, &format!("RANDOM/{name}"));
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let mut test = all[..size].to_vec();
        test.sort_unstable();
        let (train, val) = split_train_val(complement(n, &test), &mut rng)?;
        tasks.push(SplitTask {
            name,
            train,
            val,
            test,
        });
    }
    let scenario = Scenario {
        strategy: Strategy::Random,
        seed,
        n_samples: n,
        params: ScenarioParams::default(),
        tasks,
    };
    scenario.validate()?;
    Ok(scenario)
}
