//! Training the reference model on a split task, and deterministic and
//! MC-dropout inference.

mod passes;

pub use passes::PassTensor;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::{sample_loss, LossConfig, NigParams, DEFAULT_LAMBDA};
use crate::refmodel::{
    engine_batch_loss_grad, engine_encode, engine_predict, init_weights, DropoutMask,
    ModelConfig, ModelWeights, StructureGraph,
};
use crate::seed::{derive_seed, rng_for};
use crate::splitting::SplitTask;
use crate::structure::LabeledDataset;

/// Default number of MC-dropout passes at inference.
pub const DEFAULT_PASSES: usize = 50;
/// Passes used for the per-epoch validation D-MAE.
pub const VALIDATION_PASSES: usize = 10;
/// Structures encoded together during evaluation.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub patience: usize,
    pub validation_passes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lambda: DEFAULT_LAMBDA,
            patience: 30,
            validation_passes: VALIDATION_PASSES,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.validation_passes == 0 {
            return Err(Error::Config(
                "epochs, batch_size and validation_passes must be at least 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        self.loss_config().validate()
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_d_mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Weights of the epoch with the lowest validation D-MAE.
    pub weights: ModelWeights,
    /// Row 0 describes the untrained weights.
    pub history: Vec<HistoryRow>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best(&self) -> &HistoryRow {
        &self.history[self.best_epoch]
    }
}

pub fn history_to_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,train_loss,val_d_mae\n");
    for h in history {
        out.push_str(&format!("{},{},{}\n", h.epoch, h.train_loss, h.val_d_mae));
    }
    out
}

/// Builds model graphs for every structure, in dataset order.
pub fn prepare_graphs(data: &LabeledDataset, cfg: &ModelConfig) -> Result<Vec<StructureGraph>> {
    cfg.validate()?;
    data.structures()
        .par_iter()
        .map(|s| StructureGraph::new(s, cfg))
        .collect()
}

fn check_indices(idx: &[usize], n: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= n) {
        Some(i) => Err(Error::Argument(format!(
            "index {i} out of range for {n} samples"
        ))),
        None => Ok(()),
    }
}

fn select<'a>(graphs: &'a [StructureGraph], idx: &[usize]) -> Vec<&'a StructureGraph> {
    idx.iter().map(|&i| &graphs[i]).collect()
}

/// Pooled features, one row per selected graph.
fn pooled_features(graphs: &[&StructureGraph], w: &ModelWeights, cfg: &ModelConfig) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(graphs.len());
    for chunk in graphs.chunks(EVAL_CHUNK) {
        let enc = engine_encode(chunk, w, cfg);
        for r in 0..chunk.len() {
            out.push(enc.pooled.row(r).iter().copied().collect());
        }
    }
    out
}

fn pass_factors(seed: u64, passes: usize, cfg: &ModelConfig) -> Vec<Vec<f64>> {
    (0..passes)
        .map(|t| DropoutMask::new(seed, t, cfg.embed_dim, cfg.dropout_rate).factors())
        .collect()
}

/// MC-dropout passes over preprocessed graphs; pass `t` uses
/// `DropoutMask::new(seed, t, ..)`.
pub fn mcd_infer_graphs(
    graphs: &[StructureGraph],
    idx: &[usize],
    w: &ModelWeights,
    cfg: &ModelConfig,
    passes: usize,
    seed: u64,
) -> Result<PassTensor> {
    if passes == 0 {
        return Err(Error::Argument("T must be at least 1".into()));
    }
    check_indices(idx, graphs.len())?;
    w.check_shapes(cfg)?;
    let pooled = pooled_features(&select(graphs, idx), w, cfg);
    let rows = pass_factors(seed, passes, cfg)
        .iter()
        .map(|f| pooled.iter().map(|p| engine_predict(p, f, w)).collect())
        .collect();
    PassTensor::from_rows(rows)
}

pub fn deterministic_infer_graphs(
    graphs: &[StructureGraph],
    idx: &[usize],
    w: &ModelWeights,
    cfg: &ModelConfig,
) -> Result<Vec<NigParams>> {
    check_indices(idx, graphs.len())?;
    w.check_shapes(cfg)?;
    let ones = vec![1.0; cfg.embed_dim];
    Ok(pooled_features(&select(graphs, idx), w, cfg)
        .iter()
        .map(|p| engine_predict(p, &ones, w))
        .collect())
}

fn graphs_for(data: &LabeledDataset, idx: &[usize], cfg: &ModelConfig) -> Result<Vec<StructureGraph>> {
    check_indices(idx, data.len())?;
    cfg.validate()?;
    idx.iter()
        .map(|&i| StructureGraph::new(&data.structures()[i], cfg))
        .collect()
}

/// `T` stochastic passes over `data[idx]`, rows in pass order.
pub fn mcd_infer(
    data: &LabeledDataset,
    idx: &[usize],
    w: &ModelWeights,
    cfg: &ModelConfig,
    passes: usize,
    seed: u64,
) -> Result<PassTensor> {
    let graphs = graphs_for(data, idx, cfg)?;
    let local: Vec<usize> = (0..idx.len()).collect();
    mcd_infer_graphs(&graphs, &local, w, cfg, passes, seed)
}

/// One mask-free pass over `data[idx]`.
pub fn deterministic_infer(
    data: &LabeledDataset,
    idx: &[usize],
    w: &ModelWeights,
    cfg: &ModelConfig,
) -> Result<Vec<NigParams>> {
    let graphs = graphs_for(data, idx, cfg)?;
    let local: Vec<usize> = (0..idx.len()).collect();
    deterministic_infer_graphs(&graphs, &local, w, cfg)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, w: &mut ModelWeights, g: &ModelWeights, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        let mut k = 0;
        for (wb, gb) in w.blocks_mut().into_iter().zip(g.blocks()) {
            for (p, &gr) in wb.iter_mut().zip(gb) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gr;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gr * gr;
                *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
                k += 1;
            }
        }
    }
}

struct Validator {
    idx: Vec<usize>,
    factors: Vec<Vec<f64>>,
}

impl Validator {
    fn d_mae(&self, graphs: &[StructureGraph], targets: &[f64], w: &ModelWeights, cfg: &ModelConfig) -> f64 {
        let pooled = pooled_features(&select(graphs, &self.idx), w, cfg);
        let t = self.factors.len() as f64;
        let err: f64 = pooled
            .iter()
            .zip(&self.idx)
            .map(|(p, &i)| {
                let mean = self
                    .factors
                    .iter()
                    .map(|f| engine_predict(p, f, w).gamma)
                    .sum::<f64>()
                    / t;
                (mean - targets[i]).abs()
            })
            .sum();
        err / self.idx.len() as f64
    }
}

fn mean_loss(
    graphs: &[StructureGraph],
    targets: &[f64],
    idx: &[usize],
    w: &ModelWeights,
    cfg: &ModelConfig,
    loss_cfg: &LossConfig,
) -> Result<f64> {
    let ones = vec![1.0; cfg.embed_dim];
    let pooled = pooled_features(&select(graphs, idx), w, cfg);
    let mut total = 0.0;
    for (p, &i) in pooled.iter().zip(idx) {
        total += sample_loss(&engine_predict(p, &ones, w), targets[i], loss_cfg)?;
    }
    Ok(total / idx.len() as f64)
}

/// Trains on `task.train` with mini-batch Adam on the DER loss and selects
/// the epoch with the lowest validation D-MAE (earliest on ties).
///
/// `graphs` and `targets` cover the whole dataset. Epoch 0 records the
/// untrained weights (deterministic train loss). Later rows record the mean
/// mini-batch loss with dropout active. Each sample in a batch draws its own
/// dropout mask from the batch RNG.
pub fn train_graphs(
    graphs: &[StructureGraph],
    targets: &[f64],
    task: &SplitTask,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    mcfg.validate()?;
    if graphs.len() != targets.len() {
        return Err(Error::Argument(format!(
            "{} graphs but {} targets",
            graphs.len(),
            targets.len()
        )));
    }
    if task.train.is_empty() {
        return Err(Error::Argument(format!("task `{}` has an empty train set", task.name)));
    }
    check_indices(&task.train, graphs.len())?;
    check_indices(&task.val, graphs.len())?;
    let loss_cfg = tcfg.loss_config();
    let validator = Validator {
        idx: if task.val.is_empty() {
            log::warn!("task `{}` has no validation samples; selecting on train", task.name);
            task.train.clone()
        } else {
            task.val.clone()
        },
        factors: pass_factors(
            derive_seed(tcfg.seed, "validation"),
            tcfg.validation_passes,
            mcfg,
        ),
    };

    let mut w = init_weights(mcfg)?;
    let mut adam = Adam::new(w.n_params());
    let initial_loss = mean_loss(graphs, targets, &task.train, &w, mcfg, &loss_cfg)?;
    let initial_val = validator.d_mae(graphs, targets, &w, mcfg);
    if !initial_loss.is_finite() || !initial_val.is_finite() {
        return Err(Error::Training {
            epoch: 0,
            message: format!("non-finite loss {initial_loss} or validation D-MAE {initial_val}"),
        });
    }
    let mut history = vec![HistoryRow {
        epoch: 0,
        train_loss: initial_loss,
        val_d_mae: initial_val,
    }];
    let mut best = (history[0].val_d_mae, 0, w.clone());
    let mut order = task.train.clone();
    let d = mcfg.embed_dim;

    for epoch in 1..=tcfg.epochs {
        let mut rng = rng_for(tcfg.seed, &format!("train/epoch/{epoch}"));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(tcfg.batch_size) {
            let bg = select(graphs, batch);
            let bt: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let mut factors = DMatrix::zeros(batch.len(), d);
            for r in 0..batch.len() {
                let f = DropoutMask::draw_from(&mut rng, d, mcfg.dropout_rate).factors();
                for (c, v) in f.into_iter().enumerate() {
                    factors[(r, c)] = v;
                }
            }
            let mut grads = ModelWeights::zeros(mcfg);
            let loss = engine_batch_loss_grad(&bg, &bt, &factors, &w, mcfg, &loss_cfg, &mut grads)
                .map_err(|e| Error::Training {
                    epoch,
                    message: e.to_string(),
                })?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("non-finite loss {loss}"),
                });
            }
            adam.update(&mut w, &grads, tcfg);
            total += loss * batch.len() as f64;
        }
        if !w.is_finite() {
            return Err(Error::Training {
                epoch,
                message: "non-finite weights".into(),
            });
        }
        let val = validator.d_mae(graphs, targets, &w, mcfg);
        if !val.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("non-finite validation D-MAE {val}"),
            });
        }
        history.push(HistoryRow {
            epoch,
            train_loss: total / order.len() as f64,
            val_d_mae: val,
        });
        if val < best.0 {
            best = (val, epoch, w.clone());
        }
        if epoch - best.1 >= tcfg.patience {
            log::debug!("early stop at epoch {epoch} (best {})", best.1);
            break;
        }
    }
    Ok(TrainOutcome {
        weights: best.2,
        history,
        best_epoch: best.1,
    })
}

/// [`train_graphs`] on a dataset.
pub fn train(
    data: &LabeledDataset,
    task: &SplitTask,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    task.validate(data.len())?;
    let graphs = prepare_graphs(data, mcfg)?;
    train_graphs(&graphs, data.targets(), task, mcfg, tcfg)
}
