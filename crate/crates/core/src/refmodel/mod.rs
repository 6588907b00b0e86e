//! A small message-passing regressor over crystal graphs with an evidential
//! `(γ, ν, α, β)` head, channel dropout before the head, and hand-written
//! reverse-mode gradients.
//!
//! Per layer, for atom `i` with neighbors `j` (periodic images included):
//!
//! ```text
//! m_ij = W_m [h_i ‖ h_j ‖ rbf(d_ij)] + b_m
//! h_i <- h_i + tanh(W_u mean_j(m_ij) + b_u)
//! ```
//!
//! An atom with no neighbors inside the cutoff receives a zero message mean.
//! The graph feature is the mean of the final node features.

mod checkpoint;
mod engine;
mod graph;

pub use checkpoint::{checkpoint_to_string, parse_checkpoint, read_checkpoint, write_checkpoint};
pub use engine::{head_transform, Encoded, LayerTrace};
pub use graph::{rbf_expand, StructureGraph};
pub(crate) use engine::{
    batch_loss_grad as engine_batch_loss_grad, encode as engine_encode, predict as engine_predict,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::{der_loss_grad, sample_loss, LossConfig, NigParams};
use crate::seed::derive_seed;
use crate::structure::{CrystalStructure, MAX_ATOMIC_NUMBER};

/// Rows in the species embedding table (index = atomic number).
pub const EMBED_ROWS: usize = MAX_ATOMIC_NUMBER as usize + 1;
pub const DEFAULT_DROPOUT_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub n_layers: usize,
    pub n_rbf: usize,
    pub r_cut: f64,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            n_layers: 3,
            n_rbf: 32,
            r_cut: 5.0,
            dropout_rate: DEFAULT_DROPOUT_RATE,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.n_layers == 0 || self.n_rbf == 0 {
            return Err(Error::Config(
                "embed_dim, n_layers and n_rbf must be at least 1".into(),
            ));
        }
        if !(self.r_cut.is_finite() && self.r_cut > 0.0) {
            return Err(Error::Config(format!("r_cut must be > 0, got {}", self.r_cut)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    fn msg_width(&self) -> usize {
        2 * self.embed_dim + self.n_rbf
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// `embed_dim × (2·embed_dim + n_rbf)`
    pub msg_w: DMatrix<f64>,
    pub msg_b: DVector<f64>,
    /// `embed_dim × embed_dim`
    pub upd_w: DMatrix<f64>,
    pub upd_b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    /// `EMBED_ROWS × embed_dim`, row `Z` embeds species `Z`.
    pub embedding: DMatrix<f64>,
    pub layers: Vec<LayerWeights>,
    /// `4 × embed_dim`, rows produce raw `(γ, ν, α, β)`.
    pub head_w: DMatrix<f64>,
    pub head_b: DVector<f64>,
}

impl ModelWeights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.embed_dim;
        Self {
            embedding: DMatrix::zeros(EMBED_ROWS, d),
            layers: (0..cfg.n_layers)
                .map(|_| LayerWeights {
                    msg_w: DMatrix::zeros(d, cfg.msg_width()),
                    msg_b: DVector::zeros(d),
                    upd_w: DMatrix::zeros(d, d),
                    upd_b: DVector::zeros(d),
                })
                .collect(),
            head_w: DMatrix::zeros(4, d),
            head_b: DVector::zeros(4),
        }
    }

    /// Parameter blocks in a fixed order (embedding, layers, head).
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.embedding.as_slice()];
        for l in &self.layers {
            out.extend([
                l.msg_w.as_slice(),
                l.msg_b.as_slice(),
                l.upd_w.as_slice(),
                l.upd_b.as_slice(),
            ]);
        }
        out.extend([self.head_w.as_slice(), self.head_b.as_slice()]);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.embedding.as_mut_slice()];
        for l in &mut self.layers {
            out.push(l.msg_w.as_mut_slice());
            out.push(l.msg_b.as_mut_slice());
            out.push(l.upd_w.as_mut_slice());
            out.push(l.upd_b.as_mut_slice());
        }
        out.push(self.head_w.as_mut_slice());
        out.push(self.head_b.as_mut_slice());
        out
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// All parameters flattened in block order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Argument(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for b in self.blocks_mut() {
            let (head, tail) = rest.split_at(b.len());
            b.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let d = cfg.embed_dim;
        let ok = self.embedding.shape() == (EMBED_ROWS, d)
            && self.layers.len() == cfg.n_layers
            && self.layers.iter().all(|l| {
                l.msg_w.shape() == (d, cfg.msg_width())
                    && l.msg_b.len() == d
                    && l.upd_w.shape() == (d, d)
                    && l.upd_b.len() == d
            })
            && self.head_w.shape() == (4, d)
            && self.head_b.len() == 4;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("weight shapes do not match the model config".into()))
        }
    }
}

/// Seeded initialization: embedding entries and linear weights are uniform
/// with unit variance, linear weights scaled by `1/√fan_in`; biases zero.
pub fn init_weights(cfg: &ModelConfig) -> Result<ModelWeights> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "refmodel/init"));
    let mut w = ModelWeights::zeros(cfg);
    let half_width = 3f64.sqrt();
    let mut fill = |m: &mut DMatrix<f64>, scale: f64| {
        // row-major draw order keeps the layout independent of storage order
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                m[(r, c)] = rng.random_range(-half_width..half_width) * scale;
            }
        }
    };
    fill(&mut w.embedding, 1.0);
    let d = cfg.embed_dim as f64;
    for l in &mut w.layers {
        fill(&mut l.msg_w, 1.0 / (cfg.msg_width() as f64).sqrt());
        fill(&mut l.upd_w, 1.0 / d.sqrt());
    }
    fill(&mut w.head_w, 1.0 / d.sqrt());
    Ok(w)
}

/// Channel keep-mask over the pooled embedding with inverted scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    scale: f64,
}

impl DropoutMask {
    /// Deterministic mask for pass `pass` under `seed`.
    pub fn new(seed: u64, pass: usize, embed_dim: usize, rate: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("dropout/{pass}")));
        Self::draw_from(&mut rng, embed_dim, rate)
    }

    pub(crate) fn draw_from<R: Rng>(rng: &mut R, embed_dim: usize, rate: f64) -> Self {
        if rate == 0.0 {
            return Self::identity(embed_dim);
        }
        Self {
            keep: (0..embed_dim).map(|_| rng.random::<f64>() >= rate).collect(),
            scale: 1.0 / (1.0 - rate),
        }
    }

    pub fn identity(embed_dim: usize) -> Self {
        Self {
            keep: vec![true; embed_dim],
            scale: 1.0,
        }
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Multiplier per channel: `scale` where kept, 0 where dropped.
    pub fn factors(&self) -> Vec<f64> {
        self.keep
            .iter()
            .map(|&k| if k { self.scale } else { 0.0 })
            .collect()
    }
}

/// Activations recorded by [`forward`].
#[derive(Debug, Clone)]
pub struct Trace {
    pub encoded: Encoded,
    /// Pooled feature after dropout.
    pub dropped: Vec<f64>,
    /// Raw head outputs `(r_γ, r_ν, r_α, r_β)`.
    pub raw: [f64; 4],
}

fn check_mask(mask: Option<&DropoutMask>, cfg: &ModelConfig) -> Result<Vec<f64>> {
    match mask {
        Some(m) if m.keep.len() != cfg.embed_dim => Err(Error::Argument(format!(
            "dropout mask has {} channels, model has {}",
            m.keep.len(),
            cfg.embed_dim
        ))),
        Some(m) => Ok(m.factors()),
        None => Ok(vec![1.0; cfg.embed_dim]),
    }
}

/// Single-structure forward pass.
pub fn forward(
    s: &CrystalStructure,
    w: &ModelWeights,
    cfg: &ModelConfig,
    mask: Option<&DropoutMask>,
) -> Result<(NigParams, Trace)> {
    w.check_shapes(cfg)?;
    let factors = check_mask(mask, cfg)?;
    let g = StructureGraph::new(s, cfg)?;
    let encoded = engine::encode(&[&g], w, cfg);
    let pooled: Vec<f64> = encoded.pooled.row(0).iter().copied().collect();
    let dropped: Vec<f64> = pooled.iter().zip(&factors).map(|(a, b)| a * b).collect();
    let raw = engine::head_raw(&dropped, w);
    let params = head_transform(&raw);
    Ok((
        params,
        Trace {
            encoded,
            dropped,
            raw,
        },
    ))
}

/// Per-sample DER loss and its gradient with respect to every weight.
pub fn backward(
    s: &CrystalStructure,
    w: &ModelWeights,
    cfg: &ModelConfig,
    mask: Option<&DropoutMask>,
    y: f64,
    loss_cfg: &LossConfig,
) -> Result<(f64, ModelWeights)> {
    let factors = check_mask(mask, cfg)?;
    let (params, trace) = forward(s, w, cfg, mask)?;
    let loss = sample_loss(&params, y, loss_cfg)?;
    let d_raw = engine::raw_grad(&trace.raw, &der_loss_grad(&params, y, loss_cfg)?);
    let mut grads = ModelWeights::zeros(cfg);
    let dp = engine::head_backward(&trace.dropped, &factors, &d_raw, 1.0, w, &mut grads);
    let d_pooled = DMatrix::from_row_slice(1, cfg.embed_dim, &dp);
    engine::encode_backward(&trace.encoded, &d_pooled, w, &mut grads);
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Lattice;

    pub(crate) fn small_cfg() -> ModelConfig {
        ModelConfig {
            embed_dim: 8,
            n_layers: 2,
            n_rbf: 6,
            r_cut: 4.0,
            dropout_rate: 0.1,
            seed: 3,
        }
    }

    fn nacl_like() -> CrystalStructure {
        CrystalStructure::new(
            Lattice::orthorhombic(3.1, 3.4, 3.9).unwrap(),
            vec![[0.0, 0.0, 0.0], [0.5, 0.45, 0.52], [0.2, 0.7, 0.1]],
            vec![11, 17, 8],
            "x",
        )
        .unwrap()
    }

    #[test]
    fn init_is_seeded() {
        let cfg = small_cfg();
        let a = init_weights(&cfg).unwrap();
        assert_eq!(a, init_weights(&cfg).unwrap());
        let b = init_weights(&ModelConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a, b);
        a.check_shapes(&cfg).unwrap();
        assert!(a.layers.iter().all(|l| l.msg_b.iter().all(|&v| v == 0.0)));
        assert_eq!(a.n_params(), 119 * 8 + 2 * (8 * 22 + 8 + 64 + 8) + 32 + 4);
    }

    #[test]
    fn outputs_satisfy_nig_invariants() {
        let cfg = small_cfg();
        let mut w = init_weights(&cfg).unwrap();
        w.head_b[1] = -800.0;
        w.head_b[3] = -800.0;
        let (p, _) = forward(&nacl_like(), &w, &cfg, None).unwrap();
        p.validate().unwrap();
    }

    #[test]
    fn zero_rate_mask_is_identity() {
        let cfg = ModelConfig {
            dropout_rate: 0.0,
            ..small_cfg()
        };
        let w = init_weights(&cfg).unwrap();
        let m = DropoutMask::new(9, 2, cfg.embed_dim, cfg.dropout_rate);
        let a = forward(&nacl_like(), &w, &cfg, Some(&m)).unwrap().0;
        let b = forward(&nacl_like(), &w, &cfg, None).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn mask_is_deterministic_per_pass() {
        let a = DropoutMask::new(1, 0, 64, 0.5);
        assert_eq!(a, DropoutMask::new(1, 0, 64, 0.5));
        assert_ne!(a, DropoutMask::new(1, 1, 64, 0.5));
        assert_eq!(a.scale(), 2.0);
    }

    #[test]
    fn permutation_and_rigid_motion_invariance() {
        let cfg = small_cfg();
        let w = init_weights(&cfg).unwrap();
        let s = nacl_like();
        let (p, _) = forward(&s, &w, &cfg, None).unwrap();
        let q = forward(&s.permuted(&[2, 0, 1]).unwrap(), &w, &cfg, None).unwrap().0;
        let t = forward(&s.translated([0.3, -1.2, 2.0]), &w, &cfg, None).unwrap().0;
        let (c, sn) = (0.7f64.cos(), 0.7f64.sin());
        let rot = nalgebra::Matrix3::new(c, -sn, 0.0, sn, c, 0.0, 0.0, 0.0, 1.0);
        let r = forward(&s.rotated(&rot).unwrap(), &w, &cfg, None).unwrap().0;
        for o in [q, t, r] {
            for (a, b) in [(p.gamma, o.gamma), (p.nu, o.nu), (p.alpha, o.alpha), (p.beta, o.beta)] {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn unused_species_rows_have_zero_gradient() {
        let cfg = small_cfg();
        let w = init_weights(&cfg).unwrap();
        let (_, g) = backward(&nacl_like(), &w, &cfg, None, 1.5, &LossConfig::default()).unwrap();
        for z in 0..EMBED_ROWS {
            let nonzero = g.embedding.row(z).iter().any(|&v| v != 0.0);
            assert_eq!(nonzero, [8, 11, 17].contains(&z), "row {z}");
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = small_cfg();
        let s = nacl_like();
        let mask = DropoutMask::new(2, 0, cfg.embed_dim, 0.3);
        let loss_cfg = LossConfig { lambda: 0.05 };
        let w = init_weights(&cfg).unwrap();
        let (_, g) = backward(&s, &w, &cfg, Some(&mask), 0.8, &loss_cfg).unwrap();
        let flat = w.to_flat();
        let gflat = g.to_flat();
        let mut probe = w.clone();
        let loss_at = |probe: &mut ModelWeights, v: &[f64]| {
            probe.set_flat(v).unwrap();
            let p = forward(&s, probe, &cfg, Some(&mask)).unwrap().0;
            sample_loss(&p, 0.8, &loss_cfg).unwrap()
        };
        let h = 1e-5;
        let mut checked = 0;
        for k in (0..flat.len()).filter(|k| gflat[*k] != 0.0).step_by(7) {
            let mut v = flat.clone();
            v[k] += h;
            let up = loss_at(&mut probe, &v);
            v[k] -= 2.0 * h;
            let down = loss_at(&mut probe, &v);
            let fd = (up - down) / (2.0 * h);
            let err = (fd - gflat[k]).abs() / fd.abs().max(gflat[k].abs()).max(1e-6);
            assert!(err < 1e-4, "param {k}: fd {fd}, analytic {}", gflat[k]);
            checked += 1;
        }
        assert!(checked > 30);
    }

    #[test]
    fn empty_mask_length_mismatch() {
        let cfg = small_cfg();
        let w = init_weights(&cfg).unwrap();
        let m = DropoutMask::identity(3);
        assert!(forward(&nacl_like(), &w, &cfg, Some(&m)).is_err());
    }
}
