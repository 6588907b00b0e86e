//! Batched forward/backward over stacked structure graphs.

use nalgebra::DMatrix;

use super::{ModelConfig, ModelWeights, StructureGraph};
use crate::error::Result;
use crate::evidential::{der_loss_grad, sample_loss, LossConfig, NigGrad, NigParams};

const EPS: f64 = 1e-6;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps raw head outputs to valid NIG parameters.
pub fn head_transform(raw: &[f64; 4]) -> NigParams {
    NigParams {
        gamma: raw[0],
        nu: softplus(raw[1]) + EPS,
        alpha: softplus(raw[2]) + 1.0 + EPS,
        beta: softplus(raw[3]) + EPS,
    }
}

/// Chains a NIG-space gradient through [`head_transform`].
pub(crate) fn raw_grad(raw: &[f64; 4], g: &NigGrad) -> [f64; 4] {
    [
        g.d_gamma,
        g.d_nu * sigmoid(raw[1]),
        g.d_alpha * sigmoid(raw[2]),
        g.d_beta * sigmoid(raw[3]),
    ]
}

#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// `[h_i ‖ mean_j h_j ‖ mean_j rbf_ij]`, one row per atom.
    pub input: DMatrix<f64>,
    /// Mean message (zero rows for atoms without neighbors).
    pub message: DMatrix<f64>,
    /// `tanh(W_u·message + b_u)`
    pub update: DMatrix<f64>,
}

/// Encoder activations for a batch of structures.
#[derive(Debug, Clone)]
pub struct Encoded {
    species: Vec<u32>,
    edges: Vec<(usize, usize, f64)>,
    has_neighbors: Vec<bool>,
    graph_of: Vec<usize>,
    atom_counts: Vec<usize>,
    pub layers: Vec<LayerTrace>,
    /// `batch × embed_dim` mean-pooled node features.
    pub pooled: DMatrix<f64>,
}

pub(crate) fn encode(graphs: &[&StructureGraph], w: &ModelWeights, cfg: &ModelConfig) -> Encoded {
    let d = cfg.embed_dim;
    let r = cfg.n_rbf;
    let n: usize = graphs.iter().map(|g| g.n_atoms()).sum();
    let mut species = Vec::with_capacity(n);
    let mut edges = Vec::new();
    let mut has_neighbors = Vec::with_capacity(n);
    let mut graph_of = Vec::with_capacity(n);
    let mut rbf = DMatrix::zeros(n, r);
    let mut offset = 0;
    for (b, g) in graphs.iter().enumerate() {
        for a in 0..g.n_atoms() {
            for k in 0..r {
                rbf[(offset + a, k)] = g.rbf_mean[a * r + k];
            }
        }
        species.extend_from_slice(&g.species);
        has_neighbors.extend_from_slice(&g.has_neighbors);
        graph_of.extend(std::iter::repeat_n(b, g.n_atoms()));
        edges.extend(g.edges.iter().map(|&(i, j, wt)| (i + offset, j + offset, wt)));
        offset += g.n_atoms();
    }

    let mut h = DMatrix::from_fn(n, d, |i, c| w.embedding[(species[i] as usize, c)]);
    let mut layers = Vec::with_capacity(w.layers.len());
    for lw in &w.layers {
        let mut input = DMatrix::zeros(n, 2 * d + r);
        input.columns_mut(0, d).copy_from(&h);
        for &(i, j, wt) in &edges {
            for c in 0..d {
                input[(i, d + c)] += wt * h[(j, c)];
            }
        }
        input.columns_mut(2 * d, r).copy_from(&rbf);
        let mut message = &input * lw.msg_w.transpose();
        for i in 0..n {
            for c in 0..d {
                message[(i, c)] = if has_neighbors[i] {
                    message[(i, c)] + lw.msg_b[c]
                } else {
                    0.0
                };
            }
        }
        let mut update = &message * lw.upd_w.transpose();
        for i in 0..n {
            for c in 0..d {
                update[(i, c)] = (update[(i, c)] + lw.upd_b[c]).tanh();
            }
        }
        h += &update;
        layers.push(LayerTrace {
            input,
            message,
            update,
        });
    }

    let atom_counts: Vec<usize> = graphs.iter().map(|g| g.n_atoms()).collect();
    let mut pooled = DMatrix::zeros(graphs.len(), d);
    for i in 0..n {
        let b = graph_of[i];
        for c in 0..d {
            pooled[(b, c)] += h[(i, c)];
        }
    }
    for (b, &cnt) in atom_counts.iter().enumerate() {
        pooled.row_mut(b).scale_mut(1.0 / cnt as f64);
    }
    Encoded {
        species,
        edges,
        has_neighbors,
        graph_of,
        atom_counts,
        layers,
        pooled,
    }
}

pub(crate) fn head_raw(dropped: &[f64], w: &ModelWeights) -> [f64; 4] {
    let mut raw = [0.0; 4];
    for (k, out) in raw.iter_mut().enumerate() {
        *out = w.head_b[k]
            + dropped
                .iter()
                .enumerate()
                .map(|(c, v)| w.head_w[(k, c)] * v)
                .sum::<f64>();
    }
    raw
}

/// Head prediction for pooled feature `pooled` under channel `factors`.
pub(crate) fn predict(pooled: &[f64], factors: &[f64], w: &ModelWeights) -> NigParams {
    let dropped: Vec<f64> = pooled.iter().zip(factors).map(|(a, b)| a * b).collect();
    head_transform(&head_raw(&dropped, w))
}

/// Accumulates `scale ·` head gradients and returns the pooled-feature gradient.
pub(crate) fn head_backward(
    dropped: &[f64],
    factors: &[f64],
    d_raw: &[f64; 4],
    scale: f64,
    w: &ModelWeights,
    grads: &mut ModelWeights,
) -> Vec<f64> {
    for k in 0..4 {
        let g = scale * d_raw[k];
        grads.head_b[k] += g;
        for (c, v) in dropped.iter().enumerate() {
            grads.head_w[(k, c)] += g * v;
        }
    }
    (0..dropped.len())
        .map(|c| factors[c] * (0..4).map(|k| scale * d_raw[k] * w.head_w[(k, c)]).sum::<f64>())
        .collect()
}

/// Accumulates encoder gradients given `∂L/∂pooled` (`batch × embed_dim`).
pub(crate) fn encode_backward(
    enc: &Encoded,
    d_pooled: &DMatrix<f64>,
    w: &ModelWeights,
    grads: &mut ModelWeights,
) {
    let n = enc.species.len();
    let d = d_pooled.ncols();
    let mut dh = DMatrix::from_fn(n, d, |i, c| {
        let b = enc.graph_of[i];
        d_pooled[(b, c)] / enc.atom_counts[b] as f64
    });
    for (li, (lw, tr)) in w.layers.iter().zip(&enc.layers).enumerate().rev() {
        let mut dz = dh.clone();
        dz.zip_apply(&tr.update, |g, u| *g *= 1.0 - u * u);
        let gl = &mut grads.layers[li];
        gl.upd_w += dz.tr_mul(&tr.message);
        gl.upd_b += dz.row_sum().transpose();
        let mut dm = &dz * &lw.upd_w;
        for i in (0..n).filter(|&i| !enc.has_neighbors[i]) {
            dm.row_mut(i).fill(0.0);
        }
        gl.msg_w += dm.tr_mul(&tr.input);
        gl.msg_b += dm.row_sum().transpose();
        let dx = &dm * &lw.msg_w;
        dh += dx.columns(0, d);
        for &(i, j, wt) in &enc.edges {
            for c in 0..d {
                dh[(j, c)] += wt * dx[(i, d + c)];
            }
        }
    }
    for (i, &z) in enc.species.iter().enumerate() {
        for c in 0..d {
            grads.embedding[(z as usize, c)] += dh[(i, c)];
        }
    }
}

/// Mean DER loss over a batch and its gradient (accumulated into `grads`).
/// `factors` holds one dropout multiplier row per sample.
pub(crate) fn batch_loss_grad(
    graphs: &[&StructureGraph],
    targets: &[f64],
    factors: &DMatrix<f64>,
    w: &ModelWeights,
    cfg: &ModelConfig,
    loss_cfg: &LossConfig,
    grads: &mut ModelWeights,
) -> Result<f64> {
    let enc = encode(graphs, w, cfg);
    let b = graphs.len();
    let scale = 1.0 / b as f64;
    let mut d_pooled = DMatrix::zeros(b, cfg.embed_dim);
    let mut total = 0.0;
    for s in 0..b {
        let f: Vec<f64> = factors.row(s).iter().copied().collect();
        let dropped: Vec<f64> = enc.pooled.row(s).iter().zip(&f).map(|(a, m)| a * m).collect();
        let raw = head_raw(&dropped, w);
        let p = head_transform(&raw);
        total += sample_loss(&p, targets[s], loss_cfg)?;
        let d_raw = raw_grad(&raw, &der_loss_grad(&p, targets[s], loss_cfg)?);
        let dp = head_backward(&dropped, &f, &d_raw, scale, w, grads);
        for (c, v) in dp.into_iter().enumerate() {
            d_pooled[(s, c)] = v;
        }
    }
    encode_backward(&enc, &d_pooled, w, grads);
    Ok(total * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) == 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }
}
