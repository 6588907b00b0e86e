//! Text checkpoints.
//!
//! ```text
//! refmodel-checkpoint v1
//! embed_dim 64
//! n_layers 3
//! n_rbf 32
//! r_cut 5e0
//! dropout_rate 1e-1
//! seed 0
//! matrix embedding 119 64
//! <one line per row, space-separated>
//! matrix layer0.msg_w 64 160
//! ...
//! matrix head_b 4 1
//! end
//! ```
//!
//! Matrices appear in parameter-block order: embedding, then per layer
//! `msg_w msg_b upd_w upd_b`, then `head_w head_b`. Vectors are written as
//! `n × 1` matrices. Values use shortest round-trip scientific notation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::{ModelConfig, ModelWeights};
use crate::error::{Error, Result};

const MAGIC: &str = "refmodel-checkpoint v1";

fn named_blocks(cfg: &ModelConfig) -> Vec<String> {
    let mut names = vec!["embedding".to_string()];
    for l in 0..cfg.n_layers {
        for part in ["msg_w", "msg_b", "upd_w", "upd_b"] {
            names.push(format!("layer{l}.{part}"));
        }
    }
    names.push("head_w".into());
    names.push("head_b".into());
    names
}

fn matrices(w: &ModelWeights) -> Vec<DMatrix<f64>> {
    let mut out = vec![w.embedding.clone()];
    for l in &w.layers {
        out.push(l.msg_w.clone());
        out.push(DMatrix::from_column_slice(l.msg_b.len(), 1, l.msg_b.as_slice()));
        out.push(l.upd_w.clone());
        out.push(DMatrix::from_column_slice(l.upd_b.len(), 1, l.upd_b.as_slice()));
    }
    out.push(w.head_w.clone());
    out.push(DMatrix::from_column_slice(4, 1, w.head_b.as_slice()));
    out
}

pub fn checkpoint_to_string(cfg: &ModelConfig, w: &ModelWeights) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "embed_dim {}", cfg.embed_dim);
    let _ = writeln!(s, "n_layers {}", cfg.n_layers);
    let _ = writeln!(s, "n_rbf {}", cfg.n_rbf);
    let _ = writeln!(s, "r_cut {:e}", cfg.r_cut);
    let _ = writeln!(s, "dropout_rate {:e}", cfg.dropout_rate);
    let _ = writeln!(s, "seed {}", cfg.seed);
    for (name, m) in named_blocks(cfg).iter().zip(matrices(w)) {
        let _ = writeln!(s, "matrix {name} {} {}", m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a str,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::parse(self.source, "end of file", "truncated checkpoint"))
    }

    fn field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (no, line) = self.next()?;
        let err = || Error::parse(self.source, format!("line {no}"), format!("expected `{key} <value>`"));
        let (k, v) = line.split_once(' ').ok_or_else(err)?;
        if k != key {
            return Err(err());
        }
        v.parse().map_err(|_| err())
    }
}

pub fn parse_checkpoint(text: &str, source: &str) -> Result<(ModelConfig, ModelWeights)> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        source,
    };
    let (_, magic) = lines.next()?;
    if magic != MAGIC {
        return Err(Error::parse(source, "line 1", format!("expected `{MAGIC}`")));
    }
    let cfg = ModelConfig {
        embed_dim: lines.field("embed_dim")?,
        n_layers: lines.field("n_layers")?,
        n_rbf: lines.field("n_rbf")?,
        r_cut: lines.field("r_cut")?,
        dropout_rate: lines.field("dropout_rate")?,
        seed: lines.field("seed")?,
    };
    cfg.validate()?;
    let mut w = ModelWeights::zeros(&cfg);
    let mut flat = Vec::with_capacity(w.n_params());
    for (name, expected) in named_blocks(&cfg).iter().zip(matrices(&w)) {
        let (no, header) = lines.next()?;
        let want = format!("matrix {name} {} {}", expected.nrows(), expected.ncols());
        if header != want {
            return Err(Error::parse(source, format!("line {no}"), format!("expected `{want}`")));
        }
        let mut m = DMatrix::zeros(expected.nrows(), expected.ncols());
        for r in 0..m.nrows() {
            let (no, line) = lines.next()?;
            let vals: Vec<f64> = line
                .split(' ')
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(source, format!("line {no}"), e.to_string()))?;
            if vals.len() != m.ncols() || vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(
                    source,
                    format!("line {no}"),
                    format!("expected {} finite values", m.ncols()),
                ));
            }
            for (c, v) in vals.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        flat.extend_from_slice(m.as_slice());
    }
    let (no, end) = lines.next()?;
    if end != "end" {
        return Err(Error::parse(source, format!("line {no}"), "expected `end`"));
    }
    w.set_flat(&flat)?;
    Ok((cfg, w))
}

pub fn write_checkpoint(cfg: &ModelConfig, w: &ModelWeights, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(cfg, w)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(ModelConfig, ModelWeights)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, &path.display().to_string())
}
