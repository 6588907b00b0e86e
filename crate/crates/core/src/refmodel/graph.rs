use std::collections::BTreeMap;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::neighbors::neighbor_list;
use crate::structure::{CrystalStructure, MAX_ATOMIC_NUMBER};

/// Gaussian radial features: `n_rbf` centers evenly spaced on `[0, r_cut]`,
/// width equal to the center spacing.
pub fn rbf_expand(d: f64, r_cut: f64, n_rbf: usize, out: &mut [f64]) {
    let spacing = if n_rbf > 1 {
        r_cut / (n_rbf - 1) as f64
    } else {
        r_cut
    };
    for (k, o) in out.iter_mut().enumerate().take(n_rbf) {
        let x = (d - k as f64 * spacing) / spacing;
        *o = (-0.5 * x * x).exp();
    }
}

/// Everything the model needs from a structure: species, neighbor averaging
/// weights and per-atom mean radial features.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureGraph {
    pub(crate) species: Vec<u32>,
    /// `(i, j, w)`: atom `i` averages node `j` with weight `w`
    /// (image count over degree). Sorted by `(i, j)`.
    pub(crate) edges: Vec<(usize, usize, f64)>,
    /// Row-major `n_atoms × n_rbf` mean of `rbf(d_ij)` over neighbors.
    pub(crate) rbf_mean: Vec<f64>,
    pub(crate) has_neighbors: Vec<bool>,
}

impl StructureGraph {
    pub fn new(s: &CrystalStructure, cfg: &ModelConfig) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Argument(format!("structure `{}` has no atoms", s.id())));
        }
        if let Some(&z) = s
            .atomic_numbers()
            .iter()
            .find(|&&z| z == 0 || z > MAX_ATOMIC_NUMBER)
        {
            return Err(Error::Argument(format!("unsupported atomic number {z}")));
        }
        let nl = neighbor_list(s, cfg.r_cut)?;
        let n = s.len();
        let r = cfg.n_rbf;
        let mut edges = Vec::new();
        let mut rbf_mean = vec![0.0; n * r];
        let mut has_neighbors = vec![false; n];
        let mut buf = vec![0.0; r];
        for i in 0..n {
            let nb = nl.neighbors(i);
            if nb.is_empty() {
                continue;
            }
            has_neighbors[i] = true;
            let deg = nb.len() as f64;
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            let row = &mut rbf_mean[i * r..(i + 1) * r];
            for e in nb {
                *counts.entry(e.index).or_default() += 1;
                rbf_expand(e.distance, cfg.r_cut, r, &mut buf);
                for (a, b) in row.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            for a in row.iter_mut() {
                *a /= deg;
            }
            edges.extend(counts.into_iter().map(|(j, c)| (i, j, c as f64 / deg)));
        }
        Ok(Self {
            species: s.atomic_numbers().to_vec(),
            edges,
            rbf_mean,
            has_neighbors,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[u32] {
        &self.species
    }
}
