//! Synthetic crystals with an exactly recomputable target.

use rand::Rng;

use crate::error::{Error, Result};
use crate::neighbors::neighbor_list;
use crate::seed::rng_for;
use crate::structure::{CrystalStructure, LabeledDataset, Lattice};

pub const SYNTH_SPECIES: [u32; 5] = [1, 6, 7, 8, 14];
pub const EDGE_RANGE: (f64, f64) = (3.0, 8.0);
pub const ATOM_RANGE: (usize, usize) = (2, 8);
pub const MIN_SEPARATION: f64 = 1.2;
pub const TARGET_CUTOFF: f64 = 3.5;
pub const INVERSE_DISTANCE_WEIGHT: f64 = 0.1;
/// Consecutive rejected placements tolerated for one atom.
pub const MAX_REJECTIONS: usize = 10_000;

/// Mean coordination number within [`TARGET_CUTOFF`] plus
/// `0.1 ×` the mean inverse distance over those same neighbor pairs
/// (zero when no pair lies inside the cutoff).
pub fn synthetic_target(s: &CrystalStructure) -> Result<f64> {
    let nl = neighbor_list(s, TARGET_CUTOFF)?;
    let mut pairs = 0usize;
    let mut inv = 0.0;
    for nb in nl.iter() {
        for e in nb {
            pairs += 1;
            inv += 1.0 / e.distance;
        }
    }
    let coordination = pairs as f64 / s.len() as f64;
    let mean_inv = if pairs == 0 { 0.0 } else { inv / pairs as f64 };
    Ok(coordination + INVERSE_DISTANCE_WEIGHT * mean_inv)
}

fn min_image_distance(lengths: [f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let mut d2 = 0.0;
    for k in 0..3 {
        let mut f = a[k] - b[k];
        f -= f.round();
        d2 += (f * lengths[k]).powi(2);
    }
    d2.sqrt()
}

/// `n` random orthorhombic cells, each with 2–8 atoms of H, C, N, O or Si
/// placed uniformly with at least [`MIN_SEPARATION`] Å between periodic images.
pub fn generate_synthetic(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n < 10 {
        return Err(Error::Argument(format!("synthetic datasets need n >= 10, got {n}")));
    }
    let mut rng = rng_for(seed, "synthetic");
    let mut structures = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for k in 0..n {
        let lengths = [
            rng.random_range(EDGE_RANGE.0..EDGE_RANGE.1),
            rng.random_range(EDGE_RANGE.0..EDGE_RANGE.1),
            rng.random_range(EDGE_RANGE.0..EDGE_RANGE.1),
        ];
        let n_atoms = rng.random_range(ATOM_RANGE.0..=ATOM_RANGE.1);
        let mut frac: Vec<[f64; 3]> = Vec::with_capacity(n_atoms);
        let mut numbers = Vec::with_capacity(n_atoms);
        for a in 0..n_atoms {
            let mut placed = false;
            for _ in 0..MAX_REJECTIONS {
                let p = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
                if frac
                    .iter()
                    .all(|q| min_image_distance(lengths, &p, q) >= MIN_SEPARATION)
                {
                    frac.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Generation(format!(
                    "structure {k}: atom {a} not placed after {MAX_REJECTIONS} rejections"
                )));
            }
            numbers.push(SYNTH_SPECIES[rng.random_range(0..SYNTH_SPECIES.len())]);
        }
        let lattice = Lattice::orthorhombic(lengths[0], lengths[1], lengths[2])?;
        let s = CrystalStructure::new(lattice, frac, numbers, format!("synth-{k:05}"))?;
        targets.push(synthetic_target(&s)?);
        structures.push(s);
    }
    LabeledDataset::new(structures, targets, "synthetic")
}
