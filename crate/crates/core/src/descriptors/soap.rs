//! SOAP power-spectrum descriptors.
//!
//! For a central atom `i` and species `Z` the smeared neighbor density
//! `ρ(r) = Σ_j exp(-|r - r_ij|² / 2σ²)` is projected onto `g_n(r) Y_lm(r̂)`.
//! The angular integral of a displaced Gaussian against `Y_lm` is analytic,
//!
//! ```text
//! ∫ Y_lm(r̂) e^{-|r - r_j|²/2σ²} dΩ = 4π e^{-(r² + r_j²)/2σ²} i_l(r r_j / σ²) Y_lm(r̂_j)
//! ```
//!
//! so each coefficient reduces to a 1-D Gauss–Legendre quadrature over
//! `[0, r_cut]`. The invariant power spectrum is
//! `p_{n n' l}^{AB} = π √(8/(2l+1)) Σ_m c_{nlm}^A c_{n'lm}^B`.
//!
//! Per-atom layout: one block per species pair `(A, B)` with `A <= B` in
//! configuration order. Same-species blocks store `n <= n'` only (the block is
//! symmetric in `n, n'`); cross-species blocks store every `(n, n')`. Within a
//! block entries run over `n`, then `n'`, then `l`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::harmonics::{real_spherical_harmonics, scaled_bessel_i};
use super::quadrature::gauss_legendre_interval;
use super::radial::RadialBasis;
use crate::error::{Error, Result};
use crate::neighbors::{neighbor_list, Neighbor, NeighborList};
use crate::structure::{CrystalStructure, LabeledDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoapConfig {
    pub r_cut: f64,
    pub n_max: usize,
    pub l_max: usize,
    pub sigma: f64,
    /// Atomic numbers, ascending, no duplicates.
    pub species: Vec<u32>,
    /// Add the central atom's own Gaussian to its species density.
    pub include_center: bool,
    pub radial_points: usize,
}

impl Default for SoapConfig {
    fn default() -> Self {
        Self {
            r_cut: 5.0,
            n_max: 4,
            l_max: 4,
            sigma: 0.5,
            species: Vec::new(),
            include_center: true,
            radial_points: 128,
        }
    }
}

impl SoapConfig {
    pub fn with_species(species: Vec<u32>) -> Self {
        Self {
            species,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_cut > 0.0 && self.r_cut.is_finite()) {
            return Err(Error::Config("soap r_cut must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("soap sigma must be positive".into()));
        }
        if self.n_max == 0 {
            return Err(Error::Config("soap n_max must be at least 1".into()));
        }
        if self.radial_points == 0 {
            return Err(Error::Config("soap radial_points must be positive".into()));
        }
        if self.species.is_empty() {
            return Err(Error::Config("soap species list is empty".into()));
        }
        if self.species.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "soap species must be sorted ascending without duplicates".into(),
            ));
        }
        if self.r_cut <= 3.0 * self.sigma {
            log::warn!(
                "soap r_cut {} is not larger than 3 sigma ({})",
                self.r_cut,
                3.0 * self.sigma
            );
        }
        Ok(())
    }

    fn species_index(&self, z: u32) -> Option<usize> {
        self.species.binary_search(&z).ok()
    }

    pub fn block_len(&self, a: usize, b: usize) -> usize {
        let n = self.n_max;
        let pairs = if a == b { n * (n + 1) / 2 } else { n * n };
        pairs * (self.l_max + 1)
    }

    /// Offset of block `(a, b)`, `a <= b`, within a per-atom vector.
    pub fn block_offset(&self, a: usize, b: usize) -> usize {
        debug_assert!(a <= b);
        let mut off = 0;
        for x in 0..self.species.len() {
            for y in x..self.species.len() {
                if (x, y) == (a, b) {
                    return off;
                }
                off += self.block_len(x, y);
            }
        }
        off
    }

    pub fn per_atom_len(&self) -> usize {
        let s = self.species.len();
        (0..s)
            .flat_map(|a| (a..s).map(move |b| (a, b)))
            .map(|(a, b)| self.block_len(a, b))
            .sum()
    }

    pub fn material_len(&self) -> usize {
        self.species.len() * self.per_atom_len()
    }
}

/// Power spectrum of one central atom.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicSoap {
    pub center: usize,
    pub center_z: u32,
    pub values: Vec<f64>,
}

impl AtomicSoap {
    /// Block for the species pair, in either order.
    pub fn block<'a>(&'a self, cfg: &SoapConfig, za: u32, zb: u32) -> Option<&'a [f64]> {
        let a = cfg.species_index(za)?;
        let b = cfg.species_index(zb)?;
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let off = cfg.block_offset(a, b);
        Some(&self.values[off..off + cfg.block_len(a, b)])
    }

    /// Expands storage to the full tensor `[A][B][n][n'][l]`.
    pub fn full_tensor(&self, cfg: &SoapConfig) -> Vec<f64> {
        let s = cfg.species.len();
        let n = cfg.n_max;
        let nl = cfg.l_max + 1;
        let idx = |a: usize, b: usize, n1: usize, n2: usize, l: usize| {
            (((a * s + b) * n + n1) * n + n2) * nl + l
        };
        let mut out = vec![0.0; s * s * n * n * nl];
        for a in 0..s {
            for b in a..s {
                let mut p = cfg.block_offset(a, b);
                for n1 in 0..n {
                    let start = if a == b { n1 } else { 0 };
                    for n2 in start..n {
                        for l in 0..nl {
                            let v = self.values[p];
                            p += 1;
                            out[idx(a, b, n1, n2, l)] = v;
                            out[idx(b, a, n2, n1, l)] = v;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Expansion coefficients `c[species][n][lm]` of one atomic environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    n_max: usize,
    n_lm: usize,
    values: Vec<f64>,
}

impl Expansion {
    pub fn get(&self, species: usize, n: usize, lm: usize) -> f64 {
        self.values[(species * self.n_max + n) * self.n_lm + lm]
    }
}

/// Precomputed radial quadrature for one configuration.
#[derive(Debug, Clone)]
pub struct SoapCalculator {
    cfg: SoapConfig,
    nodes: Vec<f64>,
    /// `w_q r_q² g_n(r_q)`, row-major `[q][n]`
    weighted_basis: Vec<f64>,
}

impl SoapCalculator {
    pub fn new(cfg: SoapConfig) -> Result<Self> {
        cfg.validate()?;
        let basis = RadialBasis::new(cfg.r_cut, cfg.n_max)?;
        let (nodes, weights) = gauss_legendre_interval(cfg.radial_points, 0.0, cfg.r_cut);
        let mut weighted_basis = vec![0.0; nodes.len() * cfg.n_max];
        for (q, (&r, &w)) in nodes.iter().zip(&weights).enumerate() {
            let row = &mut weighted_basis[q * cfg.n_max..(q + 1) * cfg.n_max];
            basis.eval(r, row);
            for v in row.iter_mut() {
                *v *= w * r * r;
            }
        }
        Ok(Self {
            cfg,
            nodes,
            weighted_basis,
        })
    }

    pub fn config(&self) -> &SoapConfig {
        &self.cfg
    }

    fn check_species(&self, s: &CrystalStructure) -> Result<()> {
        if let Some(z) = s
            .atomic_numbers()
            .iter()
            .find(|&&z| self.cfg.species_index(z).is_none())
        {
            return Err(Error::Config(format!(
                "structure `{}` contains species {z} missing from the soap species list",
                s.id()
            )));
        }
        Ok(())
    }

    /// Expansion coefficients for atom `i`.
    pub fn expansion(&self, s: &CrystalStructure, nl: &NeighborList, i: usize) -> Expansion {
        let cfg = &self.cfg;
        let n_max = cfg.n_max;
        let l_max = cfg.l_max;
        let n_lm = (l_max + 1) * (l_max + 1);
        let n_species = cfg.species.len();
        let mut values = vec![0.0; n_species * n_max * n_lm];
        let inv_two_s2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
        let inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
        let z = s.atomic_numbers();

        // canonical summation order keeps results bitwise independent of atom order
        let mut neigh: Vec<&Neighbor> = nl
            .neighbors(i)
            .iter()
            .filter(|n| n.distance <= cfg.r_cut)
            .collect();
        neigh.sort_by(|a, b| {
            z[a.index]
                .cmp(&z[b.index])
                .then(a.distance.total_cmp(&b.distance))
                .then(a.displacement.x.total_cmp(&b.displacement.x))
                .then(a.displacement.y.total_cmp(&b.displacement.y))
                .then(a.displacement.z.total_cmp(&b.displacement.z))
        });

        let mut bessel = vec![0.0; l_max + 1];
        let mut radial = vec![0.0; n_max * (l_max + 1)];
        for nb in neigh {
            let sp = self.cfg.species_index(z[nb.index]).expect("species checked");
            let rj = nb.distance;
            radial.fill(0.0);
            for (q, &r) in self.nodes.iter().enumerate() {
                let d = r - rj;
                let gauss = (-d * d * inv_two_s2).exp();
                if gauss == 0.0 {
                    continue;
                }
                scaled_bessel_i(l_max, r * rj * inv_s2, &mut bessel);
                let wb = &self.weighted_basis[q * n_max..(q + 1) * n_max];
                for (n, &g) in wb.iter().enumerate() {
                    let gg = g * gauss;
                    for l in 0..=l_max {
                        radial[n * (l_max + 1) + l] += gg * bessel[l];
                    }
                }
            }
            let d = nb.displacement;
            let ylm = real_spherical_harmonics(l_max, [d.x, d.y, d.z]);
            let base = sp * n_max * n_lm;
            for n in 0..n_max {
                for l in 0..=l_max {
                    let rad = 4.0 * PI * radial[n * (l_max + 1) + l];
                    for lm in l * l..(l + 1) * (l + 1) {
                        values[base + n * n_lm + lm] += rad * ylm[lm];
                    }
                }
            }
        }

        if cfg.include_center {
            let sp = self.cfg.species_index(z[i]).expect("species checked");
            // only l = 0 survives at r_j = 0; Y_00 = 1 / (2√π)
            let y00 = 0.5 / PI.sqrt();
            for n in 0..n_max {
                let mut acc = 0.0;
                for (q, &r) in self.nodes.iter().enumerate() {
                    acc += self.weighted_basis[q * n_max + n] * (-r * r * inv_two_s2).exp();
                }
                values[(sp * n_max + n) * n_lm] += 4.0 * PI * y00 * acc;
            }
        }

        Expansion {
            n_max,
            n_lm,
            values,
        }
    }

    /// Contracts expansion coefficients into the stored power spectrum.
    pub fn power_spectrum(&self, c: &Expansion) -> Vec<f64> {
        let cfg = &self.cfg;
        let s = cfg.species.len();
        let n = cfg.n_max;
        let mut out = Vec::with_capacity(cfg.per_atom_len());
        let prefactor: Vec<f64> = (0..=cfg.l_max)
            .map(|l| PI * (8.0 / (2 * l + 1) as f64).sqrt())
            .collect();
        for a in 0..s {
            for b in a..s {
                for n1 in 0..n {
                    let start = if a == b { n1 } else { 0 };
                    for n2 in start..n {
                        for l in 0..=cfg.l_max {
                            let sum: f64 = (l * l..(l + 1) * (l + 1))
                                .map(|lm| c.get(a, n1, lm) * c.get(b, n2, lm))
                                .sum();
                            out.push(prefactor[l] * sum);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn atomic(&self, s: &CrystalStructure, nl: &NeighborList) -> Result<Vec<AtomicSoap>> {
        self.check_species(s)?;
        if nl.len() != s.len() {
            return Err(Error::Argument("neighbor list does not match structure".into()));
        }
        if nl.r_cut() + 1e-12 < self.cfg.r_cut {
            return Err(Error::Argument(format!(
                "neighbor list cutoff {} is smaller than soap r_cut {}",
                nl.r_cut(),
                self.cfg.r_cut
            )));
        }
        Ok((0..s.len())
            .map(|i| AtomicSoap {
                center: i,
                center_z: s.atomic_numbers()[i],
                values: self.power_spectrum(&self.expansion(s, nl, i)),
            })
            .collect())
    }

    pub fn material(&self, s: &CrystalStructure) -> Result<MaterialDescriptor> {
        let nl = neighbor_list(s, self.cfg.r_cut)?;
        let atoms = self.atomic(s, &nl)?;
        aggregate_material(&atoms, s, &self.cfg)
    }
}

pub fn soap_atomic(
    s: &CrystalStructure,
    cfg: &SoapConfig,
    nl: &NeighborList,
) -> Result<Vec<AtomicSoap>> {
    SoapCalculator::new(cfg.clone())?.atomic(s, nl)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorSource {
    Soap,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialDescriptor {
    pub vector: Vec<f64>,
    pub source: DescriptorSource,
}

/// Per-species mean of atomic power spectra, rows in configuration species
/// order, flattened. Species absent from the structure give zero rows.
pub fn aggregate_material(
    atoms: &[AtomicSoap],
    s: &CrystalStructure,
    cfg: &SoapConfig,
) -> Result<MaterialDescriptor> {
    if atoms.len() != s.len() {
        return Err(Error::Argument(format!(
            "expected {} atomic descriptors, got {}",
            s.len(),
            atoms.len()
        )));
    }
    let width = cfg.per_atom_len();
    let mut vector = vec![0.0; cfg.species.len() * width];
    for (row, &z) in cfg.species.iter().enumerate() {
        let mut members: Vec<&[f64]> = atoms
            .iter()
            .filter(|a| a.center_z == z)
            .map(|a| a.values.as_slice())
            .collect();
        if members.is_empty() {
            continue;
        }
        // sum in a canonical order so atom permutations give identical bits
        members.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let out = &mut vector[row * width..(row + 1) * width];
        for m in &members {
            if m.len() != width {
                return Err(Error::Argument("atomic descriptor has wrong length".into()));
            }
            for (o, v) in out.iter_mut().zip(m.iter()) {
                *o += v;
            }
        }
        let inv = 1.0 / members.len() as f64;
        for o in out.iter_mut() {
            *o *= inv;
        }
    }
    Ok(MaterialDescriptor {
        vector,
        source: DescriptorSource::Soap,
    })
}

/// Material descriptors for every structure, row `i` for structure `i`.
pub fn soap_dataset(data: &LabeledDataset, cfg: &SoapConfig) -> Result<Vec<Vec<f64>>> {
    let calc = SoapCalculator::new(cfg.clone())?;
    data.structures()
        .par_iter()
        .map(|s| calc.material(s).map(|m| m.vector))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Lattice;

    fn small_cfg(species: Vec<u32>) -> SoapConfig {
        SoapConfig {
            n_max: 3,
            l_max: 3,
            ..SoapConfig::with_species(species)
        }
    }

    #[test]
    fn lengths() {
        let cfg = small_cfg(vec![1, 8]);
        // HH: 6*4, HO: 9*4, OO: 6*4
        assert_eq!(cfg.per_atom_len(), 24 + 36 + 24);
        assert_eq!(cfg.block_offset(0, 1), 24);
        assert_eq!(cfg.block_offset(1, 1), 60);
        assert_eq!(cfg.material_len(), 2 * 84);
    }

    #[test]
    fn isolated_atom_only_self_block() {
        let cfg = small_cfg(vec![1, 8]);
        let s = CrystalStructure::new(Lattice::cubic(20.0).unwrap(), vec![[0.0; 3]], vec![8], "o")
            .unwrap();
        let nl = neighbor_list(&s, cfg.r_cut).unwrap();
        let atoms = soap_atomic(&s, &cfg, &nl).unwrap();
        let oo = atoms[0].block(&cfg, 8, 8).unwrap();
        assert!(oo.iter().any(|v| v.abs() > 1e-8));
        assert!(atoms[0].block(&cfg, 1, 1).unwrap().iter().all(|&v| v == 0.0));
        assert!(atoms[0].block(&cfg, 1, 8).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimer_orientation_does_not_matter() {
        let cfg = small_cfg(vec![1, 8]);
        let lat = Lattice::cubic(20.0).unwrap();
        let along_x =
            CrystalStructure::from_cartesian(lat, &[[0.0; 3], [1.1, 0.0, 0.0]], vec![1, 8], "x")
                .unwrap();
        let along_z =
            CrystalStructure::from_cartesian(lat, &[[0.0; 3], [0.0, 0.0, 1.1]], vec![1, 8], "z")
                .unwrap();
        let calc = SoapCalculator::new(cfg).unwrap();
        let a = calc.material(&along_x).unwrap().vector;
        let b = calc.material(&along_z).unwrap().vector;
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn absent_species_row_is_zero() {
        let cfg = small_cfg(vec![1, 8]);
        let s = CrystalStructure::new(Lattice::cubic(3.0).unwrap(), vec![[0.0; 3]], vec![1], "h")
            .unwrap();
        let m = SoapCalculator::new(cfg.clone()).unwrap().material(&s).unwrap();
        let w = cfg.per_atom_len();
        assert!(m.vector[..w].iter().any(|v| *v != 0.0));
        assert!(m.vector[w..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identical_environments_mean_equals_each() {
        // two H atoms related by a lattice translation symmetry of a doubled cell
        let cfg = small_cfg(vec![1]);
        let s = CrystalStructure::new(
            Lattice::orthorhombic(6.0, 3.0, 3.0).unwrap(),
            vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]],
            vec![1, 1],
            "hh",
        )
        .unwrap();
        let calc = SoapCalculator::new(cfg.clone()).unwrap();
        let nl = neighbor_list(&s, cfg.r_cut).unwrap();
        let atoms = calc.atomic(&s, &nl).unwrap();
        let m = aggregate_material(&atoms, &s, &cfg).unwrap();
        for (x, y) in m.vector.iter().zip(&atoms[0].values) {
            assert!((x - y).abs() < 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn unknown_species_is_config_error() {
        let cfg = small_cfg(vec![1]);
        let s = CrystalStructure::new(Lattice::cubic(3.0).unwrap(), vec![[0.0; 3]], vec![6], "c")
            .unwrap();
        let nl = neighbor_list(&s, cfg.r_cut).unwrap();
        assert!(matches!(soap_atomic(&s, &cfg, &nl), Err(Error::Config(_))));
    }

    #[test]
    fn config_rejects_unsorted_species() {
        assert!(small_cfg(vec![8, 1]).validate().is_err());
        assert!(small_cfg(vec![1, 1]).validate().is_err());
    }

    #[test]
    fn aggregate_wrong_count() {
        let cfg = small_cfg(vec![1]);
        let s = CrystalStructure::new(Lattice::cubic(3.0).unwrap(), vec![[0.0; 3]], vec![1], "h")
            .unwrap();
        assert!(aggregate_material(&[], &s, &cfg).is_err());
    }
}
