#![allow(dead_code)]

use nalgebra::{Matrix3, Rotation3, Vector3};
use oodbench_core::{CrystalStructure, Lattice};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random triclinic cell with 1..=max_atoms sites drawn from `species`.
pub fn random_structure(rng: &mut ChaCha8Rng, max_atoms: usize, species: &[u32]) -> CrystalStructure {
    loop {
        let mut rows = [[0.0; 3]; 3];
        for (k, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if j == k {
                    rng.random_range(3.0..6.0)
                } else {
                    rng.random_range(-1.0..1.0)
                };
            }
        }
        let Ok(lattice) = Lattice::new(rows) else { continue };
        let n = rng.random_range(1..=max_atoms);
        let frac: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let numbers: Vec<u32> = (0..n)
            .map(|_| species[rng.random_range(0..species.len())])
            .collect();
        if let Ok(s) = CrystalStructure::new(lattice, frac, numbers, "random") {
            return s;
        }
    }
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    Rotation3::new(axis.normalize() * angle).into_inner()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
