mod common;

use common::{max_abs_diff, random_rotation, random_structure, rng};
use oodbench_core::descriptors::{SoapCalculator, SoapConfig};
use oodbench_core::neighbor_list;
use rand::seq::SliceRandom;
use rand::Rng;
use std::f64::consts::PI;

const SPECIES: [u32; 3] = [1, 6, 8];

fn calculator() -> SoapCalculator {
    SoapCalculator::new(SoapConfig::with_species(SPECIES.to_vec())).unwrap()
}

#[test]
fn rotation_invariance_over_random_structures() {
    let calc = calculator();
    let mut r = rng(21);
    for _ in 0..20 {
        let s = random_structure(&mut r, 4, &SPECIES);
        let base = calc.material(&s).unwrap().vector;
        for _ in 0..5 {
            let rot = calc.material(&s.rotated(&random_rotation(&mut r)).unwrap()).unwrap();
            assert!(max_abs_diff(&base, &rot.vector) < 1e-6);
        }
    }
}

#[test]
fn translation_and_permutation_invariance() {
    let calc = calculator();
    let mut r = rng(22);
    for _ in 0..20 {
        let s = random_structure(&mut r, 5, &SPECIES);
        let base = calc.material(&s).unwrap().vector;
        let shifted = s.translated([r.random(), r.random(), r.random()]);
        assert!(max_abs_diff(&base, &calc.material(&shifted).unwrap().vector) < 1e-10);
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.shuffle(&mut r);
        let permuted = calc.material(&s.permuted(&order).unwrap()).unwrap();
        assert_eq!(permuted.vector, base);
    }
}

#[test]
fn stored_spectrum_matches_dense_contraction() {
    let calc = calculator();
    let cfg = calc.config().clone();
    let (ns, n, nl) = (SPECIES.len(), cfg.n_max, cfg.l_max + 1);
    let mut r = rng(23);
    for _ in 0..5 {
        let s = random_structure(&mut r, 4, &SPECIES);
        let list = neighbor_list(&s, cfg.r_cut).unwrap();
        let atoms = calc.atomic(&s, &list).unwrap();
        for (i, atom) in atoms.iter().enumerate() {
            let c = calc.expansion(&s, &list, i);
            let mut dense = Vec::with_capacity(ns * ns * n * n * nl);
            for a in 0..ns {
                for b in 0..ns {
                    for n1 in 0..n {
                        for n2 in 0..n {
                            for l in 0..nl {
                                let sum: f64 = (l * l..(l + 1) * (l + 1))
                                    .map(|lm| c.get(a, n1, lm) * c.get(b, n2, lm))
                                    .sum();
                                dense.push(PI * (8.0 / (2 * l + 1) as f64).sqrt() * sum);
                            }
                        }
                    }
                }
            }
            assert!(max_abs_diff(&atom.full_tensor(&cfg), &dense) < 1e-12);
        }
    }
}

#[test]
fn doubling_radial_quadrature_is_stable() {
    let coarse = calculator();
    let fine = SoapCalculator::new(SoapConfig {
        radial_points: 256,
        ..SoapConfig::with_species(SPECIES.to_vec())
    })
    .unwrap();
    let mut r = rng(24);
    for _ in 0..10 {
        let s = random_structure(&mut r, 4, &SPECIES);
        let a = coarse.material(&s).unwrap().vector;
        let b = fine.material(&s).unwrap().vector;
        assert!(max_abs_diff(&a, &b) < 1e-6);
    }
}
