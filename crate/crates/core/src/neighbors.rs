//! Periodic-boundary neighbor lists.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::structure::{CrystalStructure, DET_TOLERANCE};

/// Pairs closer than this are treated as coincident and skipped.
const ZERO_DISTANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    /// `r_j + image - r_i`, in Å.
    pub displacement: Vector3<f64>,
    pub distance: f64,
}

/// Per-atom neighbors within a cutoff, periodic images included.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    r_cut: f64,
    atoms: Vec<Vec<Neighbor>>,
}

impl NeighborList {
    pub fn r_cut(&self) -> f64 {
        self.r_cut
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.atoms[i]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Neighbor]> {
        self.atoms.iter().map(Vec::as_slice)
    }

    /// Sorted distances over all atoms, for multiset comparisons.
    pub fn sorted_distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self
            .atoms
            .iter()
            .flat_map(|n| n.iter().map(|x| x.distance))
            .collect();
        d.sort_by(f64::total_cmp);
        d
    }
}

/// Number of periodic images to scan along each lattice direction.
pub fn image_range(s: &CrystalStructure, r_cut: f64) -> [i32; 3] {
    let l = s.lattice();
    [0, 1, 2].map(|k| (r_cut / l.height(k)).ceil() as i32 + 1)
}

pub fn neighbor_list(s: &CrystalStructure, r_cut: f64) -> Result<NeighborList> {
    if !(r_cut > 0.0 && r_cut.is_finite()) {
        return Err(Error::Argument(format!("r_cut must be positive, got {r_cut}")));
    }
    if s.lattice().volume() <= DET_TOLERANCE {
        return Err(Error::Geometry("degenerate lattice".into()));
    }
    let range = image_range(s, r_cut);
    Ok(scan_images(s, r_cut, range))
}

/// Enumerates all images in `[-range, range]` per direction.
pub(crate) fn scan_images(s: &CrystalStructure, r_cut: f64, range: [i32; 3]) -> NeighborList {
    let pos = s.cartesian_positions();
    let lat = s.lattice();
    let (a, b, c) = (lat.vector(0), lat.vector(1), lat.vector(2));
    let mut shifts = Vec::new();
    for i in -range[0]..=range[0] {
        for j in -range[1]..=range[1] {
            for k in -range[2]..=range[2] {
                shifts.push(a * i as f64 + b * j as f64 + c * k as f64);
            }
        }
    }
    let atoms = pos
        .iter()
        .map(|ri| {
            let mut list = Vec::new();
            for (j, rj) in pos.iter().enumerate() {
                let base = rj - ri;
                for shift in &shifts {
                    let disp = base + shift;
                    let d = disp.norm();
                    if d > ZERO_DISTANCE && d <= r_cut {
                        list.push(Neighbor {
                            index: j,
                            displacement: disp,
                            distance: d,
                        });
                    }
                }
            }
            list
        })
        .collect();
    NeighborList { r_cut, atoms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Lattice;

    #[test]
    fn simple_cubic_six_neighbors() {
        let s = CrystalStructure::new(Lattice::cubic(2.0).unwrap(), vec![[0.0; 3]], vec![1], "sc")
            .unwrap();
        let nl = neighbor_list(&s, 2.5).unwrap();
        assert_eq!(nl.neighbors(0).len(), 6);
        assert!(nl.neighbors(0).iter().all(|n| (n.distance - 2.0).abs() < 1e-12));
    }

    #[test]
    fn small_cutoff_gives_empty_lists() {
        let s = CrystalStructure::new(
            Lattice::cubic(4.0).unwrap(),
            vec![[0.0; 3], [0.5, 0.5, 0.5]],
            vec![1, 8],
            "x",
        )
        .unwrap();
        let nl = neighbor_list(&s, 1.0).unwrap();
        assert!(nl.iter().all(|n| n.is_empty()));
    }

    #[test]
    fn symmetric_two_atom_cell() {
        let s = CrystalStructure::new(
            Lattice::new([[3.0, 0.2, 0.0], [0.1, 3.5, 0.0], [0.3, 0.0, 4.0]]).unwrap(),
            vec![[0.1, 0.2, 0.3], [0.6, 0.5, 0.9]],
            vec![6, 8],
            "x",
        )
        .unwrap();
        let nl = neighbor_list(&s, 4.0).unwrap();
        let mut ij: Vec<f64> = nl
            .neighbors(0)
            .iter()
            .filter(|n| n.index == 1)
            .map(|n| n.distance)
            .collect();
        let mut ji: Vec<f64> = nl
            .neighbors(1)
            .iter()
            .filter(|n| n.index == 0)
            .map(|n| n.distance)
            .collect();
        ij.sort_by(f64::total_cmp);
        ji.sort_by(f64::total_cmp);
        assert_eq!(ij.len(), ji.len());
        for (a, b) in ij.iter().zip(&ji) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_positive_cutoff() {
        let s = CrystalStructure::new(Lattice::cubic(2.0).unwrap(), vec![[0.0; 3]], vec![1], "sc")
            .unwrap();
        assert!(neighbor_list(&s, 0.0).is_err());
    }
}
