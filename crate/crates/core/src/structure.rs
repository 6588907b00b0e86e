//! Periodic crystal structures and labeled datasets.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Heaviest element accepted in a structure.
pub const MAX_ATOMIC_NUMBER: u32 = 118;

/// Determinants at or below this value are treated as degenerate cells.
pub const DET_TOLERANCE: f64 = 1e-8;

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Element symbol for an atomic number in `1..=118`.
pub fn element_symbol(z: u32) -> Option<&'static str> {
    if (1..=MAX_ATOMIC_NUMBER).contains(&z) {
        Some(SYMBOLS[(z - 1) as usize])
    } else {
        None
    }
}

/// Atomic number for an element symbol (case-sensitive, e.g. `"Si"`).
pub fn atomic_number(symbol: &str) -> Option<u32> {
    SYMBOLS
        .iter()
        .position(|s| *s == symbol)
        .map(|p| p as u32 + 1)
}

/// Three lattice vectors stored as matrix rows, in Å.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    rows: Matrix3<f64>,
}

impl Lattice {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Matrix3::from_row_slice(&[
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        ]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(rows: Matrix3<f64>) -> Result<Self> {
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Geometry("lattice has non-finite entries".into()));
        }
        let det = rows.determinant();
        if det <= DET_TOLERANCE {
            return Err(Error::Geometry(format!(
                "lattice determinant {det} is not strictly positive"
            )));
        }
        Ok(Self { rows })
    }

    pub fn cubic(a: f64) -> Result<Self> {
        Self::new([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]])
    }

    pub fn orthorhombic(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.rows
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let r = &self.rows;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ]
    }

    pub fn vector(&self, k: usize) -> Vector3<f64> {
        self.rows.row(k).transpose()
    }

    pub fn volume(&self) -> f64 {
        self.rows.determinant()
    }

    /// Distance between the two lattice planes spanned by the other two vectors.
    pub fn height(&self, k: usize) -> f64 {
        let a = self.vector((k + 1) % 3);
        let b = self.vector((k + 2) % 3);
        self.volume() / a.cross(&b).norm()
    }

    pub fn to_cartesian(&self, frac: &Vector3<f64>) -> Vector3<f64> {
        self.rows.transpose() * frac
    }

    pub fn to_fractional(&self, cart: &Vector3<f64>) -> Vector3<f64> {
        // det > 0 was checked at construction
        let inv = self.rows.transpose().try_inverse().expect("invertible lattice");
        inv * cart
    }
}

/// Wraps a fractional coordinate into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// A periodic crystal: lattice, wrapped fractional sites and atomic numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalStructure {
    lattice: Lattice,
    frac: Vec<[f64; 3]>,
    numbers: Vec<u32>,
    id: String,
}

impl CrystalStructure {
    /// Builds a structure, wrapping all coordinates into the unit cell.
    pub fn new(
        lattice: Lattice,
        fractional_coords: Vec<[f64; 3]>,
        atomic_numbers: Vec<u32>,
        structure_id: impl Into<String>,
    ) -> Result<Self> {
        let id = structure_id.into();
        if fractional_coords.is_empty() {
            return Err(Error::Validation(format!("structure `{id}` has no atoms")));
        }
        if fractional_coords.len() != atomic_numbers.len() {
            return Err(Error::Validation(format!(
                "structure `{id}`: {} sites but {} atomic numbers",
                fractional_coords.len(),
                atomic_numbers.len()
            )));
        }
        if let Some(z) = atomic_numbers
            .iter()
            .find(|&&z| z == 0 || z > MAX_ATOMIC_NUMBER)
        {
            return Err(Error::Validation(format!(
                "structure `{id}`: atomic number {z} outside 1..=118"
            )));
        }
        let mut frac = fractional_coords;
        for site in &mut frac {
            if site.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "structure `{id}`: non-finite coordinate"
                )));
            }
            for v in site.iter_mut() {
                *v = wrap_unit(*v);
            }
        }
        Ok(Self {
            lattice,
            frac,
            numbers: atomic_numbers,
            id,
        })
    }

    /// Builds a structure from Cartesian positions in Å.
    pub fn from_cartesian(
        lattice: Lattice,
        positions: &[[f64; 3]],
        atomic_numbers: Vec<u32>,
        structure_id: impl Into<String>,
    ) -> Result<Self> {
        let frac = positions
            .iter()
            .map(|p| {
                let f = lattice.to_fractional(&Vector3::new(p[0], p[1], p[2]));
                [f.x, f.y, f.z]
            })
            .collect();
        Self::new(lattice, frac, atomic_numbers, structure_id)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn fractional_coords(&self) -> &[[f64; 3]] {
        &self.frac
    }

    pub fn atomic_numbers(&self) -> &[u32] {
        &self.numbers
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.numbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numbers.is_empty()
    }

    pub fn cartesian(&self, i: usize) -> Vector3<f64> {
        let f = self.frac[i];
        self.lattice.to_cartesian(&Vector3::new(f[0], f[1], f[2]))
    }

    pub fn cartesian_positions(&self) -> Vec<Vector3<f64>> {
        (0..self.len()).map(|i| self.cartesian(i)).collect()
    }

    /// Applies a proper rotation to the cell. Fractional coordinates are
    /// unchanged, so all interatomic geometry is preserved.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Result<Self> {
        let rows = self.lattice.matrix() * rotation.transpose();
        Ok(Self {
            lattice: Lattice::from_matrix(rows)?,
            ..self.clone()
        })
    }

    /// Rigidly shifts every site by the same fractional offset (mod 1).
    pub fn translated(&self, shift: [f64; 3]) -> Self {
        let frac = self
            .frac
            .iter()
            .map(|f| {
                [
                    wrap_unit(f[0] + shift[0]),
                    wrap_unit(f[1] + shift[1]),
                    wrap_unit(f[2] + shift[2]),
                ]
            })
            .collect();
        Self {
            frac,
            ..self.clone()
        }
    }

    /// Reorders the atoms: new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() {
            return Err(Error::Argument("permutation length mismatch".into()));
        }
        for &o in order {
            if o >= self.len() || seen[o] {
                return Err(Error::Argument("not a permutation".into()));
            }
            seen[o] = true;
        }
        Ok(Self {
            frac: order.iter().map(|&o| self.frac[o]).collect(),
            numbers: order.iter().map(|&o| self.numbers[o]).collect(),
            ..self.clone()
        })
    }
}

/// Structures paired with scalar property targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    structures: Vec<CrystalStructure>,
    targets: Vec<f64>,
    name: String,
}

impl LabeledDataset {
    pub fn new(
        structures: Vec<CrystalStructure>,
        targets: Vec<f64>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if structures.len() != targets.len() {
            return Err(Error::Validation(format!(
                "{} structures but {} targets",
                structures.len(),
                targets.len()
            )));
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(Error::Validation(format!(
                "target of record {i} (`{}`) is not finite",
                structures[i].id()
            )));
        }
        Ok(Self {
            structures,
            targets,
            name: name.into(),
        })
    }

    pub fn structures(&self) -> &[CrystalStructure] {
        &self.structures
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Sorted, de-duplicated atomic numbers across all structures.
    pub fn species(&self) -> Vec<u32> {
        let mut z: Vec<u32> = self
            .structures
            .iter()
            .flat_map(|s| s.atomic_numbers().iter().copied())
            .collect();
        z.sort_unstable();
        z.dedup();
        z
    }
}
