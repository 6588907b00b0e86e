use crate::error::{Error, Result};
use crate::evidential::NigParams;

/// `T × N` grid of NIG predictions: pass `t`, sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PassTensor {
    passes: usize,
    samples: usize,
    cells: Vec<NigParams>,
}

impl PassTensor {
    /// One row per pass. Every cell must satisfy the NIG invariants.
    pub fn from_rows(rows: Vec<Vec<NigParams>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Argument("a pass tensor needs at least one pass".into()));
        }
        let samples = rows[0].len();
        if let Some((t, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != samples) {
            return Err(Error::Argument(format!(
                "pass {t} has {} samples, pass 0 has {samples}",
                r.len()
            )));
        }
        for (t, row) in rows.iter().enumerate() {
            for (i, p) in row.iter().enumerate() {
                p.validate().map_err(|e| {
                    Error::Validation(format!("cell (t = {t}, i = {i}): {e}"))
                })?;
            }
        }
        Ok(Self {
            passes: rows.len(),
            samples,
            cells: rows.into_iter().flatten().collect(),
        })
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn get(&self, t: usize, i: usize) -> NigParams {
        assert!(t < self.passes && i < self.samples, "cell ({t}, {i}) out of range");
        self.cells[t * self.samples + i]
    }

    pub fn row(&self, t: usize) -> &[NigParams] {
        &self.cells[t * self.samples..(t + 1) * self.samples]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_validation() {
        let p = NigParams::new(0.0, 1.0, 2.0, 1.0);
        let t = PassTensor::from_rows(vec![vec![p; 3], vec![p; 3]]).unwrap();
        assert_eq!((t.passes(), t.samples()), (2, 3));
        assert_eq!(t.row(1).len(), 3);
        assert!(PassTensor::from_rows(vec![]).is_err());
        assert!(PassTensor::from_rows(vec![vec![p; 3], vec![p; 2]]).is_err());
        let bad = NigParams::new(0.0, 1.0, 1.0, 1.0);
        let err = PassTensor::from_rows(vec![vec![p, bad]]).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("i = 1")));
    }
}
