use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Polynomial radial basis `φ_a(r) = (r_cut - r)^{a+2}`, `a = 1..=n_max`,
/// orthonormalized on `[0, r_cut]` with weight `r²`: each `φ_a` is first
/// scaled to unit norm, then the set is Löwdin-orthonormalized with the
/// inverse square root of the analytic overlap matrix.
#[derive(Debug, Clone)]
pub struct RadialBasis {
    r_cut: f64,
    n_max: usize,
    /// `g_n = Σ_a coeff[(n, a)] φ_a`
    coeff: DMatrix<f64>,
}

/// `∫_0^c r² (c - r)^p dr = 2 c^{p+3} / ((p+1)(p+2)(p+3))`
fn moment(c: f64, p: i32) -> f64 {
    let pf = p as f64;
    2.0 * c.powi(p + 3) / ((pf + 1.0) * (pf + 2.0) * (pf + 3.0))
}

impl RadialBasis {
    pub fn new(r_cut: f64, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        let raw = Self::overlap(r_cut, n_max);
        let norms: Vec<f64> = (0..n_max).map(|a| raw[(a, a)].sqrt()).collect();
        let overlap = DMatrix::from_fn(n_max, n_max, |a, b| raw[(a, b)] / (norms[a] * norms[b]));
        let eig = overlap.symmetric_eigen();
        let min = eig.eigenvalues.min();
        if min <= 0.0 {
            return Err(Error::Config(format!(
                "radial overlap matrix is not positive definite for n_max={n_max}"
            )));
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
        let lowdin = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
        let coeff = DMatrix::from_fn(n_max, n_max, |n, a| lowdin[(n, a)] / norms[a]);
        Ok(Self {
            r_cut,
            n_max,
            coeff,
        })
    }

    /// Analytic overlap `S_ab = ∫ r² φ_a φ_b dr`.
    pub fn overlap(r_cut: f64, n_max: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n_max, n_max, |a, b| {
            // φ exponents are (a+1)+2 with zero-based a
            moment(r_cut, (a + 3 + b + 3) as i32)
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn r_cut(&self) -> f64 {
        self.r_cut
    }

    /// All `g_n(r)` at once.
    pub fn eval(&self, r: f64, out: &mut [f64]) {
        let d = self.r_cut - r;
        let mut phi = vec![0.0; self.n_max];
        let mut p = d * d * d;
        for v in phi.iter_mut() {
            *v = p;
            p *= d;
        }
        for (n, o) in out.iter_mut().enumerate().take(self.n_max) {
            *o = (0..self.n_max).map(|a| self.coeff[(n, a)] * phi[a]).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::quadrature::gauss_legendre_interval;

    #[test]
    fn basis_is_orthonormal_under_r2_weight() {
        for n_max in 1..=6 {
            let basis = RadialBasis::new(5.0, n_max).unwrap();
            let (r, w) = gauss_legendre_interval(64, 0.0, 5.0);
            let mut gram = vec![0.0; n_max * n_max];
            let mut g = vec![0.0; n_max];
            for (r, w) in r.iter().zip(&w) {
                basis.eval(*r, &mut g);
                for a in 0..n_max {
                    for b in 0..n_max {
                        gram[a * n_max + b] += w * r * r * g[a] * g[b];
                    }
                }
            }
            for a in 0..n_max {
                for b in 0..n_max {
                    let e = if a == b { 1.0 } else { 0.0 };
                    let tol = if n_max <= 4 { 1e-10 } else { 1e-6 };
                    assert!((gram[a * n_max + b] - e).abs() < tol, "n_max={n_max} err={}", gram[a * n_max + b] - e);
                }
            }
        }
    }

    #[test]
    fn overlap_matches_quadrature() {
        let s = RadialBasis::overlap(3.0, 3);
        let (r, w) = gauss_legendre_interval(40, 0.0, 3.0);
        for a in 0..3 {
            for b in 0..3 {
                let q: f64 = r
                    .iter()
                    .zip(&w)
                    .map(|(r, w)| w * r * r * (3.0 - r).powi(a + 3) * (3.0 - r).powi(b + 3))
                    .sum();
                assert!((q - s[(a as usize, b as usize)]).abs() < 1e-9 * q.abs());
            }
        }
    }

    #[test]
    fn rejects_zero_basis() {
        assert!(RadialBasis::new(5.0, 0).is_err());
    }
}
