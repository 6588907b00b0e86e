use nalgebra::DMatrix;

use super::check_matrix;
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a principal axis counts as absent.
const RANK_TOLERANCE: f64 = 1e-12;

/// Projection onto the top two principal components of the column-centered
/// matrix. Each axis is signed so that its largest-magnitude loading is
/// positive. Missing axes (rank < 2) are returned as zeros with a warning.
pub fn embed_2d(x: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let d = check_matrix(x)?;
    let n = x.len();
    if d < 2 || n < 3 {
        return Err(Error::Argument(format!(
            "embedding needs D >= 2 and N >= 3, got D = {d}, N = {n}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);

    // loadings (D-vectors) and eigenvalues of the top two components
    let (values, loadings): (Vec<f64>, Vec<Vec<f64>>) = if n <= d {
        let gram = &centered * centered.transpose();
        let eig = gram.symmetric_eigen();
        let order = descending(eig.eigenvalues.as_slice());
        order
            .iter()
            .take(2)
            .map(|&k| {
                let lam = eig.eigenvalues[k].max(0.0);
                let u = eig.eigenvectors.column(k);
                let v = centered.transpose() * u;
                let norm = v.norm();
                let v = if norm > 0.0 { v / norm } else { v };
                (lam, v.iter().copied().collect())
            })
            .unzip()
    } else {
        let cov = centered.transpose() * &centered;
        let eig = cov.symmetric_eigen();
        let order = descending(eig.eigenvalues.as_slice());
        order
            .iter()
            .take(2)
            .map(|&k| {
                (
                    eig.eigenvalues[k].max(0.0),
                    eig.eigenvectors.column(k).iter().copied().collect(),
                )
            })
            .unzip()
    };

    let top = values[0];
    let mut out = vec![[0.0; 2]; n];
    for (axis, (lam, loading)) in values.iter().zip(&loadings).enumerate() {
        if top <= 0.0 || *lam <= RANK_TOLERANCE * top {
            if top > 0.0 || axis == 0 {
                log::warn!("degenerate 2-D embedding: principal axis {axis} is absent");
            }
            continue;
        }
        let sign = sign_of_largest(loading);
        for (i, o) in out.iter_mut().enumerate() {
            let score: f64 = centered
                .row(i)
                .iter()
                .zip(loading)
                .map(|(a, b)| a * b)
                .sum();
            o[axis] = sign * score;
        }
    }
    Ok(out)
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

fn sign_of_largest(v: &[f64]) -> f64 {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(points: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                out.push(super::super::sq_dist(&points[i], &points[j]).sqrt());
            }
        }
        out
    }

    #[test]
    fn identical_rows_embed_to_zero() {
        let x = vec![vec![1.0, 2.0, 3.0]; 5];
        assert!(embed_2d(&x).unwrap().iter().all(|p| *p == [0.0, 0.0]));
    }

    #[test]
    fn two_d_input_is_rotated_isometrically() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![t.sin() * 3.0 + 0.2 * t, t.cos() - 0.1 * t]
            })
            .collect();
        let e = embed_2d(&x).unwrap();
        let ev: Vec<Vec<f64>> = e.iter().map(|p| p.to_vec()).collect();
        for (a, b) in pairwise(&x).iter().zip(pairwise(&ev)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn planar_data_distances_preserved() {
        // points on a tilted plane in 3-D
        let u = [1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt()];
        let v = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = (i as f64 * 0.77).sin() * 4.0;
                let b = (i as f64 * 1.31).cos() * 2.0;
                (0..3).map(|k| 5.0 + a * u[k] + b * v[k]).collect()
            })
            .collect();
        let e = embed_2d(&x).unwrap();
        let ev: Vec<Vec<f64>> = e.iter().map(|p| p.to_vec()).collect();
        for (a, b) in pairwise(&x).iter().zip(pairwise(&ev)) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn wide_matrix_uses_gram_route() {
        // N = 4 < D = 6, both routes must agree on distances
        let x: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..6).map(|j| ((i * 7 + j * 3) as f64).sin()).collect())
            .collect();
        let e = embed_2d(&x).unwrap();
        assert!(e.iter().all(|p| p[0].is_finite() && p[1].is_finite()));
        // first axis carries the most variance
        let var = |k: usize| e.iter().map(|p| p[k] * p[k]).sum::<f64>();
        assert!(var(0) >= var(1));
    }

    #[test]
    fn collinear_data_second_axis_zero() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let e = embed_2d(&x).unwrap();
        assert!(e.iter().all(|p| p[1] == 0.0));
    }

    #[test]
    fn too_small_inputs() {
        assert!(embed_2d(&[vec![1.0], vec![2.0], vec![3.0]]).is_err());
        assert!(embed_2d(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }
}
