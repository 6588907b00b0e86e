//! Real spherical harmonics and modified spherical Bessel functions.
//!
//! Real harmonics use the convention without the Condon–Shortley phase:
//!
//! ```text
//! Y_l0  = N_l^0 P_l(cos θ)
//! Y_lm  = √2 N_l^m P_l^m(cos θ) cos(mφ)     m > 0
//! Y_l-m = √2 N_l^m P_l^m(cos θ) sin(mφ)     m > 0
//! N_l^m = sqrt((2l+1)/(4π) · (l-m)!/(l+m)!)
//! ```
//!
//! where `P_l^m` carries no `(-1)^m` factor. They are orthonormal on the unit
//! sphere. Values for one `l` are stored at offsets `l² + (m + l)`.

use std::f64::consts::PI;

/// Index of `(l, m)` in a flat harmonic array.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    l * l + (m + l as i64) as usize
}

/// Real harmonics up to `l_max` at direction `(x, y, z)`; the vector need
/// not be normalized but must be non-zero.
pub fn real_spherical_harmonics(l_max: usize, v: [f64; 3]) -> Vec<f64> {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let (x, y, z) = (v[0] / r, v[1] / r, v[2] / r);
    let mut out = vec![0.0; (l_max + 1) * (l_max + 1)];

    // Q[l][m] = P_l^m(z) / sin^m θ, a polynomial in z.
    let mut q = vec![vec![0.0; l_max + 1]; l_max + 1];
    for m in 0..=l_max {
        let mut dfact = 1.0;
        for k in 1..=m {
            dfact *= (2 * k - 1) as f64;
        }
        q[m][m] = dfact;
        if m < l_max {
            q[m + 1][m] = z * (2 * m + 1) as f64 * q[m][m];
        }
        for l in (m + 2)..=l_max {
            q[l][m] = ((2 * l - 1) as f64 * z * q[l - 1][m] - (l + m - 1) as f64 * q[l - 2][m])
                / (l - m) as f64;
        }
    }

    // (x + iy)^m = sin^m θ (cos mφ + i sin mφ)
    let mut re = vec![1.0; l_max + 1];
    let mut im = vec![0.0; l_max + 1];
    for m in 1..=l_max {
        re[m] = re[m - 1] * x - im[m - 1] * y;
        im[m] = re[m - 1] * y + im[m - 1] * x;
    }

    for l in 0..=l_max {
        let base = (2 * l + 1) as f64 / (4.0 * PI);
        out[lm_index(l, 0)] = base.sqrt() * q[l][0];
        let mut ratio = 1.0; // (l-m)!/(l+m)!
        for m in 1..=l {
            ratio /= ((l + m) * (l - m + 1)) as f64;
            let norm = (2.0 * base * ratio).sqrt() * q[l][m];
            out[lm_index(l, m as i64)] = norm * re[m];
            out[lm_index(l, -(m as i64))] = norm * im[m];
        }
    }
    out
}

/// `e^{-x} i_l(x)` for `l = 0..=l_max`, `x >= 0`, where `i_l` is the modified
/// spherical Bessel function of the first kind.
pub fn scaled_bessel_i(l_max: usize, x: f64, out: &mut [f64]) {
    debug_assert!(out.len() > l_max);
    if x == 0.0 {
        out[0] = 1.0;
        out[1..=l_max].fill(0.0);
        return;
    }
    let threshold = l_max.max(1) as f64 + 1.0;
    if x >= threshold {
        // upward recurrence is stable for l below x
        let e2 = (-2.0 * x).exp();
        out[0] = (1.0 - e2) / (2.0 * x);
        if l_max >= 1 {
            out[1] = (1.0 + e2) / (2.0 * x) - (1.0 - e2) / (2.0 * x * x);
        }
        for l in 1..l_max {
            out[l + 1] = out[l - 1] - (2 * l + 1) as f64 / x * out[l];
        }
    } else {
        // series for the two highest orders, then downward recurrence
        let top = l_max.max(1);
        let scale = (-x).exp();
        let hi = bessel_series(top, x) * scale;
        let below = bessel_series(top - 1, x) * scale;
        if l_max == 0 {
            out[0] = below;
            return;
        }
        out[top] = hi;
        out[top - 1] = below;
        for l in (1..top).rev() {
            out[l - 1] = out[l + 1] + (2 * l + 1) as f64 / x * out[l];
        }
    }
}

/// Power series of `i_l(x)`, accurate for small to moderate `x`.
fn bessel_series(l: usize, x: f64) -> f64 {
    let mut lead = 1.0;
    for k in 0..l {
        lead *= x / (2 * k + 3) as f64;
    }
    let half_sq = 0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..200 {
        term *= half_sq / ((k + 1) as f64 * (2 * l + 2 * k + 3) as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    lead * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::quadrature::gauss_legendre;

    #[test]
    fn harmonics_are_orthonormal() {
        let l_max = 5;
        let (ct, wt) = gauss_legendre(24);
        let nphi = 48;
        let nh = (l_max + 1) * (l_max + 1);
        let mut gram = vec![0.0; nh * nh];
        for (c, w) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).sqrt();
            for k in 0..nphi {
                let phi = 2.0 * PI * k as f64 / nphi as f64;
                let y = real_spherical_harmonics(l_max, [s * phi.cos(), s * phi.sin(), *c]);
                let wk = w * 2.0 * PI / nphi as f64;
                for a in 0..nh {
                    for b in 0..nh {
                        gram[a * nh + b] += wk * y[a] * y[b];
                    }
                }
            }
        }
        for a in 0..nh {
            for b in 0..nh {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * nh + b] - expect).abs() < 1e-12, "({a},{b})");
            }
        }
    }

    #[test]
    fn known_low_order_values() {
        let y = real_spherical_harmonics(1, [0.0, 0.0, 2.0]);
        assert!((y[0] - 0.5 / PI.sqrt()).abs() < 1e-15);
        assert!((y[lm_index(1, 0)] - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        // no Condon–Shortley phase: Y_11 positive along +x
        let y = real_spherical_harmonics(1, [1.0, 0.0, 0.0]);
        assert!(y[lm_index(1, 1)] > 0.0);
    }

    /// i_l(x) = x^l / (2^{l+1} l!) ∫_{-1}^{1} e^{xt} (1 - t²)^l dt
    fn bessel_oracle(l: usize, x: f64) -> f64 {
        let (t, w) = gauss_legendre(200);
        let mut fact = 1.0;
        for k in 1..=l {
            fact *= k as f64;
        }
        let integral: f64 = t
            .iter()
            .zip(&w)
            .map(|(t, w)| w * (x * (t - 1.0)).exp() * (1.0 - t * t).powi(l as i32))
            .sum();
        x.powi(l as i32) / (2f64.powi(l as i32 + 1) * fact) * integral
    }

    #[test]
    fn scaled_bessel_matches_integral_oracle() {
        let l_max = 6;
        let mut out = vec![0.0; l_max + 1];
        for &x in &[1e-6, 0.01, 0.3, 1.0, 2.5, 6.9, 7.0, 7.1, 12.0, 40.0, 100.0] {
            scaled_bessel_i(l_max, x, &mut out);
            for l in 0..=l_max {
                let o = bessel_oracle(l, x);
                let err = (out[l] - o).abs() / o.abs().max(1e-300);
                assert!(err < 1e-11, "l={l} x={x}: {} vs {o}", out[l]);
            }
        }
    }

    #[test]
    fn scaled_bessel_l_max_zero() {
        let mut out = [0.0];
        scaled_bessel_i(0, 0.5, &mut out);
        assert!((out[0] - bessel_oracle(0, 0.5)).abs() < 1e-14);
        scaled_bessel_i(0, 5.0, &mut out);
        assert!((out[0] - bessel_oracle(0, 5.0)).abs() < 1e-14);
    }
}
