//! Normal-Inverse-Gamma outputs, the evidential regression loss and its
//! analytic gradient, and the evidential uncertainty summand.

mod special;

pub use special::{digamma, log_gamma};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use special::{digamma_unchecked, log_gamma_unchecked};

/// Default regularization weight.
pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Per-sample evidential output `(γ, ν, α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub gamma: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NigParams {
    pub fn new(gamma: f64, nu: f64, alpha: f64, beta: f64) -> Self {
        Self {
            gamma,
            nu,
            alpha,
            beta,
        }
    }

    /// Checks the full invariant set: finite, `ν > 0`, `α > 1`, `β > 0`.
    pub fn validate(&self) -> Result<()> {
        self.check_finite()?;
        if !(self.nu > 0.0) {
            return Err(Error::Validation(format!("nu = {} must be > 0", self.nu)));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::Validation(format!(
                "alpha = {} must be > 1",
                self.alpha
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Validation(format!("beta = {} must be > 0", self.beta)));
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        if [self.gamma, self.nu, self.alpha, self.beta]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::Domain(format!("non-finite NIG parameters {self:?}")))
        }
    }

    /// Loss-level domain: finite, `ν > 0`, `α > 0`, `β > 0`.
    fn check_loss_domain(&self, y: f64) -> Result<()> {
        self.check_finite()?;
        if !y.is_finite() {
            return Err(Error::Domain(format!("non-finite target {y}")));
        }
        if !(self.nu > 0.0 && self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::Domain(format!(
                "NIG parameters outside the loss domain: {self:?}"
            )));
        }
        Ok(())
    }

    /// `Ω = 2β(1 + ν)`
    pub fn omega(&self) -> f64 {
        2.0 * self.beta * (1.0 + self.nu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_finite() && self.lambda >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )))
        }
    }
}

/// Negative log-likelihood of `y` under the NIG evidential distribution.
pub fn nll_loss(p: &NigParams, y: f64) -> Result<f64> {
    p.check_loss_domain(y)?;
    Ok(nll_unchecked(p, y))
}

fn nll_unchecked(p: &NigParams, y: f64) -> f64 {
    let omega = p.omega();
    let r = y - p.gamma;
    0.5 * (std::f64::consts::PI / p.nu).ln() - p.alpha * omega.ln()
        + (p.alpha + 0.5) * (r * r * p.nu + omega).ln()
        + log_gamma_unchecked(p.alpha)
        - log_gamma_unchecked(p.alpha + 0.5)
}

/// Evidence regularizer `|y − γ| (2ν + α)`.
pub fn reg_loss(p: &NigParams, y: f64) -> Result<f64> {
    p.check_loss_domain(y)?;
    Ok((y - p.gamma).abs() * (2.0 * p.nu + p.alpha))
}

/// Per-sample `nll + λ·reg`.
pub fn sample_loss(p: &NigParams, y: f64, cfg: &LossConfig) -> Result<f64> {
    p.check_loss_domain(y)?;
    Ok(nll_unchecked(p, y) + cfg.lambda * (y - p.gamma).abs() * (2.0 * p.nu + p.alpha))
}

/// Batch mean of `nll + λ·reg`, reduced in input order.
pub fn der_loss(batch: &[(NigParams, f64)], cfg: &LossConfig) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Argument("der_loss needs a non-empty batch".into()));
    }
    let mut total = 0.0;
    for (p, y) in batch {
        total += sample_loss(p, *y, cfg)?;
    }
    Ok(total / batch.len() as f64)
}

/// Partial derivatives with respect to `(γ, ν, α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NigGrad {
    pub d_gamma: f64,
    pub d_nu: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
}

/// Analytic gradient of `nll + λ·reg`. At `y = γ` the regularizer
/// contributes a zero subgradient in `γ`.
pub fn der_loss_grad(p: &NigParams, y: f64, cfg: &LossConfig) -> Result<NigGrad> {
    p.check_loss_domain(y)?;
    let NigParams {
        nu, alpha, beta, ..
    } = *p;
    let r = y - p.gamma;
    let omega = p.omega();
    let q = r * r * nu + omega;
    let a_half = alpha + 0.5;

    let mut g = NigGrad {
        d_gamma: -2.0 * a_half * r * nu / q,
        d_nu: -0.5 / nu - alpha * 2.0 * beta / omega + a_half * (r * r + 2.0 * beta) / q,
        d_alpha: q.ln() - omega.ln() + digamma_unchecked(alpha) - digamma_unchecked(alpha + 0.5),
        d_beta: -alpha / beta + a_half * 2.0 * (1.0 + nu) / q,
    };

    let lam = cfg.lambda;
    if lam != 0.0 {
        let sign = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
        g.d_gamma += lam * -sign * (2.0 * nu + alpha);
        g.d_nu += lam * 2.0 * r.abs();
        g.d_alpha += lam * r.abs();
    }
    Ok(g)
}

/// Epistemic `β/(ν(α−1))` plus aleatoric `β/(α−1)`.
pub fn eviu_per_sample(p: &NigParams) -> Result<f64> {
    p.check_finite()?;
    if !(p.alpha > 1.0) {
        return Err(Error::Domain(format!(
            "evidential uncertainty needs alpha > 1, got {}",
            p.alpha
        )));
    }
    if !(p.nu > 0.0 && p.beta > 0.0) {
        return Err(Error::Domain(format!(
            "evidential uncertainty needs nu, beta > 0: {p:?}"
        )));
    }
    let am1 = p.alpha - 1.0;
    Ok(p.beta / (p.nu * am1) + p.beta / am1)
}
