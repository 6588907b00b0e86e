//! Accuracy and uncertainty metrics for deterministic and MC-dropout inference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::{eviu_per_sample, NigParams};
use crate::runtime::PassTensor;

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Argument(format!(
            "prediction length {} != truth length {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Argument("mae needs at least one sample".into()));
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Mean over passes, accumulated as offsets from pass 0 so that identical
/// passes reproduce their value exactly.
fn pass_mean(passes: &PassTensor, i: usize, field: impl Fn(&NigParams) -> f64) -> f64 {
    let first = field(&passes.get(0, i));
    let offset: f64 = (1..passes.passes())
        .map(|p| field(&passes.get(p, i)) - first)
        .sum();
    first + offset / passes.passes() as f64
}

/// Per-sample mean of `γ` over passes.
pub fn pass_mean_prediction(passes: &PassTensor) -> Vec<f64> {
    (0..passes.samples())
        .map(|i| pass_mean(passes, i, |c| c.gamma))
        .collect()
}

/// MAE of the pass-averaged predictions.
pub fn d_mae(passes: &PassTensor, truth: &[f64]) -> Result<f64> {
    mae(&pass_mean_prediction(passes), truth)
}

/// Population variance of `γ` across passes, per sample.
pub fn d_unc(passes: &PassTensor) -> Vec<f64> {
    let mean = pass_mean_prediction(passes);
    let t = passes.passes() as f64;
    mean.iter()
        .enumerate()
        .map(|(i, m)| {
            (0..passes.passes())
                .map(|p| {
                    let d = passes.get(p, i).gamma - m;
                    d * d
                })
                .sum::<f64>()
                / t
        })
        .collect()
}

/// Mean and per-sample evidential uncertainty.
pub fn eviu(params: &[NigParams]) -> Result<(f64, Vec<f64>)> {
    if params.is_empty() {
        return Err(Error::Argument("eviu needs at least one sample".into()));
    }
    let per = params
        .iter()
        .map(eviu_per_sample)
        .collect::<Result<Vec<f64>>>()?;
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    Ok((mean, per))
}

/// Evidential uncertainty of pass-averaged `(ν, α, β)`.
pub fn d_eviu(passes: &PassTensor) -> Result<(f64, Vec<f64>)> {
    let averaged: Vec<NigParams> = (0..passes.samples())
        .map(|i| {
            NigParams::new(
                pass_mean(passes, i, |c| c.gamma),
                pass_mean(passes, i, |c| c.nu),
                pass_mean(passes, i, |c| c.alpha),
                pass_mean(passes, i, |c| c.beta),
            )
        })
        .collect();
    eviu(&averaged)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Set when either input is constant; `rho` is then 0.
    pub degenerate: bool,
}

/// Average ranks (1-based), ties sharing the mean rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(u: &[f64], e: &[f64]) -> Result<Spearman> {
    if u.len() != e.len() {
        return Err(Error::Argument("spearman inputs differ in length".into()));
    }
    if u.len() < 2 {
        return Err(Error::Argument("spearman needs at least two samples".into()));
    }
    if u.iter().chain(e).any(|v| !v.is_finite()) {
        return Err(Error::Argument("spearman inputs must be finite".into()));
    }
    let ru = average_ranks(u);
    let re = average_ranks(e);
    let n = u.len() as f64;
    let mu = ru.iter().sum::<f64>() / n;
    let me = re.iter().sum::<f64>() / n;
    let (mut cov, mut vu, mut ve) = (0.0, 0.0, 0.0);
    for (a, b) in ru.iter().zip(&re) {
        cov += (a - mu) * (b - me);
        vu += (a - mu) * (a - mu);
        ve += (b - me) * (b - me);
    }
    if vu == 0.0 || ve == 0.0 {
        return Ok(Spearman {
            rho: 0.0,
            degenerate: true,
        });
    }
    Ok(Spearman {
        rho: (cov / (vu * ve).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Metrics for one task or a scenario aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub n_samples: usize,
    pub mae: f64,
    pub eviu: f64,
    pub d_mae: f64,
    pub d_unc: f64,
    pub d_eviu: f64,
    /// Uncertainty-metric name → Spearman ρ against absolute error.
    pub spearman: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<PerSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSample {
    pub abs_error: Vec<f64>,
    pub d_abs_error: Vec<f64>,
    pub eviu: Vec<f64>,
    pub d_unc: Vec<f64>,
    pub d_eviu: Vec<f64>,
}

pub const UNCERTAINTY_NAMES: [&str; 3] = ["eviu", "d_unc", "d_eviu"];

impl MetricReport {
    /// All five metrics plus Spearman correlations. `deterministic` feeds MAE
    /// and EviU; `passes` feeds the dropout metrics. Deterministic
    /// uncertainty is ranked against deterministic errors and dropout
    /// uncertainties against errors of the pass-averaged prediction.
    pub fn from_predictions(
        name: impl Into<String>,
        deterministic: &[NigParams],
        passes: &PassTensor,
        truth: &[f64],
    ) -> Result<Self> {
        if deterministic.len() != truth.len() || passes.samples() != truth.len() {
            return Err(Error::Argument(format!(
                "sample counts differ: deterministic {}, passes {}, truth {}",
                deterministic.len(),
                passes.samples(),
                truth.len()
            )));
        }
        let pred: Vec<f64> = deterministic.iter().map(|p| p.gamma).collect();
        let abs_error: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
        let mean_pred = pass_mean_prediction(passes);
        let d_abs_error: Vec<f64> = mean_pred
            .iter()
            .zip(truth)
            .map(|(p, t)| (p - t).abs())
            .collect();
        let mae_v = mae(&pred, truth)?;
        let (eviu_mean, eviu_per) = eviu(deterministic)?;
        let d_mae_v = mae(&mean_pred, truth)?;
        let d_unc_per = d_unc(passes);
        let d_unc_mean = d_unc_per.iter().sum::<f64>() / d_unc_per.len() as f64;
        let (d_eviu_mean, d_eviu_per) = d_eviu(passes)?;
        let mut corr = Vec::new();
        if truth.len() >= 2 {
            corr.push(("eviu".to_string(), spearman(&eviu_per, &abs_error)?.rho));
            corr.push(("d_unc".to_string(), spearman(&d_unc_per, &d_abs_error)?.rho));
            corr.push(("d_eviu".to_string(), spearman(&d_eviu_per, &d_abs_error)?.rho));
        }
        Ok(Self {
            name: name.into(),
            n_samples: truth.len(),
            mae: mae_v,
            eviu: eviu_mean,
            d_mae: d_mae_v,
            d_unc: d_unc_mean,
            d_eviu: d_eviu_mean,
            spearman: corr,
            per_sample: Some(PerSample {
                abs_error,
                d_abs_error,
                eviu: eviu_per,
                d_unc: d_unc_per,
                d_eviu: d_eviu_per,
            }),
        })
    }

    pub fn spearman_for(&self, metric: &str) -> Option<f64> {
        self.spearman
            .iter()
            .find(|(k, _)| k == metric)
            .map(|(_, v)| *v)
    }

    /// Unweighted mean of task-level metrics; Spearman entries are averaged
    /// over the tasks that report them.
    pub fn summarize(name: impl Into<String>, tasks: &[MetricReport]) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Argument("cannot summarize zero tasks".into()));
        }
        let n = tasks.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| tasks.iter().map(f).sum::<f64>() / n;
        let mut corr = Vec::new();
        for key in UNCERTAINTY_NAMES {
            let vals: Vec<f64> = tasks.iter().filter_map(|t| t.spearman_for(key)).collect();
            if !vals.is_empty() {
                corr.push((key.to_string(), vals.iter().sum::<f64>() / vals.len() as f64));
            }
        }
        Ok(Self {
            name: name.into(),
            n_samples: tasks.iter().map(|t| t.n_samples).sum(),
            mae: avg(|t| t.mae),
            eviu: avg(|t| t.eviu),
            d_mae: avg(|t| t.d_mae),
            d_unc: avg(|t| t.d_unc),
            d_eviu: avg(|t| t.d_eviu),
            spearman: corr,
            per_sample: None,
        })
    }
}
