//! Built-in probabilistic binary classifiers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities handed to downstream code are kept in `[FLOOR, 1 − FLOOR]`.
pub const PROBABILITY_FLOOR: f64 = 1e-3;

/// An evaluable map from a covariate vector to `p(label = 1 | x)`.
pub trait ProbabilityModel: Send + Sync + std::fmt::Debug {
    /// The model's own estimate, before flooring.
    fn predict_raw(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_raw(x)
            .clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
    }
}

/// Learner selection plus its tuning knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub learner: Learner,
    /// L2 penalty on the standardized slopes; `None` means `1 / n`.
    pub l2_penalty: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            learner: Learner::Logistic,
            l2_penalty: None,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Learner {
    Logistic,
    /// Equal-mass bins of a single covariate with Laplace-smoothed rates.
    Histogram { feature: usize, bins: usize },
}

/// `(Σy + 1) / (n + 2)` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantModel {
    pub p: f64,
}

impl ConstantModel {
    pub fn laplace(labels: &[bool]) -> Self {
        let pos = labels.iter().filter(|&&y| y).count() as f64;
        ConstantModel {
            p: (pos + 1.0) / (labels.len() as f64 + 2.0),
        }
    }
}

impl ProbabilityModel for ConstantModel {
    fn predict_raw(&self, _x: &[f64]) -> f64 {
        self.p
    }
}

/// Logistic regression on standardized features with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Intercept first, then one coefficient per standardized feature.
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ProbabilityModel for LogisticModel {
    fn predict_raw(&self, x: &[f64]) -> f64 {
        let mut eta = self.coef[0];
        for j in 0..x.len() {
            eta += self.coef[j + 1] * (x[j] - self.mean[j]) / self.scale[j];
        }
        sigmoid(eta)
    }
}

/// Piecewise-constant rates over equal-mass bins of one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramModel {
    feature: usize,
    /// Upper cut points; bin `k` holds values in `(cuts[k-1], cuts[k]]`.
    cuts: Vec<f64>,
    rates: Vec<f64>,
}

impl ProbabilityModel for HistogramModel {
    fn predict_raw(&self, x: &[f64]) -> f64 {
        self.rates[bin_of(&self.cuts, x[self.feature])]
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Cut points splitting `values` into `bins` groups of (nearly) equal size.
pub(crate) fn equal_mass_cuts(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (1..bins)
        .filter_map(|k| {
            let idx = k * n / bins;
            (idx > 0 && idx < n).then(|| sorted[idx - 1])
        })
        .collect()
}

pub(crate) fn bin_of(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c < v)
}

/// Fits the configured learner to `(x_i, label_i)`.
///
/// With fewer than two rows or a single observed label the result is the
/// Laplace-smoothed constant model.
pub fn fit_classifier(
    x: &[&[f64]],
    labels: &[bool],
    config: &ClassifierConfig,
) -> Result<Box<dyn ProbabilityModel>> {
    if x.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows but {} labels",
            x.len(),
            labels.len()
        )));
    }
    let dim = x.first().map_or(0, |r| r.len());
    if let Some(row) = x.iter().position(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            row,
            expected: dim,
            found: x[row].len(),
        });
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if labels.len() < 2 || positives == 0 || positives == labels.len() {
        return Ok(Box::new(ConstantModel::laplace(labels)));
    }
    match config.learner {
        Learner::Logistic => Ok(Box::new(fit_logistic(x, labels, config)?)),
        Learner::Histogram { feature, bins } => {
            if feature >= dim || bins == 0 {
                return Err(Error::InvalidArgument(format!(
                    "histogram learner needs feature < {dim} and bins > 0"
                )));
            }
            Ok(Box::new(fit_histogram(x, labels, feature, bins)))
        }
    }
}

fn fit_histogram(x: &[&[f64]], labels: &[bool], feature: usize, bins: usize) -> HistogramModel {
    let values: Vec<f64> = x.iter().map(|r| r[feature]).collect();
    let cuts = equal_mass_cuts(&values, bins);
    let mut pos = vec![0.0; cuts.len() + 1];
    let mut tot = vec![0.0; cuts.len() + 1];
    for (v, &y) in values.iter().zip(labels) {
        let b = bin_of(&cuts, *v);
        tot[b] += 1.0;
        if y {
            pos[b] += 1.0;
        }
    }
    let rates = pos.iter().zip(&tot).map(|(p, t)| (p + 1.0) / (t + 2.0)).collect();
    HistogramModel { feature, cuts, rates }
}

/// Newton's method on `mean log-loss + (λ/2)‖β‖²`, slopes only penalized.
pub fn fit_logistic(x: &[&[f64]], labels: &[bool], config: &ClassifierConfig) -> Result<LogisticModel> {
    let n = x.len();
    let dim = x.first().map_or(0, |r| r.len());
    let nf = n as f64;
    let penalty = config.l2_penalty.unwrap_or(1.0 / nf);
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::InvalidArgument(format!("l2 penalty must be nonnegative, got {penalty}")));
    }

    let mut mean = vec![0.0; dim];
    for r in x {
        for j in 0..dim {
            mean[j] += r[j] / nf;
        }
    }
    let mut scale = vec![0.0; dim];
    for r in x {
        for j in 0..dim {
            scale[j] += (r[j] - mean[j]).powi(2) / nf;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }

    let p = dim + 1;
    let mut design = DMatrix::<f64>::zeros(n, p);
    for (i, r) in x.iter().enumerate() {
        design[(i, 0)] = 1.0;
        for j in 0..dim {
            design[(i, j + 1)] = (r[j] - mean[j]) / scale[j];
        }
    }
    let target = DVector::from_iterator(n, labels.iter().map(|&y| if y { 1.0 } else { 0.0 }));

    let objective = |beta: &DVector<f64>| -> f64 {
        let eta = &design * beta;
        let mut loss = 0.0;
        for i in 0..n {
            // log(1 + e^η) − yη, computed stably
            let e = eta[i];
            loss += e.max(0.0) + (-e.abs()).exp().ln_1p() - target[i] * e;
        }
        loss / nf + 0.5 * penalty * beta.rows(1, dim).norm_squared()
    };

    let mut beta = DVector::<f64>::zeros(p);
    let mut current = objective(&beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let eta = &design * &beta;
        let prob = eta.map(sigmoid);
        let mut grad = design.tr_mul(&(&prob - &target)) / nf;
        let mut weighted = design.clone();
        for i in 0..n {
            let w = prob[i] * (1.0 - prob[i]);
            weighted.row_mut(i).scale_mut(w);
        }
        let mut hess = design.tr_mul(&weighted) / nf;
        for j in 1..p {
            grad[j] += penalty * beta[j];
            hess[(j, j)] += penalty;
        }
        if grad.norm() < config.tol {
            converged = true;
            break;
        }
        for j in 0..p {
            hess[(j, j)] += 1e-12;
        }
        let step = match hess.cholesky() {
            Some(chol) => chol.solve(&grad),
            None => grad.clone(),
        };
        // backtracking keeps every iterate a descent step
        let mut t = 1.0;
        loop {
            let candidate = &beta - &step * t;
            let value = objective(&candidate);
            if value <= current || t < 1e-10 {
                beta = candidate;
                current = value;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::ModelFailure("logistic regression diverged".into()));
    }
    if !converged {
        log::debug!("logistic regression stopped after {iterations} iterations without converging");
    }
    Ok(LogisticModel {
        mean,
        scale,
        coef: beta.iter().copied().collect(),
        iterations,
        converged,
    })
}
