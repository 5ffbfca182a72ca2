//! Fitting the nuisance functions `ê₁(x)`, `μ̂₁(x)` and their
//! instrument- or proxy-conditional variants.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assumptions::CausalAssumption;
use crate::dataset::{Categorical, ObservationalDataset};
use crate::error::{Error, Result};
use crate::logistic::{bin_of, equal_mass_cuts, fit_classifier, ClassifierConfig, ProbabilityModel};

pub type SharedModel = Arc<dyn ProbabilityModel>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuisanceConfig {
    pub classifier: ClassifierConfig,
    /// Instrument or proxy levels with fewer fold rows are dropped.
    pub min_level_rows: usize,
    /// Number of equal-mass strata of `μ̂₁(x)` for proxy frequencies.
    pub proximal_bins: usize,
    /// Minimum selected rows per proxy stratum.
    pub min_bin_rows: usize,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        NuisanceConfig {
            classifier: ClassifierConfig::default(),
            min_level_rows: 20,
            proximal_bins: 10,
            min_bin_rows: 20,
        }
    }
}

/// `ê₁(x, z)` and `μ̂₁(x, z)` for one instrument/proxy level.
#[derive(Debug, Clone)]
pub struct LevelModels {
    pub level: u32,
    pub label: String,
    pub e1: SharedModel,
    pub mu1: SharedModel,
}

/// Extremes of `η₁(w,z) / (η₁(w) η₁(z))` within strata of `μ̂₁(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximalFrequencies {
    /// Stratum cut points on the `μ̂₁` scale.
    pub cuts: Vec<f64>,
    pub ratio_lo: Vec<f64>,
    pub ratio_hi: Vec<f64>,
}

impl ProximalFrequencies {
    pub fn stratum(&self, mu1: f64) -> usize {
        bin_of(&self.cuts, mu1)
    }
}

#[derive(Debug, Clone)]
pub struct NuisanceModels {
    /// `p(D = 1 | X = x)`.
    pub e1: SharedModel,
    /// `E[Y | D = 1, X = x]`, fit on selected rows only.
    pub mu1: SharedModel,
    pub per_level: Option<Vec<LevelModels>>,
    pub proximal: Option<ProximalFrequencies>,
}

impl NuisanceModels {
    /// Wraps known nuisance functions, e.g. the truth of a simulation.
    pub fn from_models(e1: SharedModel, mu1: SharedModel) -> Self {
        NuisanceModels {
            e1,
            mu1,
            per_level: None,
            proximal: None,
        }
    }
}

fn fit_on(
    data: &ObservationalDataset,
    rows: impl Iterator<Item = usize>,
    label: impl Fn(usize) -> bool,
    config: &ClassifierConfig,
) -> Result<SharedModel> {
    let rows: Vec<usize> = rows.collect();
    let x: Vec<&[f64]> = rows.iter().map(|&i| data.x(i)).collect();
    let y: Vec<bool> = rows.iter().map(|&i| label(i)).collect();
    Ok(Arc::from(fit_classifier(&x, &y, config)?))
}

/// Propensity model on every row (label `d`).
pub fn fit_propensity(data: &ObservationalDataset, config: &ClassifierConfig) -> Result<SharedModel> {
    fit_on(data, 0..data.len(), |i| data.d(i), config)
}

/// Outcome model on the selected rows with an observed outcome.
pub fn fit_outcome(data: &ObservationalDataset, config: &ClassifierConfig) -> Result<SharedModel> {
    if data.selected_count() == 0 {
        return Err(Error::NoSelectedRows);
    }
    let rows = (0..data.len()).filter(|&i| data.d(i) && data.y(i).is_some());
    fit_on(data, rows, |i| data.y(i) == Some(true), config)
}

pub fn fit_nuisances(
    data: &ObservationalDataset,
    assumption: &CausalAssumption,
    config: &NuisanceConfig,
) -> Result<NuisanceModels> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    assumption.validate(data)?;
    let e1 = fit_propensity(data, &config.classifier)?;
    let mu1 = fit_outcome(data, &config.classifier)?;
    let mut models = NuisanceModels::from_models(e1, mu1);
    match assumption {
        CausalAssumption::Iv { .. } | CausalAssumption::ProximalTreatment { .. } => {
            let z = data.z().expect("validated");
            models.per_level = Some(fit_per_level(data, z, config)?);
        }
        CausalAssumption::ProximalTreatmentOutcome { .. } => {
            models.proximal = Some(proximal_frequencies(data, models.mu1.as_ref(), config)?);
        }
        _ => {}
    }
    Ok(models)
}

fn fit_per_level(
    data: &ObservationalDataset,
    z: &Categorical,
    config: &NuisanceConfig,
) -> Result<Vec<LevelModels>> {
    let mut out = Vec::new();
    for level in 0..z.levels() as u32 {
        let rows: Vec<usize> = (0..data.len()).filter(|&i| z.codes[i] == level).collect();
        let label = &z.labels[level as usize];
        if rows.len() < config.min_level_rows {
            log::warn!(
                "dropping level `{label}`: {} rows (< {})",
                rows.len(),
                config.min_level_rows
            );
            continue;
        }
        let e1 = fit_on(data, rows.iter().copied(), |i| data.d(i), &config.classifier)?;
        let selected = rows.iter().copied().filter(|&i| data.d(i) && data.y(i).is_some());
        let mu1 = fit_on(data, selected, |i| data.y(i) == Some(true), &config.classifier)?;
        out.push(LevelModels {
            level,
            label: label.clone(),
            e1,
            mu1,
        });
    }
    if out.is_empty() {
        return Err(Error::NoInstrumentSupport {
            min_rows: config.min_level_rows,
        });
    }
    Ok(out)
}

/// Empirical `n·n_wz / (n_w·n_z)` over selected rows, stratified by `μ̂₁(x)`.
fn proximal_frequencies(
    data: &ObservationalDataset,
    mu1: &dyn ProbabilityModel,
    config: &NuisanceConfig,
) -> Result<ProximalFrequencies> {
    let z = data.z().expect("validated");
    let w = data.w().expect("validated");
    let selected: Vec<usize> = (0..data.len()).filter(|&i| data.d(i)).collect();
    let scores: Vec<f64> = selected.iter().map(|&i| mu1.predict(data.x(i))).collect();
    let cuts = equal_mass_cuts(&scores, config.proximal_bins);
    let strata = cuts.len() + 1;
    let (nw, nz) = (w.levels(), z.levels());
    let mut cells = vec![vec![0usize; nw * nz]; strata];
    for (&i, &s) in selected.iter().zip(&scores) {
        cells[bin_of(&cuts, s)][w.codes[i] as usize * nz + z.codes[i] as usize] += 1;
    }
    let mut ratio_lo = Vec::with_capacity(strata);
    let mut ratio_hi = Vec::with_capacity(strata);
    for (bin, cell) in cells.iter().enumerate() {
        let n: usize = cell.iter().sum();
        if n < config.min_bin_rows {
            return Err(Error::SparseProximalCell {
                bin,
                count: n,
                min_rows: config.min_bin_rows,
            });
        }
        let n_w: Vec<usize> = (0..nw).map(|a| (0..nz).map(|b| cell[a * nz + b]).sum()).collect();
        let n_z: Vec<usize> = (0..nz).map(|b| (0..nw).map(|a| cell[a * nz + b]).sum()).collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in (0..nw).filter(|&a| n_w[a] > 0) {
            for b in (0..nz).filter(|&b| n_z[b] > 0) {
                let r = (n * cell[a * nz + b]) as f64 / (n_w[a] * n_z[b]) as f64;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        ratio_lo.push(lo);
        ratio_hi.push(hi);
    }
    Ok(ProximalFrequencies {
        cuts,
        ratio_lo,
        ratio_hi,
    })
}
