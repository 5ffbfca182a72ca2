//! Finite-sample estimation: cross-fitted plug-in and doubly robust bounds,
//! bootstrap confidence intervals and subgroup reports.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assumptions::{bounding_functions, CausalAssumption, UncertaintySet};
use crate::bounds::{baseline_interval, delta_interval};
use crate::dataset::{format_float, ObservationalDataset};
use crate::error::{Error, Result};
use crate::logistic::ProbabilityModel;
use crate::measure::{Interval, Method, PerformanceMeasure, RegretInterval};
use crate::nuisance::{fit_nuisances, NuisanceConfig, NuisanceModels};
use crate::seed::{self, Stream};
use crate::vstats::{estimate_identified, IdentifiedVStats};

/// Tolerated share of failed bootstrap replicates.
pub const MAX_REPLICATE_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Plugin,
    DoublyRobust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub k_folds: usize,
    pub estimator: Estimator,
    pub bootstrap_b: usize,
    pub ci_level: f64,
    pub seed: u64,
    pub min_group_size: usize,
    /// Share of rows on which the bounding functions may cross before the
    /// fold is rejected.
    pub max_crossing_share: f64,
    pub nuisance: NuisanceConfig,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            k_folds: 2,
            estimator: Estimator::Plugin,
            bootstrap_b: 200,
            ci_level: 0.95,
            seed: 0,
            min_group_size: 50,
            max_crossing_share: crate::assumptions::MAX_CROSSING_SHARE,
            nuisance: NuisanceConfig::default(),
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self, assumption: &CausalAssumption) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::InvalidArgument(format!("k_folds must be at least 2, got {}", self.k_folds)));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidArgument(format!("ci_level must lie in (0, 1), got {}", self.ci_level)));
        }
        if !(0.0..=1.0).contains(&self.max_crossing_share) {
            return Err(Error::InvalidArgument(format!(
                "max_crossing_share must lie in [0, 1], got {}",
                self.max_crossing_share
            )));
        }
        if self.estimator == Estimator::DoublyRobust && assumption.msm_lambda().is_none() {
            return Err(Error::Unsupported(format!(
                "the doubly robust estimator needs an msm or rosenbaum assumption, not {assumption}"
            )));
        }
        assumption.validate_parameters()
    }
}

/// Which side of the bound a doubly robust estimate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// Seeded assignment of `n` rows to `k` folds of (nearly) equal size.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, Stream::Folds, 0)));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

/// `mean π_t(xᵢ)·ê₀(xᵢ)·τ(xᵢ)` for both bounding functions, clamped into
/// `[0, ρ̂_t0]` where `ρ̂_t0` is computed on the same fold.
pub fn plugin_vstat_bound(
    fold: &ObservationalDataset,
    tau: &crate::assumptions::BoundingFunctions,
    e1_model: &dyn ProbabilityModel,
    t: usize,
) -> Result<Interval> {
    let set = crate::assumptions::map_to_uncertainty_set(tau, e1_model, fold, &estimate_identified(fold))?;
    Ok(set.h(t))
}

/// Per-row doubly robust score for `v₁(t,0)` under a sensitivity model with
/// parameter `lambda`:
/// `π_t·[(1 − D)·τ(μ̂₁) + τ'(μ̂₁)·D·(Y − μ̂₁)·(1 − ê₁)/ê₁]` with
/// `τ(μ) = min(1, Λμ)` on the upper side and `μ/Λ` on the lower side.
pub fn dr_score(pi_t: f64, d: bool, y: Option<bool>, e1: f64, mu1: f64, lambda: f64, side: Side) -> f64 {
    let (tau, slope) = match side {
        Side::Upper if lambda * mu1 >= 1.0 => (1.0, 0.0),
        Side::Upper => (lambda * mu1, lambda),
        Side::Lower => (mu1 / lambda, 1.0 / lambda),
    };
    if d {
        let y = if y == Some(true) { 1.0 } else { 0.0 };
        pi_t * slope * (y - mu1) * (1.0 - e1) / e1
    } else {
        pi_t * tau
    }
}

/// Fold average of the doubly robust score, clamped into `[0, ρ̂_t0]`.
pub fn dr_vstat_bound(
    fold: &ObservationalDataset,
    lambda: f64,
    e1_model: &dyn ProbabilityModel,
    mu1_model: &dyn ProbabilityModel,
    t: usize,
    side: Side,
) -> Result<f64> {
    if fold.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(lambda.is_finite() && lambda >= 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must be at least 1, got {lambda}")));
    }
    let mut sum = 0.0;
    let mut rho = 0.0;
    for i in 0..fold.len() {
        let x = fold.x(i);
        let pi = fold.pi_t(i, t);
        if !fold.d(i) {
            rho += pi;
        }
        sum += dr_score(pi, fold.d(i), fold.y(i), e1_model.predict(x), mu1_model.predict(x), lambda, side);
    }
    let n = fold.len() as f64;
    Ok((sum / n).clamp(0.0, rho / n))
}

/// The uncertainty set estimated on `eval` with the given nuisances, and the
/// number of rows where the bounding functions crossed.
pub fn fold_uncertainty_set(
    eval: &ObservationalDataset,
    nuisances: &NuisanceModels,
    assumption: &CausalAssumption,
    estimator: Estimator,
    max_crossing_share: f64,
) -> Result<(UncertaintySet, usize)> {
    let identified = estimate_identified(eval);
    match estimator {
        Estimator::Plugin => {
            let tau = bounding_functions(assumption, nuisances, eval)?;
            let values = tau.evaluate_with_tolerance(eval, max_crossing_share)?;
            let e0: Vec<f64> = (0..eval.len()).map(|i| 1.0 - nuisances.e1.predict(eval.x(i))).collect();
            let set = crate::assumptions::uncertainty_set_from_values(&values, &e0, eval, &identified)?;
            Ok((set, values.crossings))
        }
        Estimator::DoublyRobust => {
            let lambda = assumption.msm_lambda().ok_or_else(|| {
                Error::Unsupported(format!("no doubly robust estimator for {assumption}"))
            })?;
            let mut crossings = 0;
            let mut h = [Interval::point(0.0); 2];
            for (t, slot) in h.iter_mut().enumerate() {
                let bound = |side| dr_vstat_bound(eval, lambda, nuisances.e1.as_ref(), nuisances.mu1.as_ref(), t, side);
                let (lo, hi) = (bound(Side::Lower)?, bound(Side::Upper)?);
                if lo > hi {
                    crossings += 1;
                    log::warn!("doubly robust bounds on v1({t},0) crossed ({lo} > {hi}); swapped");
                }
                *slot = Interval {
                    lo: lo.min(hi),
                    hi: lo.max(hi),
                };
            }
            Ok((UncertaintySet::new(identified, h[1], h[0])?, crossings))
        }
    }
}

/// Nuisances fit on each fold's complement, kept for reuse across
/// sensitivity parameters.
#[derive(Debug, Clone)]
pub struct FoldFit {
    pub fold: usize,
    pub eval: ObservationalDataset,
    pub nuisances: NuisanceModels,
}

#[derive(Debug, Clone)]
pub struct FittedFolds {
    pub folds: Vec<FoldFit>,
}

impl FittedFolds {
    pub fn fit(
        data: &ObservationalDataset,
        assignment: &[usize],
        assumption: &CausalAssumption,
        config: &NuisanceConfig,
    ) -> Result<Self> {
        if assignment.len() != data.len() {
            return Err(Error::InvalidArgument("fold assignment does not cover the dataset".into()));
        }
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let folds = (0..k)
            .into_par_iter()
            .map(|fold| {
                let (eval_rows, train_rows): (Vec<usize>, Vec<usize>) =
                    (0..data.len()).partition(|&i| assignment[i] == fold);
                let eval = data.subset(&eval_rows);
                let train = data.subset(&train_rows);
                if eval.is_empty() {
                    return Err(Error::EmptyDataset.in_fold(fold));
                }
                if eval.selected_count() == 0 {
                    return Err(Error::NoSelectedRows.in_fold(fold));
                }
                let nuisances = fit_nuisances(&train, assumption, config).map_err(|e| e.in_fold(fold))?;
                Ok(FoldFit { fold, eval, nuisances })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FittedFolds { folds })
    }

    /// Per-fold uncertainty sets under `assumption`, which may differ from
    /// the fitting assumption in its sensitivity parameter only.
    pub fn uncertainty_sets(
        &self,
        assumption: &CausalAssumption,
        config: &EstimationConfig,
    ) -> Result<Vec<(UncertaintySet, usize)>> {
        self.folds
            .iter()
            .map(|f| {
                fold_uncertainty_set(&f.eval, &f.nuisances, assumption, config.estimator, config.max_crossing_share)
                    .map_err(|e| e.in_fold(f.fold))
            })
            .collect()
    }
}

/// Bounds of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub n_eval: usize,
    pub selected: usize,
    pub identified: IdentifiedVStats,
    pub h10: Interval,
    pub h00: Interval,
    pub crossings: usize,
    pub intervals: Vec<RegretInterval>,
}

/// Percentile intervals for both endpoints of one regret interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointCi {
    pub measure: PerformanceMeasure,
    pub method: Method,
    pub lower: Interval,
    pub upper: Interval,
    pub replicates: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<Box<RegretReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub assumption: CausalAssumption,
    pub estimator: Estimator,
    pub k_folds: usize,
    pub seed: u64,
    pub n: usize,
    /// Fold-averaged intervals, for each measure the δ interval then the
    /// baseline interval.
    pub intervals: Vec<RegretInterval>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub endpoint_cis: Vec<EndpointCi>,
    pub folds: Vec<FoldDiagnostics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupReport>,
}

impl RegretReport {
    pub fn interval(&self, measure: &PerformanceMeasure, method: Method) -> Option<&RegretInterval> {
        self.intervals.iter().find(|r| r.measure == *measure && r.method == method)
    }

    pub fn attach_cis(&mut self, cis: Vec<EndpointCi>) -> Result<()> {
        for ci in &cis {
            if let Some(r) = self
                .intervals
                .iter_mut()
                .find(|r| r.measure == ci.measure && r.method == ci.method)
            {
                *r = r.clone().with_ci(ci.lower.lo, ci.upper.hi)?;
            }
        }
        self.endpoint_cis = cis;
        Ok(())
    }

    /// One row per group × measure × method; the pooled run is group `all`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "measure", "method", "lower", "upper", "ci_lower", "ci_upper"])?;
        let mut rows = |group: &str, report: &RegretReport| -> Result<()> {
            for r in &report.intervals {
                let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
                w.write_record([
                    group.to_string(),
                    r.measure.name(),
                    r.method.to_string(),
                    format_float(r.lower),
                    format_float(r.upper),
                    opt(r.ci_lower),
                    opt(r.ci_upper),
                ])?;
            }
            Ok(())
        };
        rows("all", self)?;
        for g in &self.groups {
            if let Some(report) = &g.report {
                rows(&g.group, report)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// δ and baseline intervals for each measure on one set.
pub fn set_intervals(set: &UncertaintySet, measures: &[PerformanceMeasure]) -> Result<Vec<RegretInterval>> {
    let mut out = Vec::with_capacity(2 * measures.len());
    for m in measures {
        out.push(delta_interval(set, m)?);
        out.push(baseline_interval(set, m)?);
    }
    Ok(out)
}

/// Fold-averaged intervals from per-fold sets.
pub fn averaged_intervals(
    sets: &[(UncertaintySet, usize)],
    measures: &[PerformanceMeasure],
) -> Result<(Vec<RegretInterval>, Vec<Vec<RegretInterval>>)> {
    let per_fold: Vec<Vec<RegretInterval>> = sets
        .iter()
        .enumerate()
        .map(|(k, (set, _))| set_intervals(set, measures).map_err(|e| e.in_fold(k)))
        .collect::<Result<_>>()?;
    let k = per_fold.len() as f64;
    let averaged = (0..per_fold[0].len())
        .map(|j| {
            let lower = per_fold.iter().map(|f| f[j].lower).sum::<f64>() / k;
            let upper = per_fold.iter().map(|f| f[j].upper).sum::<f64>() / k;
            let first = &per_fold[0][j];
            RegretInterval::new(lower, upper.max(lower), first.method, first.measure)
        })
        .collect::<Result<_>>()?;
    Ok((averaged, per_fold))
}

fn check_size(data: &ObservationalDataset, k: usize) -> Result<()> {
    if data.len() < 2 * k {
        return Err(Error::InvalidArgument(format!(
            "need at least {} rows for {k} folds, got {}",
            2 * k,
            data.len()
        )));
    }
    Ok(())
}

/// Cross-fitted regret intervals for every measure, δ and baseline computed
/// from the same per-fold uncertainty sets.
pub fn cross_fit_regret(
    data: &ObservationalDataset,
    measures: &[PerformanceMeasure],
    assumption: &CausalAssumption,
    config: &EstimationConfig,
) -> Result<RegretReport> {
    config.validate(assumption)?;
    check_size(data, config.k_folds)?;
    let assignment = assign_folds(data.len(), config.k_folds, config.seed);
    cross_fit_with_folds(data, &assignment, measures, assumption, config)
}

/// As [`cross_fit_regret`] with an explicit fold assignment.
pub fn cross_fit_with_folds(
    data: &ObservationalDataset,
    assignment: &[usize],
    measures: &[PerformanceMeasure],
    assumption: &CausalAssumption,
    config: &EstimationConfig,
) -> Result<RegretReport> {
    config.validate(assumption)?;
    if measures.is_empty() {
        return Err(Error::InvalidArgument("no measures requested".into()));
    }
    let fitted = FittedFolds::fit(data, assignment, assumption, &config.nuisance)?;
    report_from_fits(data.len(), &fitted, measures, assumption, config)
}

/// Builds a report from already fitted folds.
pub fn report_from_fits(
    n: usize,
    fitted: &FittedFolds,
    measures: &[PerformanceMeasure],
    assumption: &CausalAssumption,
    config: &EstimationConfig,
) -> Result<RegretReport> {
    let sets = fitted.uncertainty_sets(assumption, config)?;
    let (intervals, per_fold) = averaged_intervals(&sets, measures)?;
    let folds = fitted
        .folds
        .iter()
        .zip(sets.iter().zip(per_fold))
        .map(|(f, ((set, crossings), intervals))| FoldDiagnostics {
            fold: f.fold,
            n_eval: f.eval.len(),
            selected: f.eval.selected_count(),
            identified: set.identified,
            h10: set.h10,
            h00: set.h00,
            crossings: *crossings,
            intervals,
        })
        .collect();
    Ok(RegretReport {
        assumption: assumption.clone(),
        estimator: config.estimator,
        k_folds: fitted.folds.len(),
        seed: config.seed,
        n,
        intervals,
        endpoint_cis: Vec::new(),
        folds,
        groups: Vec::new(),
    })
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile intervals for each endpoint from `bootstrap_b` row-resampled
/// replicates, each refitting nuisances on a freshly drawn fold split.
pub fn bootstrap_ci(
    data: &ObservationalDataset,
    measures: &[PerformanceMeasure],
    assumption: &CausalAssumption,
    config: &EstimationConfig,
) -> Result<Vec<EndpointCi>> {
    config.validate(assumption)?;
    let b = config.bootstrap_b;
    if b == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one replicate".into()));
    }
    let n = data.len();
    let outcomes: Vec<Result<Vec<RegretInterval>>> = (0..b as u64)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seed::derive(config.seed, Stream::Bootstrap, r);
            let mut rng = seed::rng(rep_seed);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sample = data.subset(&rows);
            let rep_config = EstimationConfig {
                seed: rep_seed,
                ..config.clone()
            };
            cross_fit_regret(&sample, measures, assumption, &rep_config).map(|rep| rep.intervals)
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    if failed as f64 > MAX_REPLICATE_FAILURE_SHARE * b as f64 || failed == b {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err().map(|e| e.to_string()))
            .unwrap_or_default();
        return Err(Error::ReplicateFailures { failed, total: b, first });
    }
    let good: Vec<&Vec<RegretInterval>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let tail = (1.0 - config.ci_level) / 2.0;
    let ci = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        Interval {
            lo: quantile(&v, tail),
            hi: quantile(&v, 1.0 - tail),
        }
    };
    Ok((0..good[0].len())
        .map(|j| EndpointCi {
            measure: good[0][j].measure,
            method: good[0][j].method,
            lower: ci(good.iter().map(|g| g[j].lower).collect()),
            upper: ci(good.iter().map(|g| g[j].upper).collect()),
            replicates: good.len(),
            failed,
        })
        .collect())
}

/// Cross-fit estimate plus bootstrap intervals when `bootstrap_b > 0`.
pub fn estimate_regret(
    data: &ObservationalDataset,
    measures: &[PerformanceMeasure],
    assumption: &CausalAssumption,
    config: &EstimationConfig,
) -> Result<RegretReport> {
    let mut report = cross_fit_regret(data, measures, assumption, config)?;
    if config.bootstrap_b > 0 {
        report.attach_cis(bootstrap_ci(data, measures, assumption, config)?)?;
    }
    Ok(report)
}

/// Pooled estimate plus an independent estimate per level of the dataset's
/// group column; groups below `min_group_size` rows, or whose estimation
/// fails, are reported as skipped.
pub fn subgroup_report(
    data: &ObservationalDataset,
    measures: &[PerformanceMeasure],
    assumption: &CausalAssumption,
    config: &EstimationConfig,
) -> Result<RegretReport> {
    let groups = data
        .group()
        .ok_or_else(|| Error::MissingColumn("group".into()))?
        .clone();
    let mut report = estimate_regret(data, measures, assumption, config)?;
    report.groups = (0..groups.levels())
        .into_par_iter()
        .map(|level| {
            let label = groups.labels[level].clone();
            let rows: Vec<usize> = (0..data.len()).filter(|&i| groups.codes[i] as usize == level).collect();
            let n = rows.len();
            if n < config.min_group_size {
                return GroupReport {
                    group: label,
                    n,
                    skipped: Some(format!("{n} rows is below the minimum group size {}", config.min_group_size)),
                    report: None,
                };
            }
            let group_config = EstimationConfig {
                seed: seed::derive(config.seed, Stream::Subgroup, level as u64),
                ..config.clone()
            };
            match estimate_regret(&data.subset(&rows), measures, assumption, &group_config) {
                Ok(r) => GroupReport {
                    group: label,
                    n,
                    skipped: None,
                    report: Some(Box::new(r)),
                },
                Err(e) => GroupReport {
                    group: label,
                    n,
                    skipped: Some(e.to_string()),
                    report: None,
                },
            }
        })
        .collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Row;
    use crate::logistic::ConstantModel;
    use crate::vstats::{delta_value, VStatTable};
    use std::sync::Arc;

    fn toy(n: usize, all_selected: bool) -> ObservationalDataset {
        let mut rng = seed::rng(3);
        let rows = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let d = all_selected || rng.random::<f64>() < 0.5 + 0.3 * x;
                let y = rng.random::<f64>() < 0.4 + 0.2 * x;
                let pi1 = if x > 0.0 { 1.0 } else { 0.0 };
                Row::new(vec![x], d, pi1, d.then_some(y))
            })
            .collect();
        ObservationalDataset::from_rows(rows).unwrap()
    }

    fn config(b: usize) -> EstimationConfig {
        EstimationConfig {
            bootstrap_b: b,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn dr_score_on_single_selected_row() {
        let v = dr_score(0.5, true, Some(true), 0.8, 0.6, 1.2, Side::Upper);
        assert!((v - 0.06).abs() < 1e-15);
        let lower = dr_score(0.5, true, Some(true), 0.8, 0.6, 1.2, Side::Lower);
        assert!((lower - 0.5 / 1.2 * 0.4 * 0.25).abs() < 1e-15);
        // saturated upper bound has no first-order correction
        assert_eq!(dr_score(1.0, true, Some(false), 0.5, 0.9, 1.2, Side::Upper), 0.0);
        assert!((dr_score(1.0, false, None, 0.5, 0.5, 1.2, Side::Upper) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn plugin_bound_with_constant_functions() {
        let fold = ObservationalDataset::from_rows(vec![Row::new(vec![0.0], false, 1.0, None); 4]).unwrap();
        let n = NuisanceModels::from_models(Arc::new(ConstantModel { p: 0.5 }), Arc::new(ConstantModel { p: 0.8 }));
        let tau = bounding_functions(&CausalAssumption::Msm { lambda: 1.0 }, &n, &fold).unwrap();
        let h = plugin_vstat_bound(&fold, &tau, n.e1.as_ref(), 1).unwrap();
        assert!((h.hi - 0.4).abs() < 1e-15);
        let zero = NuisanceModels::from_models(n.e1.clone(), Arc::new(ConstantModel { p: 0.0 }));
        let tau = bounding_functions(&CausalAssumption::Msm { lambda: 2.0 }, &zero, &fold).unwrap();
        // μ̂₁ is floored, so the lower face is tiny but positive
        assert!(plugin_vstat_bound(&fold, &tau, n.e1.as_ref(), 1).unwrap().lo < 1e-3);
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = assign_folds(101, 4, 5);
        let counts = a.iter().fold(vec![0; 4], |mut c, &f| {
            c[f] += 1;
            c
        });
        assert!(counts.iter().all(|&c| c == 25 || c == 26));
        assert_eq!(a, assign_folds(101, 4, 5));
        assert_ne!(a, assign_folds(101, 4, 6));
    }

    #[test]
    fn fully_selected_data_collapses_to_point_regret() {
        let data = toy(400, true);
        // NPV is undefined: the status quo never takes action 0
        let measures = [
            PerformanceMeasure::accuracy(),
            PerformanceMeasure::tpr(),
            PerformanceMeasure::fpr(),
            PerformanceMeasure::ppv(),
        ];
        let report = cross_fit_regret(&data, &measures, &CausalAssumption::Manski, &config(0)).unwrap();
        let id = estimate_identified(&data);
        for m in measures {
            for method in [Method::Delta, Method::Baseline] {
                let r = report.interval(&m, method).unwrap();
                assert!(r.width() < 1e-12, "{m} {method}");
                // every fold is point identified; the average is the mean of fold point regrets
                let fold_mean: f64 = report
                    .folds
                    .iter()
                    .map(|f| {
                        let t = VStatTable::complete(&f.identified, 0.0, 0.0).unwrap();
                        delta_value(&t, &m).unwrap()
                    })
                    .sum::<f64>()
                    / 2.0;
                assert!((r.lower - fold_mean).abs() < 1e-12);
            }
        }
        assert_eq!(id.rho(1, 0) + id.rho(0, 0), 0.0);
    }

    #[test]
    fn delta_nested_in_baseline() {
        let data = toy(2000, false);
        let report = cross_fit_regret(&data, &PerformanceMeasure::standard_set(), &CausalAssumption::Msm { lambda: 1.5 }, &config(0))
            .unwrap();
        for m in PerformanceMeasure::standard_set() {
            let d = report.interval(&m, Method::Delta).unwrap();
            let b = report.interval(&m, Method::Baseline).unwrap();
            assert!(b.lower <= d.lower + 1e-9 && d.upper <= b.upper + 1e-9, "{m}");
        }
    }

    #[test]
    fn fold_average_matches_reported_endpoints() {
        let data = toy(1000, false);
        let report = cross_fit_regret(&data, &[PerformanceMeasure::accuracy()], &CausalAssumption::Manski, &config(0))
            .unwrap();
        let mean: f64 = report.folds.iter().map(|f| f.intervals[0].upper).sum::<f64>() / report.folds.len() as f64;
        assert!((mean - report.intervals[0].upper).abs() < 1e-15);
    }

    #[test]
    fn doubly_robust_requires_sensitivity_model() {
        let data = toy(200, false);
        let cfg = EstimationConfig {
            estimator: Estimator::DoublyRobust,
            ..config(0)
        };
        let err = cross_fit_regret(&data, &[PerformanceMeasure::accuracy()], &CausalAssumption::Manski, &cfg).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        assert!(cross_fit_regret(&data, &[PerformanceMeasure::accuracy()], &CausalAssumption::Msm { lambda: 1.3 }, &cfg).is_ok());
    }

    #[test]
    fn fold_without_selected_rows_reports_its_index() {
        let mut rows: Vec<Row> = (0..10).map(|i| Row::new(vec![i as f64], false, 0.5, None)).collect();
        rows[0] = Row::new(vec![0.0], true, 0.5, Some(true));
        let data = ObservationalDataset::from_rows(rows).unwrap();
        let assignment: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let err = cross_fit_with_folds(&data, &assignment, &[PerformanceMeasure::accuracy()], &CausalAssumption::Manski, &config(0))
            .unwrap_err();
        assert!(matches!(err, Error::Fold { fold: 0, .. } | Error::Fold { fold: 1, .. }));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let data = toy(300, false);
        let m = [PerformanceMeasure::accuracy()];
        let a = bootstrap_ci(&data, &m, &CausalAssumption::Msm { lambda: 1.2 }, &config(8)).unwrap();
        let b = bootstrap_ci(&data, &m, &CausalAssumption::Msm { lambda: 1.2 }, &config(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].replicates, 8);
    }

    #[test]
    fn single_replicate_gives_degenerate_interval() {
        let data = toy(300, false);
        let ci = bootstrap_ci(&data, &[PerformanceMeasure::accuracy()], &CausalAssumption::Manski, &config(1)).unwrap();
        assert_eq!(ci[0].lower.lo, ci[0].lower.hi);
        assert_eq!(ci[0].upper.lo, ci[0].upper.hi);
    }

    #[test]
    fn small_groups_are_skipped() {
        let mut rows: Vec<Row> = toy(300, false).rows().collect();
        for (i, r) in rows.iter_mut().enumerate() {
            r.group = Some(if i < 10 { "small".into() } else { "large".into() });
        }
        let data = ObservationalDataset::from_rows(rows).unwrap();
        let report = subgroup_report(&data, &[PerformanceMeasure::accuracy()], &CausalAssumption::Manski, &config(0))
            .unwrap();
        let small = report.groups.iter().find(|g| g.group == "small").unwrap();
        assert!(small.skipped.as_ref().unwrap().contains("minimum group size"));
        let large = report.groups.iter().find(|g| g.group == "large").unwrap();
        assert!(large.report.is_some());
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 + 2);
        assert!(text.starts_with("group,measure,method,lower,upper,ci_lower,ci_upper"));
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert!((quantile(&[0.0, 10.0], 0.25) - 2.5).abs() < 1e-12);
    }
}
