//! Monte Carlo protocols on synthetic worlds: coverage, assumption-violation
//! sweeps and design sensitivity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assumptions::CausalAssumption;
use crate::error::{Error, Result};
use crate::estimation::{
    assign_folds, bootstrap_ci, cross_fit_regret, report_from_fits, EstimationConfig, FittedFolds,
};
use crate::logistic::ProbabilityModel;
use crate::measure::{Method, PerformanceMeasure, RegretInterval};
use crate::seed::{self, Stream};
use crate::synthetic::world::{generate, oracle_regret, SyntheticWorld, WorldConfig};

/// Tolerated share of failed trials per grid point.
pub const MAX_TRIAL_FAILURE_SHARE: f64 = 0.10;

/// One estimated interval of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Knob value for sweeps, `n` for coverage experiments.
    pub value: f64,
    pub n: usize,
    pub trial: usize,
    pub measure: PerformanceMeasure,
    pub method: Method,
    pub lower: f64,
    pub upper: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub oracle: f64,
    pub covered: bool,
    pub clipped_share: f64,
}

/// Aggregate over the trials of one grid point, measure and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub value: f64,
    pub n: usize,
    pub measure: PerformanceMeasure,
    pub method: Method,
    pub trials: usize,
    pub failed: usize,
    /// Trials whose bounding functions crossed on more rows than tolerated:
    /// the data contradict the assumption, so no interval is reported and
    /// the trial counts as not covered.
    pub refuted: usize,
    pub coverage: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub mean_width: f64,
    pub mean_oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<CoverageSummary>,
}

impl CoverageTable {
    pub fn summary_for(&self, value: f64, measure: &PerformanceMeasure, method: Method) -> Option<&CoverageSummary> {
        self.summary
            .iter()
            .find(|s| s.value == value && s.measure == *measure && s.method == method)
    }
}

/// The interval a trial is judged by: the bootstrap band when present.
fn judged(interval: &RegretInterval) -> (f64, f64) {
    match (interval.ci_lower, interval.ci_upper) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => (interval.lower, interval.upper),
    }
}

enum TrialOutcome {
    Estimated(Vec<TrialRecord>),
    Refuted,
}

fn run_trial(
    world_config: &WorldConfig,
    value: f64,
    n: usize,
    trial: usize,
    assumption: &CausalAssumption,
    measures: &[PerformanceMeasure],
    config: &EstimationConfig,
    seed: u64,
) -> Result<TrialOutcome> {
    let world_seed = seed::derive(seed, Stream::Trial, trial as u64);
    let world = SyntheticWorld::sample(world_config.clone(), world_seed)?;
    let sample = generate(&world, n, seed::derive(world_seed, Stream::Sample, n as u64))?;
    let trial_config = EstimationConfig {
        seed: seed::derive(world_seed, Stream::Folds, n as u64),
        ..config.clone()
    };
    let mut report = match cross_fit_regret(&sample.data, measures, assumption, &trial_config) {
        Err(e) if matches!(e.root(), Error::TooManyCrossings { .. }) => return Ok(TrialOutcome::Refuted),
        other => other?,
    };
    if trial_config.bootstrap_b > 0 {
        report.attach_cis(bootstrap_ci(&sample.data, measures, assumption, &trial_config)?)?;
    }
    let unselected = (0..n).filter(|&i| !sample.data.d(i)).count().max(1);
    let records = report
        .intervals
        .iter()
        .map(|interval| {
            let oracle = oracle_regret(&sample, &interval.measure)?;
            let (lo, hi) = judged(interval);
            Ok(TrialRecord {
                value,
                n,
                trial,
                measure: interval.measure,
                method: interval.method,
                lower: interval.lower,
                upper: interval.upper,
                ci_lower: interval.ci_lower,
                ci_upper: interval.ci_upper,
                oracle,
                covered: lo <= oracle && oracle <= hi,
                clipped_share: sample.clipped as f64 / unselected as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialOutcome::Estimated(records))
}

/// Runs `trials` trials at one grid point. Trial `i` uses the same world
/// seed at every grid point, so grid points differ only in the knob.
fn run_grid_point(
    world_config: &WorldConfig,
    value: f64,
    n: usize,
    trials: usize,
    assumption: &CausalAssumption,
    measures: &[PerformanceMeasure],
    config: &EstimationConfig,
    seed: u64,
) -> Result<(Vec<TrialRecord>, Vec<CoverageSummary>)> {
    let outcomes: Vec<Result<TrialOutcome>> = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(world_config, value, n, trial, assumption, measures, config, seed))
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    if failed as f64 > MAX_TRIAL_FAILURE_SHARE * trials as f64 || failed == trials {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err().map(|e| e.to_string()))
            .unwrap_or_default();
        return Err(Error::ReplicateFailures {
            failed,
            total: trials,
            first,
        });
    }
    for err in outcomes.iter().filter_map(|o| o.as_ref().err()) {
        log::warn!("trial failed at grid value {value}, n = {n}: {err}");
    }
    let refuted = outcomes.iter().filter(|o| matches!(o, Ok(TrialOutcome::Refuted))).count();
    if refuted > 0 {
        log::info!("{refuted} of {trials} trials refuted at grid value {value}, n = {n}");
    }
    let records: Vec<TrialRecord> = outcomes
        .into_iter()
        .filter_map(|o| match o {
            Ok(TrialOutcome::Estimated(r)) => Some(r),
            _ => None,
        })
        .flatten()
        .collect();
    let mut summary = Vec::new();
    for m in measures {
        for method in [Method::Delta, Method::Baseline] {
            let sel: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.measure == *m && r.method == method)
                .collect();
            let k = sel.len() as f64;
            let mean = |f: fn(&TrialRecord) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / k;
            summary.push(CoverageSummary {
                value,
                n,
                measure: *m,
                method,
                trials: sel.len(),
                failed,
                refuted,
                coverage: sel.iter().filter(|r| r.covered).count() as f64 / (sel.len() + refuted) as f64,
                mean_lower: mean(|r| r.lower),
                mean_upper: mean(|r| r.upper),
                mean_width: mean(|r| r.upper - r.lower),
                mean_oracle: mean(|r| r.oracle),
            });
        }
    }
    Ok((records, summary))
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

/// Coverage of the oracle regret as a function of sample size. Every trial
/// resamples the world's weights from its own seed.
pub fn coverage_experiment(
    world: &WorldConfig,
    n_grid: &[usize],
    trials: usize,
    assumption: &CausalAssumption,
    measures: &[PerformanceMeasure],
    config: &EstimationConfig,
    seed: u64,
) -> Result<CoverageTable> {
    check_trials(trials)?;
    world.validate()?;
    config.validate(assumption)?;
    if n_grid.is_empty() || measures.is_empty() {
        return Err(Error::InvalidArgument("coverage needs a sample-size grid and measures".into()));
    }
    let mut table = CoverageTable {
        records: Vec::new(),
        summary: Vec::new(),
    };
    for &n in n_grid {
        let (records, summary) = run_grid_point(world, n as f64, n, trials, assumption, measures, config, seed)?;
        table.records.extend(records);
        table.summary.extend(summary);
    }
    Ok(table)
}

/// The world parameter varied by a violation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    /// Fixes the true confounding strength `Λ*` at the grid value.
    LambdaStar,
    /// Instrument relevance.
    Beta0,
    /// Exclusion-restriction violation.
    Beta1,
}

impl Knob {
    pub fn apply(&self, world: &WorldConfig, value: f64) -> WorldConfig {
        let mut out = world.clone();
        match self {
            Knob::LambdaStar => out.lambda_star_range = Some((value, value)),
            Knob::Beta0 => out.beta0 = value,
            Knob::Beta1 => out.beta1 = value,
        }
        out
    }
}

impl std::str::FromStr for Knob {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda_star" => Ok(Knob::LambdaStar),
            "beta0" => Ok(Knob::Beta0),
            "beta1" => Ok(Knob::Beta1),
            other => Err(Error::InvalidArgument(format!(
                "unknown knob {other:?}; expected lambda_star, beta0 or beta1"
            ))),
        }
    }
}

/// Coverage and interval endpoints along a grid of one world parameter, at
/// a fixed sample size and assumption.
#[allow(clippy::too_many_arguments)]
pub fn violation_sweep(
    world: &WorldConfig,
    knob: Knob,
    grid: &[f64],
    n: usize,
    trials: usize,
    assumption: &CausalAssumption,
    measures: &[PerformanceMeasure],
    config: &EstimationConfig,
    seed: u64,
) -> Result<CoverageTable> {
    check_trials(trials)?;
    config.validate(assumption)?;
    if grid.is_empty() || measures.is_empty() {
        return Err(Error::InvalidArgument("sweep needs a nonempty grid and measures".into()));
    }
    let mut table = CoverageTable {
        records: Vec::new(),
        summary: Vec::new(),
    };
    for &value in grid {
        let point = knob.apply(world, value);
        point.validate()?;
        let (records, summary) = run_grid_point(&point, value, n, trials, assumption, measures, config, seed)?;
        table.records.extend(records);
        table.summary.extend(summary);
    }
    Ok(table)
}

/// Smallest grid `Λ` at which each interval first contains zero; `None`
/// when no grid value does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub world: usize,
    pub measure: PerformanceMeasure,
    pub lambda0_delta: Option<f64>,
    pub lambda0_baseline: Option<f64>,
    /// δ interval at `Λ = 1`.
    pub point_lower: f64,
    pub point_upper: f64,
}

/// Design sensitivity of one sample under the sensitivity model: nuisances
/// are fit once and the intervals recomputed along `lambda_grid`.
pub fn design_sensitivity(
    data: &crate::dataset::ObservationalDataset,
    lambda_grid: &[f64],
    measures: &[PerformanceMeasure],
    config: &EstimationConfig,
) -> Result<Vec<SensitivityRow>> {
    if lambda_grid.is_empty() || lambda_grid[0] != 1.0 || lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "lambda grid must be strictly increasing and start at 1".into(),
        ));
    }
    if measures.is_empty() {
        return Err(Error::InvalidArgument("no measures requested".into()));
    }
    let base = CausalAssumption::Msm { lambda: 1.0 };
    config.validate(&base)?;
    let assignment = assign_folds(data.len(), config.k_folds, config.seed);
    let fitted = FittedFolds::fit(data, &assignment, &base, &config.nuisance)?;
    let mut rows: Vec<SensitivityRow> = Vec::with_capacity(measures.len());
    for (step, &lambda) in lambda_grid.iter().enumerate() {
        let assumption = CausalAssumption::Msm { lambda };
        let report = report_from_fits(data.len(), &fitted, measures, &assumption, config)?;
        for (j, m) in measures.iter().enumerate() {
            let delta = report.interval(m, Method::Delta).expect("requested measure");
            let baseline = report.interval(m, Method::Baseline).expect("requested measure");
            if step == 0 {
                rows.push(SensitivityRow {
                    world: 0,
                    measure: *m,
                    lambda0_delta: None,
                    lambda0_baseline: None,
                    point_lower: delta.lower,
                    point_upper: delta.upper,
                });
            }
            let row = &mut rows[j];
            if row.lambda0_delta.is_none() && delta.contains(0.0) {
                row.lambda0_delta = Some(lambda);
            }
            if row.lambda0_baseline.is_none() && baseline.contains(0.0) {
                row.lambda0_baseline = Some(lambda);
            }
        }
    }
    Ok(rows)
}

/// Design sensitivity on `worlds` independently drawn worlds.
#[allow(clippy::too_many_arguments)]
pub fn design_sensitivity_worlds(
    world: &WorldConfig,
    worlds: usize,
    n: usize,
    lambda_grid: &[f64],
    measures: &[PerformanceMeasure],
    config: &EstimationConfig,
    seed: u64,
) -> Result<Vec<SensitivityRow>> {
    check_trials(worlds)?;
    world.validate()?;
    let per_world: Vec<Vec<SensitivityRow>> = (0..worlds)
        .into_par_iter()
        .map(|w| {
            let world_seed = seed::derive(seed, Stream::Trial, w as u64);
            let sampled = SyntheticWorld::sample(world.clone(), world_seed)?;
            let sample = generate(&sampled, n, seed::derive(world_seed, Stream::Sample, n as u64))?;
            let cfg = EstimationConfig {
                seed: seed::derive(world_seed, Stream::Folds, 0),
                ..config.clone()
            };
            let mut rows = design_sensitivity(&sample.data, lambda_grid, measures, &cfg)?;
            rows.iter_mut().for_each(|r| r.world = w);
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_world.into_iter().flatten().collect())
}

/// A model whose predictions are shifted by a fixed amount and clamped to
/// `[0, 1]`; used to inject known nuisance error.
#[derive(Debug, Clone)]
pub struct ShiftedModel {
    pub inner: std::sync::Arc<dyn ProbabilityModel>,
    pub shift: f64,
}

impl ProbabilityModel for ShiftedModel {
    fn predict_raw(&self, x: &[f64]) -> f64 {
        (self.inner.predict_raw(x) + self.shift).clamp(0.0, 1.0)
    }
}
