//! The subcommands. Each writes CSV tables plus a JSON document to the
//! output directory; nothing in the outputs depends on wall-clock time or
//! thread count.

use std::fs;
use std::path::Path;

use anyhow::Context;
use policy_regret::estimation::{estimate_regret, subgroup_report};
use policy_regret::synthetic::{
    coverage_experiment, design_sensitivity_worlds, generate, generate_healthcare, oracle_regret,
    separation_characterization, violation_sweep, CoverageTable, OracleSample, SyntheticWorld,
};
use policy_regret::load_dataset;
use policy_regret::seed::{self, Stream};
use serde::Serialize;

use crate::config::{Generator, RunConfig};

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, command: &str, config: &RunConfig, result: T) -> anyhow::Result<()> {
    let doc = Document {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> anyhow::Result<()> {
    let path = dir.join(name);
    let mut writer = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn out_dir(config: &RunConfig) -> anyhow::Result<&Path> {
    fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    Ok(&config.out)
}

pub fn analyze(config: &RunConfig) -> anyhow::Result<()> {
    let input = config.input.as_ref().expect("validated");
    let data = load_dataset(input, &config.effective_schema())
        .with_context(|| format!("loading {}", input.display()))?;
    config.assumption.validate(&data)?;
    log::info!("loaded {} rows, {} selected", data.len(), data.selected_count());
    let report = if data.group().is_some() {
        subgroup_report(&data, &config.measures, &config.assumption, &config.estimation)
    } else {
        estimate_regret(&data, &config.measures, &config.assumption, &config.estimation)
    }
    .with_context(|| format!("estimating regret under {}", config.assumption))?;
    for r in &report.intervals {
        log::info!("{} {}: [{:.4}, {:.4}]", r.measure, r.method, r.lower, r.upper);
    }
    let dir = out_dir(config)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    fs::write(dir.join("report.csv"), csv)?;
    write_json(dir, "report.json", "analyze", config, &report)
}

#[derive(Serialize)]
struct OracleRow {
    row: usize,
    t: u8,
    y1: u8,
}

#[derive(Serialize)]
struct SimulationSummary {
    n: usize,
    selected: usize,
    clipped: usize,
    world: Option<SyntheticWorld>,
    oracle_regret: Vec<(String, Option<f64>)>,
}

pub fn simulate(config: &RunConfig) -> anyhow::Result<()> {
    let (sample, world): (OracleSample, Option<SyntheticWorld>) = match config.simulate.generator {
        Generator::World => {
            let world = SyntheticWorld::sample(config.world.clone(), config.seed)?;
            let sample_seed = seed::derive(config.seed, Stream::Sample, 0);
            (generate(&world, config.simulate.n, sample_seed)?, Some(world))
        }
        Generator::Healthcare => {
            let hc = policy_regret::synthetic::HealthcareConfig {
                n: config.simulate.n,
                ..config.simulate.healthcare.clone()
            };
            (generate_healthcare(&hc, seed::derive(config.seed, Stream::Sample, 0))?, None)
        }
    };
    let dir = out_dir(config)?;
    sample.data.save_csv(dir.join("data.csv"))?;
    let oracle: Vec<OracleRow> = (0..sample.y1.len())
        .map(|i| OracleRow {
            row: i,
            t: sample.t[i] as u8,
            y1: sample.y1[i] as u8,
        })
        .collect();
    write_csv(dir, "oracle.csv", &oracle)?;
    let summary = SimulationSummary {
        n: sample.data.len(),
        selected: sample.data.selected_count(),
        clipped: sample.clipped,
        world,
        oracle_regret: config
            .measures
            .iter()
            .map(|m| (m.name(), oracle_regret(&sample, m).ok()))
            .collect(),
    };
    write_json(dir, "simulation.json", "simulate", config, summary)
}

fn write_table(config: &RunConfig, command: &str, table: &CoverageTable) -> anyhow::Result<()> {
    for s in &table.summary {
        log::info!(
            "{} = {} {} {}: coverage {:.3}, mean width {:.4}",
            if command == "coverage" { "n" } else { "value" },
            s.value,
            s.measure,
            s.method,
            s.coverage,
            s.mean_width
        );
    }
    let dir = out_dir(config)?;
    write_csv(dir, &format!("{command}_trials.csv"), &table.records)?;
    write_csv(dir, &format!("{command}_summary.csv"), &table.summary)?;
    write_json(dir, &format!("{command}.json"), command, config, &table.summary)
}

pub fn coverage(config: &RunConfig) -> anyhow::Result<()> {
    let estimation = policy_regret::EstimationConfig {
        bootstrap_b: config.coverage.bootstrap_b,
        ..config.estimation.clone()
    };
    let table = coverage_experiment(
        &config.world,
        &config.coverage.n_grid,
        config.coverage.trials,
        &config.assumption,
        &config.measures,
        &estimation,
        config.seed,
    )?;
    write_table(config, "coverage", &table)
}

pub fn sweep(config: &RunConfig) -> anyhow::Result<()> {
    let estimation = policy_regret::EstimationConfig {
        bootstrap_b: config.sweep.bootstrap_b,
        ..config.estimation.clone()
    };
    let table = violation_sweep(
        &config.world,
        config.sweep.knob,
        &config.sweep.grid,
        config.sweep.n,
        config.sweep.trials,
        &config.assumption,
        &config.measures,
        &estimation,
        config.seed,
    )?;
    write_table(config, "sweep", &table)
}

#[derive(Serialize)]
struct SensitivitySummary {
    pairs: usize,
    nested: usize,
    strict: usize,
}

pub fn sensitivity(config: &RunConfig) -> anyhow::Result<()> {
    let rows = design_sensitivity_worlds(
        &config.world,
        config.sensitivity.worlds,
        config.sensitivity.n,
        &config.sensitivity.lambda_grid,
        &config.measures,
        &config.estimation,
        config.seed,
    )?;
    let beyond = f64::INFINITY;
    let nested = rows
        .iter()
        .filter(|r| r.lambda0_delta.unwrap_or(beyond) >= r.lambda0_baseline.unwrap_or(beyond))
        .count();
    let strict = rows
        .iter()
        .filter(|r| r.lambda0_delta.unwrap_or(beyond) > r.lambda0_baseline.unwrap_or(beyond))
        .count();
    log::info!("{nested} of {} pairs nested, {strict} strictly", rows.len());
    let dir = out_dir(config)?;
    write_csv(dir, "sensitivity.csv", &rows)?;
    write_json(
        dir,
        "sensitivity.json",
        "sensitivity",
        config,
        SensitivitySummary {
            pairs: rows.len(),
            nested,
            strict,
        },
    )
}

#[derive(Serialize)]
struct SeparationSummary {
    measure: String,
    fixtures: usize,
    min_slack: f64,
    mean_improvement: f64,
    mean_bound: f64,
}

pub fn separation(config: &RunConfig) -> anyhow::Result<()> {
    let rows = separation_characterization(config.separation.n_fixtures, config.seed, &config.measures)?;
    let summary: Vec<SeparationSummary> = config
        .measures
        .iter()
        .map(|m| {
            let sel: Vec<_> = rows.iter().filter(|r| r.measure == *m).collect();
            let k = sel.len() as f64;
            SeparationSummary {
                measure: m.name(),
                fixtures: sel.len(),
                min_slack: sel.iter().map(|r| r.improvement - r.bound).fold(f64::INFINITY, f64::min),
                mean_improvement: sel.iter().map(|r| r.improvement).sum::<f64>() / k,
                mean_bound: sel.iter().map(|r| r.bound).sum::<f64>() / k,
            }
        })
        .collect();
    for s in &summary {
        log::info!("{}: min(improvement - bound) = {:.3e}", s.measure, s.min_slack);
    }
    let dir = out_dir(config)?;
    write_csv(dir, "separation.csv", &rows)?;
    write_json(dir, "separation.json", "separation", config, summary)
}
