//! Run configuration: a TOML file whose keys mirror the library's config
//! types, with command-line flags applied on top.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use policy_regret::estimation::{EstimationConfig, Estimator};
use policy_regret::synthetic::{HealthcareConfig, Knob, WorldConfig};
use policy_regret::{CausalAssumption, PerformanceMeasure, Schema};
use serde::{Deserialize, Serialize};

/// An invalid configuration, reported with exit status 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; excluded from written outputs, which never depend on it.
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub schema: Schema,
    pub assumption: CausalAssumption,
    pub measures: Vec<PerformanceMeasure>,
    pub estimation: EstimationConfig,
    pub world: WorldConfig,
    pub simulate: SimulateConfig,
    pub coverage: CoverageConfig,
    pub sweep: SweepConfig,
    pub sensitivity: SensitivityConfig,
    pub separation: SeparationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: None,
            out: PathBuf::from("out"),
            input: None,
            schema: Schema::default(),
            assumption: CausalAssumption::Msm { lambda: 1.2 },
            measures: PerformanceMeasure::standard_set(),
            estimation: EstimationConfig::default(),
            world: WorldConfig::default(),
            simulate: SimulateConfig::default(),
            coverage: CoverageConfig::default(),
            sweep: SweepConfig::default(),
            sensitivity: SensitivityConfig::default(),
            separation: SeparationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    World,
    Healthcare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub generator: Generator,
    pub n: usize,
    pub healthcare: HealthcareConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            generator: Generator::World,
            n: 20_000,
            healthcare: HealthcareConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    /// Bootstrap replicates per trial; zero judges the point-estimated
    /// interval.
    pub bootstrap_b: usize,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            n_grid: vec![1_000, 5_000, 20_000],
            trials: 100,
            bootstrap_b: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub knob: Knob,
    pub grid: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub bootstrap_b: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            knob: Knob::LambdaStar,
            grid: vec![0.5, 0.8, 1.0, 1.2, 1.4, 2.0, 2.5],
            n: 20_000,
            trials: 100,
            bootstrap_b: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub lambda_grid: Vec<f64>,
    pub worlds: usize,
    pub n: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            lambda_grid: (0..=20).map(|i| ((10 + i) as f64) / 10.0).collect(),
            worlds: 20,
            n: 5_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationConfig {
    pub n_fixtures: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig { n_fixtures: 1_000 }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub assumption: Option<String>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub z_column: Option<String>,
    pub w_column: Option<String>,
    pub k_folds: Option<usize>,
    pub bootstrap: Option<usize>,
    pub estimator: Option<Estimator>,
    pub measures: Option<Vec<String>>,
    pub group_column: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    /// Applies flags; `bootstrap` goes to whichever section `command` uses.
    pub fn apply(&mut self, o: &Overrides, command: &str) -> anyhow::Result<()> {
        if let Some(v) = &o.input {
            self.input = Some(v.clone());
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.jobs {
            self.jobs = Some(v);
        }
        if let Some(kind) = &o.assumption {
            self.assumption = self.assumption_from_flag(kind, o)?;
        } else {
            match &mut self.assumption {
                CausalAssumption::Msm { lambda } => {
                    if let Some(v) = o.lambda {
                        *lambda = v;
                    }
                }
                CausalAssumption::Rosenbaum { gamma } => {
                    if let Some(v) = o.gamma {
                        *gamma = v;
                    }
                }
                _ => {}
            }
        }
        if let Some(v) = o.k_folds {
            self.estimation.k_folds = v;
        }
        if let Some(v) = o.estimator {
            self.estimation.estimator = v;
        }
        if let Some(b) = o.bootstrap {
            match command {
                "coverage" => self.coverage.bootstrap_b = b,
                "sweep" => self.sweep.bootstrap_b = b,
                _ => self.estimation.bootstrap_b = b,
            }
        }
        if let Some(list) = &o.measures {
            self.measures = parse_measures(list)?;
        }
        if let Some(g) = &o.group_column {
            self.schema.group = Some(g.clone());
        }
        self.estimation.seed = self.seed;
        Ok(())
    }

    fn assumption_from_flag(&self, kind: &str, o: &Overrides) -> anyhow::Result<CausalAssumption> {
        let z = || o.z_column.clone().unwrap_or_else(|| "z".into());
        let w = || o.w_column.clone().unwrap_or_else(|| "w".into());
        Ok(match kind {
            "manski" => CausalAssumption::Manski,
            "msm" => CausalAssumption::Msm {
                lambda: o.lambda.or(self.assumption.msm_lambda()).unwrap_or(1.2),
            },
            "rosenbaum" => CausalAssumption::Rosenbaum {
                gamma: o.gamma.or(self.assumption.msm_lambda()).unwrap_or(1.2),
            },
            "iv" => CausalAssumption::Iv { z_column: z() },
            "proximal_t" => CausalAssumption::ProximalTreatment { z_column: z() },
            "proximal_tw" => CausalAssumption::ProximalTreatmentOutcome {
                z_column: z(),
                w_column: w(),
            },
            other => {
                return Err(invalid(format!(
                    "unknown assumption `{other}`; expected manski, msm, rosenbaum, iv, proximal_t or proximal_tw"
                )))
            }
        })
    }

    /// Checks everything `command` needs before any computation starts.
    pub fn validate(&self, command: &str) -> anyhow::Result<()> {
        if self.measures.is_empty() {
            return Err(invalid("the measure list is empty"));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs must be at least 1"));
        }
        let lib = |r: policy_regret::Result<()>| r.map_err(|e| invalid(e.to_string()));
        match command {
            "analyze" => {
                if self.input.is_none() {
                    return Err(invalid("analyze needs an input file (--input or `input`)"));
                }
                lib(self.estimation.validate(&self.assumption))?;
            }
            "simulate" => {
                if self.simulate.n == 0 {
                    return Err(invalid("simulate.n must be at least 1"));
                }
                match self.simulate.generator {
                    Generator::World => lib(self.world.validate())?,
                    Generator::Healthcare => lib(self.simulate.healthcare.validate())?,
                }
            }
            "coverage" => {
                if self.coverage.trials == 0 {
                    return Err(invalid("coverage.trials must be at least 1"));
                }
                if self.coverage.n_grid.is_empty() || self.coverage.n_grid.contains(&0) {
                    return Err(invalid("coverage.n_grid must be nonempty with positive sizes"));
                }
                lib(self.world.validate())?;
                lib(self.estimation.validate(&self.assumption))?;
            }
            "sweep" => {
                if self.sweep.trials == 0 {
                    return Err(invalid("sweep.trials must be at least 1"));
                }
                if self.sweep.grid.is_empty() || self.sweep.n == 0 {
                    return Err(invalid("sweep.grid must be nonempty and sweep.n positive"));
                }
                lib(self.world.validate())?;
                lib(self.estimation.validate(&self.assumption))?;
            }
            "sensitivity" => {
                let g = &self.sensitivity.lambda_grid;
                if g.first() != Some(&1.0) || g.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("sensitivity.lambda_grid must increase strictly from 1"));
                }
                if self.sensitivity.worlds == 0 || self.sensitivity.n == 0 {
                    return Err(invalid("sensitivity.worlds and sensitivity.n must be at least 1"));
                }
                lib(self.world.validate())?;
            }
            "separation" => {
                if self.separation.n_fixtures == 0 {
                    return Err(invalid("separation.n_fixtures must be at least 1"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The schema with instrument and proxy columns implied by the
    /// assumption filled in.
    pub fn effective_schema(&self) -> Schema {
        let mut schema = self.schema.clone();
        match &self.assumption {
            CausalAssumption::Iv { z_column } | CausalAssumption::ProximalTreatment { z_column } => {
                schema.z.get_or_insert_with(|| z_column.clone());
            }
            CausalAssumption::ProximalTreatmentOutcome { z_column, w_column } => {
                schema.z.get_or_insert_with(|| z_column.clone());
                schema.w.get_or_insert_with(|| w_column.clone());
            }
            _ => {}
        }
        schema
    }
}

/// Parses measure names. A comma-separated list is accepted; bare numbers
/// continue the preceding `utility:` entry, so `utility:1,0,0,1` survives
/// the split.
pub fn parse_measures(items: &[String]) -> anyhow::Result<Vec<PerformanceMeasure>> {
    let mut names: Vec<String> = Vec::new();
    for token in items.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|t| !t.is_empty()) {
        match names.last_mut() {
            Some(last) if last.starts_with("utility:") && token.parse::<f64>().is_ok() => {
                last.push(',');
                last.push_str(token);
            }
            _ => names.push(token.to_string()),
        }
    }
    names
        .iter()
        .map(|n| n.parse::<PerformanceMeasure>().map_err(|e| invalid(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utility_entries_survive_comma_splitting() {
        let m = parse_measures(&["accuracy,utility:1,0,0,2".into(), "npv".into()]).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m[1].name(), "utility:1,0,0,2");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("sed = 1").is_err());
        assert!(RunConfig::parse("[coverage]\ntrails = 3").is_err());
    }

    #[test]
    fn file_values_and_flags_layer() {
        let mut c = RunConfig::parse(
            "seed = 4\nmeasures = [\"npv\"]\n[assumption]\nkind = \"msm\"\nlambda = 1.5\n",
        )
        .unwrap();
        assert_eq!(c.assumption, CausalAssumption::Msm { lambda: 1.5 });
        let o = Overrides {
            lambda: Some(2.0),
            seed: Some(9),
            ..Default::default()
        };
        c.apply(&o, "analyze").unwrap();
        assert_eq!(c.assumption, CausalAssumption::Msm { lambda: 2.0 });
        assert_eq!((c.seed, c.estimation.seed), (9, 9));
        assert_eq!(c.measures, vec![PerformanceMeasure::npv()]);
    }

    #[test]
    fn empty_measures_and_zero_trials_fail_validation() {
        let c = RunConfig {
            measures: vec![],
            ..Default::default()
        };
        assert!(c.validate("separation").is_err());
        let mut c = RunConfig::default();
        c.coverage.trials = 0;
        assert!(c.validate("coverage").is_err());
    }

    #[test]
    fn instrument_column_follows_the_assumption() {
        let c = RunConfig {
            assumption: CausalAssumption::Iv { z_column: "site".into() },
            ..Default::default()
        };
        assert_eq!(c.effective_schema().z.as_deref(), Some("site"));
    }
}
