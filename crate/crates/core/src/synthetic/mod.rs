//! Synthetic worlds with oracle access to `Y(1)` and the experiment
//! protocols run on them.

pub mod experiments;
pub mod fixtures;
pub mod healthcare;
pub mod quadrature;
pub mod world;

pub use experiments::{
    coverage_experiment, design_sensitivity, design_sensitivity_worlds, violation_sweep, CoverageSummary,
    CoverageTable, Knob, SensitivityRow, ShiftedModel, TrialRecord,
};
pub use fixtures::{random_fixture, random_fixtures, separation_characterization, Fixture, SeparationRow};
pub use healthcare::{generate_healthcare, HealthcareConfig};
pub use world::{generate, oracle_regret, population_table, Mode, OracleSample, SyntheticWorld, WorldConfig};
