//! Bounds on the regret of a proposed decision policy relative to a status
//! quo policy, from observational data in which outcomes are observed only
//! for units the status quo selected.

pub mod assumptions;
pub mod bounds;
pub mod dataset;
pub mod error;
pub mod estimation;
pub mod logistic;
pub mod measure;
pub mod nuisance;
pub mod seed;
pub mod synthetic;
pub mod vstats;

pub use assumptions::{bounding_functions, map_to_uncertainty_set, set_size, BoundingFunctions, CausalAssumption, UncertaintySet};
pub use bounds::{baseline_interval, delta_interval, separation_bound};
pub use dataset::{load_dataset, read_dataset, ObservationalDataset, Row, Schema};
pub use error::{Error, ErrorKind, Result};
pub use estimation::{bootstrap_ci, cross_fit_regret, estimate_regret, subgroup_report, EstimationConfig, Estimator, RegretReport};
pub use logistic::{fit_classifier, ClassifierConfig, Learner, ProbabilityModel};
pub use measure::{Interval, Method, PerformanceMeasure, RegretInterval, UtilityMatrix};
pub use nuisance::{fit_nuisances, NuisanceConfig, NuisanceModels};
pub use vstats::{delta_value, estimate_identified, measure_value, IdentifiedVStats, Policy, VStatTable};
