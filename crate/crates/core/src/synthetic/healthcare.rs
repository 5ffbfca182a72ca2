//! A generator for a care-management enrollment dataset: demographics, a
//! cost-based risk score, status-quo enrollment driven partly by unrecorded
//! clinical judgment, and an algorithm-only policy that enrolls everyone
//! above a score percentile.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{ObservationalDataset, Row};
use crate::error::{Error, Result};
use crate::logistic::sigmoid;
use crate::seed;
use crate::synthetic::world::OracleSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HealthcareConfig {
    pub n: usize,
    /// Target share enrolled by the status quo.
    pub enrollment_rate: f64,
    /// The algorithm enrolls rows whose score reaches this quantile.
    pub threshold_quantile: f64,
    /// Share of rows in the group the cost proxy underserves.
    pub minority_share: f64,
}

impl Default for HealthcareConfig {
    fn default() -> Self {
        HealthcareConfig {
            n: 10_000,
            enrollment_rate: 0.18,
            threshold_quantile: 0.55,
            minority_share: 0.3,
        }
    }
}

impl HealthcareConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument("healthcare data needs at least 2 rows".into()));
        }
        for (name, v) in [
            ("enrollment_rate", self.enrollment_rate),
            ("threshold_quantile", self.threshold_quantile),
            ("minority_share", self.minority_share),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

pub const COVARIATES: [&str; 5] = ["x_age", "x_female", "x_chronic", "x_biomarker", "x_cost"];
pub const GROUPS: [&str; 2] = ["group_a", "group_b"];

struct Patient {
    x: [f64; 5],
    judgment: f64,
    need: f64,
    score: f64,
    minority: bool,
}

/// Intercept putting the mean of `σ(c + s)` at `target`, by bisection.
fn calibrate_intercept(logits: &[f64], target: f64) -> f64 {
    let mean = |c: f64| logits.iter().map(|s| sigmoid(c + s)).sum::<f64>() / logits.len() as f64;
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Draws a dataset with `Y(1) = 1` meaning the patient has high care needs.
/// `y` is observed for enrolled patients only.
pub fn generate_healthcare(config: &HealthcareConfig, seed: u64) -> Result<OracleSample> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let patients: Vec<Patient> = (0..config.n)
        .map(|_| {
            let [age, chronic, biomarker, judgment, noise] = [(); 5].map(|_| rng.sample::<f64, _>(StandardNormal));
            let female = (rng.random::<f64>() < 0.5) as u8 as f64;
            let minority = rng.random::<f64>() < config.minority_share;
            let need = -0.8 + 0.3 * age + 0.7 * chronic + 0.5 * biomarker + 0.9 * judgment;
            // the cost proxy under-reflects need in the minority group
            let cost = 0.6 * (0.3 * age + 0.7 * chronic + 0.5 * biomarker) - 0.5 * minority as u8 as f64
                + 0.5 * noise;
            Patient {
                x: [age, female, chronic, biomarker, cost],
                judgment,
                need,
                score: cost,
                minority,
            }
        })
        .collect();
    let selection: Vec<f64> = patients.iter().map(|p| 0.8 * p.x[4] + 1.0 * p.judgment).collect();
    let intercept = calibrate_intercept(&selection, config.enrollment_rate);
    let mut sorted: Vec<f64> = patients.iter().map(|p| p.score).collect();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[((config.n - 1) as f64 * config.threshold_quantile).round() as usize];

    let mut rows = Vec::with_capacity(config.n);
    let mut y1 = Vec::with_capacity(config.n);
    let mut t = Vec::with_capacity(config.n);
    for (p, s) in patients.iter().zip(&selection) {
        let d = rng.random::<f64>() < sigmoid(intercept + s);
        let y = rng.random::<f64>() < sigmoid(p.need);
        let act = p.score >= cut;
        let mut row = Row::new(p.x.to_vec(), d, act as u8 as f64, d.then_some(y));
        row.t = Some(act);
        row.group = Some(GROUPS[p.minority as usize ^ 1].to_string());
        rows.push(row);
        y1.push(y);
        t.push(act);
    }
    let data = ObservationalDataset::from_rows(rows)?.with_x_names(COVARIATES.map(String::from).to_vec())?;
    Ok(OracleSample {
        data,
        y1,
        t,
        clipped: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enrollment_and_threshold_match_targets() {
        let s = generate_healthcare(&HealthcareConfig::default(), 3).unwrap();
        let n = s.data.len() as f64;
        let enrolled = s.data.selected_count() as f64 / n;
        assert!((enrolled - 0.18).abs() < 0.02, "{enrolled}");
        let proposed = s.t.iter().filter(|&&t| t).count() as f64 / n;
        assert!((proposed - 0.45).abs() < 0.01, "{proposed}");
        let groups = s.data.group().unwrap();
        assert_eq!(groups.labels, GROUPS.map(String::from).to_vec());
        let minority = groups.codes.iter().filter(|&&c| c == 0).count() as f64 / n;
        assert!((minority - 0.3).abs() < 0.03, "{minority}");
    }

    #[test]
    fn generation_is_deterministic() {
        let c = HealthcareConfig {
            n: 300,
            ..Default::default()
        };
        assert_eq!(generate_healthcare(&c, 1).unwrap(), generate_healthcare(&c, 1).unwrap());
    }

    #[test]
    fn rates_must_be_proper() {
        let c = HealthcareConfig {
            enrollment_rate: 1.0,
            ..Default::default()
        };
        assert!(generate_healthcare(&c, 1).is_err());
    }
}
