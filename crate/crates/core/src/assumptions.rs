//! Causal assumptions, the pointwise bounds they imply on the unobserved
//! outcome regression `μ₀(x) = E[Y(1) | D = 0, X = x]`, and the induced
//! uncertainty set over the partially identified v-statistics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::ObservationalDataset;
use crate::error::{Error, Result};
use crate::logistic::{ProbabilityModel, PROBABILITY_FLOOR};
use crate::measure::Interval;
use crate::nuisance::{LevelModels, NuisanceModels, ProximalFrequencies, SharedModel};
use crate::vstats::{IdentifiedVStats, VStatTable};

/// Tolerated share of evaluation points where the bounds cross.
pub const MAX_CROSSING_SHARE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CausalAssumption {
    /// No assumption: `μ₀ ∈ [0, 1]`.
    Manski,
    /// Marginal sensitivity model: `Λ⁻¹μ₁ ≤ μ₀ ≤ Λμ₁`.
    Msm { lambda: f64 },
    /// Rosenbaum's Γ, relaxed to the marginal sensitivity model with `Λ = Γ`.
    Rosenbaum { gamma: f64 },
    /// A discrete instrument satisfying the exclusion restriction.
    Iv { z_column: String },
    /// A treatment-confounding proxy.
    #[serde(rename = "proximal_t")]
    ProximalTreatment { z_column: String },
    /// Treatment- and outcome-confounding proxies.
    #[serde(rename = "proximal_tw")]
    ProximalTreatmentOutcome { z_column: String, w_column: String },
}

impl CausalAssumption {
    /// Checks parameters and that referenced columns were loaded.
    pub fn validate(&self, data: &ObservationalDataset) -> Result<()> {
        self.validate_parameters()?;
        let missing = |c: &str| Error::MissingColumn(c.to_string());
        match self {
            CausalAssumption::Iv { z_column } | CausalAssumption::ProximalTreatment { z_column } => {
                data.z().ok_or_else(|| missing(z_column))?;
            }
            CausalAssumption::ProximalTreatmentOutcome { z_column, w_column } => {
                data.z().ok_or_else(|| missing(z_column))?;
                data.w().ok_or_else(|| missing(w_column))?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn validate_parameters(&self) -> Result<()> {
        let (name, v) = match self {
            CausalAssumption::Msm { lambda } => ("lambda", *lambda),
            CausalAssumption::Rosenbaum { gamma } => ("gamma", *gamma),
            _ => return Ok(()),
        };
        if !(v.is_finite() && v >= 1.0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1, got {v}")));
        }
        Ok(())
    }

    /// The sensitivity parameter of the marginal sensitivity relaxation.
    pub fn msm_lambda(&self) -> Option<f64> {
        match self {
            CausalAssumption::Msm { lambda } => Some(*lambda),
            CausalAssumption::Rosenbaum { gamma } => Some(*gamma),
            _ => None,
        }
    }

    /// The same assumption family at a different sensitivity parameter.
    pub fn with_lambda(&self, lambda: f64) -> Option<Self> {
        match self {
            CausalAssumption::Msm { .. } => Some(CausalAssumption::Msm { lambda }),
            CausalAssumption::Rosenbaum { .. } => Some(CausalAssumption::Rosenbaum { gamma: lambda }),
            _ => None,
        }
    }
}

impl fmt::Display for CausalAssumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CausalAssumption::Manski => write!(f, "manski"),
            CausalAssumption::Msm { lambda } => write!(f, "msm(lambda={lambda})"),
            CausalAssumption::Rosenbaum { gamma } => write!(f, "rosenbaum(gamma={gamma})"),
            CausalAssumption::Iv { z_column } => write!(f, "iv(z={z_column})"),
            CausalAssumption::ProximalTreatment { z_column } => write!(f, "proximal_t(z={z_column})"),
            CausalAssumption::ProximalTreatmentOutcome { z_column, w_column } => {
                write!(f, "proximal_tw(z={z_column}, w={w_column})")
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Tau {
    Manski,
    Msm { lambda: f64, mu1: SharedModel },
    Iv { e1: SharedModel, mu1: SharedModel, levels: Vec<LevelModels> },
    ProximalTreatment { levels: Vec<LevelModels> },
    ProximalTreatmentOutcome { mu1: SharedModel, freqs: ProximalFrequencies },
}

/// Pointwise bounds `τ̲(x) ≤ μ₀(x) ≤ τ̄(x)`.
#[derive(Debug, Clone)]
pub struct BoundingFunctions {
    tau: Tau,
}

/// Bounding functions evaluated on a dataset, crossings already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct TauValues {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub crossings: usize,
}

pub fn bounding_functions(
    assumption: &CausalAssumption,
    nuisances: &NuisanceModels,
    data: &ObservationalDataset,
) -> Result<BoundingFunctions> {
    assumption.validate(data)?;
    let levels = || {
        nuisances
            .per_level
            .clone()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::InvalidArgument(format!("{assumption} needs per-level nuisance models")))
    };
    let tau = match assumption {
        CausalAssumption::Manski => Tau::Manski,
        CausalAssumption::Msm { .. } | CausalAssumption::Rosenbaum { .. } => Tau::Msm {
            lambda: assumption.msm_lambda().expect("sensitivity model"),
            mu1: nuisances.mu1.clone(),
        },
        CausalAssumption::Iv { .. } => Tau::Iv {
            e1: nuisances.e1.clone(),
            mu1: nuisances.mu1.clone(),
            levels: levels()?,
        },
        CausalAssumption::ProximalTreatment { .. } => Tau::ProximalTreatment { levels: levels()? },
        CausalAssumption::ProximalTreatmentOutcome { .. } => Tau::ProximalTreatmentOutcome {
            mu1: nuisances.mu1.clone(),
            freqs: nuisances.proximal.clone().ok_or_else(|| {
                Error::InvalidArgument(format!("{assumption} needs proxy frequency tables"))
            })?,
        },
    };
    Ok(BoundingFunctions { tau })
}

impl BoundingFunctions {
    /// `(τ̲(x), τ̄(x))` clipped into `[0, 1]`; the pair may be crossed.
    pub fn at(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (lo, hi) = match &self.tau {
            Tau::Manski => (0.0, 1.0),
            Tau::Msm { lambda, mu1 } => {
                let m = mu1.predict(x);
                (m / lambda, lambda * m)
            }
            Tau::Iv { e1, mu1, levels } => {
                let e0 = 1.0 - e1.predict_raw(x);
                if e0 < PROBABILITY_FLOOR {
                    return Err(Error::Positivity {
                        value: e0,
                        floor: PROBABILITY_FLOOR,
                    });
                }
                let observed = mu1.predict(x) * e1.predict(x);
                let (mut floor, mut ceil) = (f64::NEG_INFINITY, f64::INFINITY);
                for l in levels {
                    let e1z = l.e1.predict(x);
                    let joint = l.mu1.predict(x) * e1z;
                    floor = floor.max(joint);
                    ceil = ceil.min(1.0 - e1z + joint);
                }
                ((floor - observed) / e0, (ceil - observed) / e0)
            }
            Tau::ProximalTreatment { levels } => levels.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), l| {
                    let m = l.mu1.predict(x);
                    (lo.min(m), hi.max(m))
                },
            ),
            Tau::ProximalTreatmentOutcome { mu1, freqs } => {
                let m = mu1.predict(x);
                let s = freqs.stratum(m);
                (m * freqs.ratio_lo[s], m * freqs.ratio_hi[s])
            }
        };
        Ok((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
    }

    /// Evaluates on every row, swapping crossed pairs; fails when more than
    /// 1% of rows cross.
    pub fn evaluate(&self, data: &ObservationalDataset) -> Result<TauValues> {
        self.evaluate_with_tolerance(data, MAX_CROSSING_SHARE)
    }

    /// As [`evaluate`](Self::evaluate), failing only when more than
    /// `max_crossing_share` of rows cross.
    pub fn evaluate_with_tolerance(&self, data: &ObservationalDataset, max_crossing_share: f64) -> Result<TauValues> {
        let n = data.len();
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        let mut crossings = 0;
        for i in 0..n {
            let (a, b) = self.at(data.x(i))?;
            if a > b {
                crossings += 1;
                lo.push(b);
                hi.push(a);
            } else {
                lo.push(a);
                hi.push(b);
            }
        }
        if crossings as f64 > max_crossing_share * n as f64 {
            return Err(Error::TooManyCrossings {
                crossings,
                evaluated: n,
            });
        }
        if crossings > 0 {
            log::warn!("bounding functions crossed on {crossings} of {n} rows; swapped");
        }
        Ok(TauValues { lo, hi, crossings })
    }
}

/// The box `h10 × h00` of admissible `(v₁(1,0), v₁(0,0))`, together with the
/// identified statistics; `v₀(t,0) = ρ_t0 − v₁(t,0)` throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    pub h10: Interval,
    pub h00: Interval,
    pub identified: IdentifiedVStats,
}

impl UncertaintySet {
    /// Validates `0 ≤ lo ≤ hi ≤ ρ_t0`, absorbing rounding-level overshoot.
    pub fn new(identified: IdentifiedVStats, h10: Interval, h00: Interval) -> Result<Self> {
        let fit = |h: Interval, rho: f64, name: &str| -> Result<Interval> {
            let tol = 1e-9;
            if !(h.lo <= h.hi) || h.lo < -tol || h.hi > rho + tol {
                return Err(Error::InvalidArgument(format!(
                    "{name} = [{}, {}] is not inside [0, {rho}]",
                    h.lo, h.hi
                )));
            }
            Ok(h.clamp_into(0.0, rho))
        };
        Ok(UncertaintySet {
            h10: fit(h10, identified.rho(1, 0), "h10")?,
            h00: fit(h00, identified.rho(0, 0), "h00")?,
            identified,
        })
    }

    pub fn rho10(&self) -> f64 {
        self.identified.rho(1, 0)
    }

    pub fn rho00(&self) -> f64 {
        self.identified.rho(0, 0)
    }

    /// Interval for `v₁(t, 0)`.
    pub fn h(&self, t: usize) -> Interval {
        if t == 1 {
            self.h10
        } else {
            self.h00
        }
    }

    /// Interval for `v_y(t, 0)`.
    pub fn interval(&self, y: usize, t: usize) -> Interval {
        let h = self.h(t);
        if y == 1 {
            h
        } else {
            let rho = self.identified.rho(t, 0);
            Interval {
                lo: (rho - h.hi).max(0.0),
                hi: (rho - h.lo).max(0.0),
            }
        }
    }

    /// The full table at `v₁(1,0) = v10`, `v₁(0,0) = v00`.
    pub fn table_at(&self, v10: f64, v00: f64) -> Result<VStatTable> {
        VStatTable::complete(&self.identified, v10, v00)
    }

    pub fn contains(&self, v: &VStatTable) -> bool {
        let tol = 1e-12;
        let id = v.identified();
        let same = id
            .v1
            .iter()
            .flatten()
            .chain(id.rho.iter().flatten())
            .zip(self.identified.v1.iter().flatten().chain(self.identified.rho.iter().flatten()))
            .all(|(a, b)| (a - b).abs() <= tol);
        let inside = |h: Interval, x: f64| h.lo - tol <= x && x <= h.hi + tol;
        same && inside(self.h10, v.v(1, 1, 0)) && inside(self.h00, v.v(1, 0, 0))
    }

    /// Lebesgue measure of the box.
    pub fn size(&self) -> f64 {
        set_size(self)
    }
}

pub fn set_size(set: &UncertaintySet) -> f64 {
    set.h10.width() * set.h00.width()
}

/// Plug-in bounds `mean π_t(xᵢ)·ê₀(xᵢ)·τ(xᵢ)` over the fold, clamped into
/// `[0, ρ̂_t0]`.
pub fn map_to_uncertainty_set(
    tau: &BoundingFunctions,
    e1_model: &dyn ProbabilityModel,
    data_fold: &ObservationalDataset,
    identified: &IdentifiedVStats,
) -> Result<UncertaintySet> {
    if data_fold.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let values = tau.evaluate(data_fold)?;
    let e0: Vec<f64> = (0..data_fold.len())
        .map(|i| 1.0 - e1_model.predict(data_fold.x(i)))
        .collect();
    uncertainty_set_from_values(&values, &e0, data_fold, identified)
}

/// The set implied by already evaluated `τ` and `ê₀` on each fold row.
pub fn uncertainty_set_from_values(
    values: &TauValues,
    e0: &[f64],
    data_fold: &ObservationalDataset,
    identified: &IdentifiedVStats,
) -> Result<UncertaintySet> {
    let n = data_fold.len() as f64;
    let mut sums = [[0.0; 2]; 2];
    for i in 0..data_fold.len() {
        for t in 0..2 {
            let w = data_fold.pi_t(i, t) * e0[i];
            sums[t][0] += w * values.lo[i];
            sums[t][1] += w * values.hi[i];
        }
    }
    let h = |t: usize| {
        let rho = identified.rho(t, 0);
        Interval {
            lo: (sums[t][0] / n).clamp(0.0, rho),
            hi: (sums[t][1] / n).clamp(0.0, rho),
        }
    };
    UncertaintySet::new(*identified, h(1), h(0))
}
