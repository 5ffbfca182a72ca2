//! A confounded selective-labels world with oracle access to `Y(1)`.
//!
//! `X ~ N(0, I_v)` is observed, `U ~ N(0, I_u)` is not, and `V = (X, U)`.
//! A discrete instrument `Z ∈ {0, …, L−1}` is drawn from `softmax(X·W_z)` and
//! enters the status quo's logit as `β₀·Z` and the outcome logit as `β₁·Z`.
//! The status quo selects with `π₀(V,Z) = σ(V·W_π₀ + β₀Z)`, the proposed
//! policy with `π(X) = σ(X·W_π)`, and `μ₁(V,Z) = σ(V·W_μ₁ + β₁Z)`.
//!
//! In sensitivity-model mode the unselected rows draw `Y(1)` with mean
//! `min(1, Λ*·μ₁(V,Z))`, `Λ*` uniform on `lambda_star_range` per row. In
//! instrument mode every row draws `Y(1)` with mean `μ₁(V,Z)`, so the only
//! confounder is `U` and the exclusion restriction holds exactly at `β₁ = 0`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assumptions::CausalAssumption;
use crate::dataset::{ObservationalDataset, Row};
use crate::error::{Error, Result};
use crate::logistic::{sigmoid, ProbabilityModel};
use crate::measure::PerformanceMeasure;
use crate::nuisance::{LevelModels, NuisanceModels};
use crate::seed;
use crate::synthetic::quadrature::StandardNormalRule;
use crate::vstats::{delta_value, VStatTable};

const QUADRATURE_DEGREE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Msm,
    Iv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub v_dim: usize,
    pub u_dim: usize,
    pub z_levels: usize,
    pub beta0: f64,
    pub beta1: f64,
    pub mode: Mode,
    /// Nominal sensitivity parameter `Λ` of the sensitivity-model mode.
    pub lambda: f64,
    /// Range of the per-row `Λ*`; `None` means `(1/Λ, Λ)`.
    pub lambda_star_range: Option<(f64, f64)>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            v_dim: 5,
            u_dim: 2,
            z_levels: 3,
            beta0: 1.0,
            beta1: 0.0,
            mode: Mode::Msm,
            lambda: 1.4,
            lambda_star_range: None,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v_dim == 0 || self.z_levels == 0 {
            return Err(Error::InvalidArgument("v_dim and z_levels must be positive".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 1.0) {
            return Err(Error::InvalidArgument(format!("lambda must be at least 1, got {}", self.lambda)));
        }
        if let Some((lo, hi)) = self.lambda_star_range {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid lambda_star_range ({lo}, {hi})")));
            }
        }
        if !(self.beta0.is_finite() && self.beta1.is_finite()) {
            return Err(Error::InvalidArgument("beta0 and beta1 must be finite".into()));
        }
        Ok(())
    }

    pub fn lambda_star(&self) -> (f64, f64) {
        self.lambda_star_range.unwrap_or((1.0 / self.lambda, self.lambda))
    }

    /// The assumption matching this world's mode and nominal parameter.
    pub fn matched_assumption(&self) -> CausalAssumption {
        match self.mode {
            Mode::Msm => CausalAssumption::Msm { lambda: self.lambda },
            Mode::Iv => CausalAssumption::Iv { z_column: "z".into() },
        }
    }
}

/// A world: configuration plus sampled weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    pub seed: u64,
    /// Over `V = (X, U)`.
    pub w_pi0: Vec<f64>,
    /// Over `X`.
    pub w_pi: Vec<f64>,
    /// Over `V`.
    pub w_mu1: Vec<f64>,
    /// `v_dim × z_levels`, row-major.
    pub w_z: Vec<f64>,
}

fn uniform_weights(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let scale = 1.0 / (len.max(1) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-1.0..1.0) * scale).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SyntheticWorld {
    /// Draws weights i.i.d. `Uniform(−1, 1) / √(input dimension)`.
    pub fn sample(config: WorldConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let (v, u) = (config.v_dim, config.u_dim);
        let w_pi0 = uniform_weights(&mut rng, v + u);
        let w_pi = uniform_weights(&mut rng, v);
        let w_mu1 = uniform_weights(&mut rng, v + u);
        let mut w_z = uniform_weights(&mut rng, v * config.z_levels);
        // the scale belongs to the v inputs of each softmax column
        let fix = ((v * config.z_levels) as f64).sqrt() / (v as f64).sqrt();
        w_z.iter_mut().for_each(|w| *w *= fix);
        Ok(SyntheticWorld {
            config,
            seed,
            w_pi0,
            w_pi,
            w_mu1,
            w_z,
        })
    }

    fn v_dim(&self) -> usize {
        self.config.v_dim
    }

    /// `p(Z = z | X = x)` for every level.
    pub fn instrument_probs(&self, x: &[f64]) -> Vec<f64> {
        let levels = self.config.z_levels;
        let logits: Vec<f64> = (0..levels)
            .map(|l| (0..self.v_dim()).map(|j| x[j] * self.w_z[j * levels + l]).sum())
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / total).collect()
    }

    /// `π(x)`, the proposed policy.
    pub fn proposed(&self, x: &[f64]) -> f64 {
        sigmoid(dot(x, &self.w_pi))
    }

    /// `E_{Λ*}[min(1, Λ*·μ)]`, the unselected rows' outcome mean.
    pub fn unselected_mean(&self, mu1: f64) -> f64 {
        if self.config.mode == Mode::Iv {
            return mu1;
        }
        let (a, b) = self.config.lambda_star();
        if b - a < 1e-15 {
            return (a * mu1).min(1.0);
        }
        let cut = if mu1 > 0.0 { 1.0 / mu1 } else { f64::INFINITY };
        if b <= cut {
            mu1 * (a + b) / 2.0
        } else if a >= cut {
            1.0
        } else {
            (mu1 * (cut * cut - a * a) / 2.0 + (b - cut)) / (b - a)
        }
    }

    /// Per-level truths at `x`, integrating `U` out by quadrature.
    pub fn conditional(&self, x: &[f64], rule: &StandardNormalRule) -> Vec<LevelTruth> {
        let v = self.v_dim();
        let base0 = dot(x, &self.w_pi0[..v]);
        let base1 = dot(x, &self.w_mu1[..v]);
        let (a, b) = (&self.w_pi0[v..], &self.w_mu1[v..]);
        let cov = [dot(a, a), dot(a, b), dot(b, b)];
        let degenerate = cov.iter().all(|c| *c == 0.0);
        self.instrument_probs(x)
            .into_iter()
            .enumerate()
            .map(|(z, pz)| {
                let l0 = base0 + self.config.beta0 * z as f64;
                let l1 = base1 + self.config.beta1 * z as f64;
                let moments = |s1: f64, s2: f64| {
                    let p0 = sigmoid(l0 + s1);
                    let m1 = sigmoid(l1 + s2);
                    [p0, p0 * m1, (1.0 - p0) * self.unselected_mean(m1)]
                };
                let [e1, joint1, joint0] = if degenerate {
                    moments(0.0, 0.0)
                } else {
                    let mut out = [0.0; 3];
                    for (k, slot) in out.iter_mut().enumerate() {
                        *slot = rule.expect_bivariate(cov, |s1, s2| moments(s1, s2)[k]);
                    }
                    out
                };
                LevelTruth {
                    pz,
                    e1,
                    joint1,
                    joint0,
                }
            })
            .collect()
    }
}

/// Truths for one instrument level at one `x`: `p(z|x)`, `p(D=1|x,z)`,
/// `p(D=1, Y(1)=1|x,z)` and `p(D=0, Y(1)=1|x,z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelTruth {
    pub pz: f64,
    pub e1: f64,
    pub joint1: f64,
    pub joint0: f64,
}

/// Marginal truths at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub e1: f64,
    pub mu1: f64,
    pub mu0: f64,
}

pub fn marginal_truth(levels: &[LevelTruth]) -> Truth {
    let e1: f64 = levels.iter().map(|l| l.pz * l.e1).sum();
    let j1: f64 = levels.iter().map(|l| l.pz * l.joint1).sum();
    let j0: f64 = levels.iter().map(|l| l.pz * l.joint0).sum();
    Truth {
        e1,
        mu1: if e1 > 0.0 { j1 / e1 } else { 0.0 },
        mu0: if e1 < 1.0 { j0 / (1.0 - e1) } else { 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    E1,
    Mu1,
    Mu0,
    E1At(usize),
    Mu1At(usize),
}

/// A true nuisance function of a world, computed by quadrature.
#[derive(Debug, Clone)]
pub struct TrueModel {
    world: Arc<SyntheticWorld>,
    rule: Arc<StandardNormalRule>,
    target: Target,
}

impl ProbabilityModel for TrueModel {
    fn predict_raw(&self, x: &[f64]) -> f64 {
        let levels = self.world.conditional(x, &self.rule);
        match self.target {
            Target::E1 => marginal_truth(&levels).e1,
            Target::Mu1 => marginal_truth(&levels).mu1,
            Target::Mu0 => marginal_truth(&levels).mu0,
            Target::E1At(z) => levels[z].e1,
            Target::Mu1At(z) => {
                let l = levels[z];
                if l.e1 > 0.0 {
                    l.joint1 / l.e1
                } else {
                    0.0
                }
            }
        }
    }
}

impl SyntheticWorld {
    fn true_model(self: &Arc<Self>, rule: &Arc<StandardNormalRule>, target: Target) -> Arc<TrueModel> {
        Arc::new(TrueModel {
            world: self.clone(),
            rule: rule.clone(),
            target,
        })
    }

    /// The exact nuisance functions, with per-level models for every
    /// instrument level.
    pub fn true_nuisances(self: &Arc<Self>) -> NuisanceModels {
        let rule = Arc::new(StandardNormalRule::new(QUADRATURE_DEGREE));
        let mut models = NuisanceModels::from_models(
            self.true_model(&rule, Target::E1),
            self.true_model(&rule, Target::Mu1),
        );
        models.per_level = Some(
            (0..self.config.z_levels)
                .map(|z| LevelModels {
                    level: z as u32,
                    label: level_label(z),
                    e1: self.true_model(&rule, Target::E1At(z)),
                    mu1: self.true_model(&rule, Target::Mu1At(z)),
                })
                .collect(),
        );
        models
    }

    /// `E[Y(1) | D = 0, X = x]`.
    pub fn true_mu0(self: &Arc<Self>) -> Arc<dyn ProbabilityModel> {
        let rule = Arc::new(StandardNormalRule::new(QUADRATURE_DEGREE));
        self.true_model(&rule, Target::Mu0)
    }
}

/// Instrument labels sort in level order for up to 1000 levels.
pub fn level_label(z: usize) -> String {
    format!("z{z:03}")
}

/// An observational sample together with every row's `Y(1)` and realized
/// proposed action.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub data: ObservationalDataset,
    pub y1: Vec<bool>,
    pub t: Vec<bool>,
    /// Rows whose `Λ*·μ₁` exceeded one and was clipped.
    pub clipped: usize,
}

impl OracleSample {
    /// The empirical table of `(Y(1), T, D)` frequencies.
    pub fn oracle_table(&self) -> Result<VStatTable> {
        let n = self.y1.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut v = [[[0.0; 2]; 2]; 2];
        for i in 0..n {
            v[self.y1[i] as usize][self.t[i] as usize][self.data.d(i) as usize] += 1.0;
        }
        for c in v.iter_mut().flatten().flatten() {
            *c /= n as f64;
        }
        VStatTable::new(v)
    }
}

/// Draws `n` rows; deterministic given `seed`.
pub fn generate(world: &SyntheticWorld, n: usize, seed: u64) -> Result<OracleSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot generate an empty sample".into()));
    }
    let mut rng = seed::rng(seed);
    let c = &world.config;
    let (lam_lo, lam_hi) = c.lambda_star();
    let mut rows = Vec::with_capacity(n);
    let mut y1s = Vec::with_capacity(n);
    let mut ts = Vec::with_capacity(n);
    let mut clipped = 0;
    let mut v = vec![0.0; c.v_dim + c.u_dim];
    for _ in 0..n {
        for slot in v.iter_mut() {
            *slot = rng.sample(StandardNormal);
        }
        let x = &v[..c.v_dim];
        let probs = world.instrument_probs(x);
        let draw: f64 = rng.random();
        let mut z = c.z_levels - 1;
        let mut acc = 0.0;
        for (l, p) in probs.iter().enumerate() {
            acc += p;
            if draw < acc {
                z = l;
                break;
            }
        }
        let zf = z as f64;
        let d = rng.random::<f64>() < sigmoid(dot(&v, &world.w_pi0) + c.beta0 * zf);
        let pi1 = world.proposed(x);
        let t = rng.random::<f64>() < pi1;
        let mu1 = sigmoid(dot(&v, &world.w_mu1) + c.beta1 * zf);
        let mean = if d || c.mode == Mode::Iv {
            mu1
        } else {
            let lambda_star = if lam_hi > lam_lo {
                rng.random_range(lam_lo..lam_hi)
            } else {
                lam_lo
            };
            let m = lambda_star * mu1;
            if m > 1.0 {
                clipped += 1;
            }
            m.min(1.0)
        };
        let y1 = rng.random::<f64>() < mean;
        let mut row = Row::new(x.to_vec(), d, pi1, d.then_some(y1));
        row.t = Some(t);
        row.z = Some(level_label(z));
        rows.push(row);
        y1s.push(y1);
        ts.push(t);
    }
    let data = ObservationalDataset::from_rows(rows)?;
    Ok(OracleSample {
        data,
        y1: y1s,
        t: ts,
        clipped,
    })
}

/// `δ_m` on the oracle table built from `(T, D, Y(1))`.
pub fn oracle_regret(sample: &OracleSample, m: &PerformanceMeasure) -> Result<f64> {
    delta_value(&sample.oracle_table()?, m)
}

/// Population v-statistics by Monte Carlo over `X` with quadrature over `U`.
pub fn population_table(world: &SyntheticWorld, n_mc: usize, seed: u64) -> Result<VStatTable> {
    let rule = StandardNormalRule::new(QUADRATURE_DEGREE);
    let mut rng = seed::rng(seed);
    let mut v = [[[0.0; 2]; 2]; 2];
    let mut x = vec![0.0; world.config.v_dim];
    for _ in 0..n_mc {
        for slot in x.iter_mut() {
            *slot = rng.sample(StandardNormal);
        }
        let truth = marginal_truth(&world.conditional(&x, &rule));
        let p = world.proposed(&x);
        let (j1, j0) = (truth.e1 * truth.mu1, (1.0 - truth.e1) * truth.mu0);
        for (t, pt) in [(0, 1.0 - p), (1, p)] {
            v[1][t][1] += pt * j1;
            v[0][t][1] += pt * (truth.e1 - j1);
            v[1][t][0] += pt * j0;
            v[0][t][0] += pt * (1.0 - truth.e1 - j0);
        }
    }
    for c in v.iter_mut().flatten().flatten() {
        *c /= n_mc as f64;
    }
    VStatTable::new(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(config: WorldConfig) -> SyntheticWorld {
        SyntheticWorld::sample(config, 17).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        let w = world(WorldConfig::default());
        assert_eq!(generate(&w, 500, 3).unwrap(), generate(&w, 500, 3).unwrap());
        assert_ne!(generate(&w, 500, 3).unwrap().y1, generate(&w, 500, 4).unwrap().y1);
    }

    #[test]
    fn observed_outcomes_are_potential_outcomes() {
        let s = generate(&world(WorldConfig::default()), 2000, 1).unwrap();
        for i in 0..s.data.len() {
            if s.data.d(i) {
                assert_eq!(s.data.y(i), Some(s.y1[i]));
            } else {
                assert_eq!(s.data.y(i), None);
            }
        }
    }

    #[test]
    fn identical_policies_have_zero_oracle_regret() {
        let mut s = generate(&world(WorldConfig::default()), 1000, 2).unwrap();
        s.t = (0..s.data.len()).map(|i| s.data.d(i)).collect();
        for m in PerformanceMeasure::standard_set() {
            assert_eq!(oracle_regret(&s, &m).unwrap(), 0.0, "{m}");
        }
    }

    #[test]
    fn oracle_accuracy_regret_is_bounded() {
        let s = generate(&world(WorldConfig::default()), 1000, 5).unwrap();
        let r = oracle_regret(&s, &PerformanceMeasure::accuracy()).unwrap();
        assert!((-1.0..=1.0).contains(&r));
    }

    #[test]
    fn unit_lambda_equalizes_outcome_means() {
        let w = world(WorldConfig {
            lambda: 1.0,
            ..Default::default()
        });
        assert_eq!(w.unselected_mean(0.37), 0.37);
        let s = generate(&w, 100, 1).unwrap();
        assert_eq!(s.clipped, 0);
    }

    #[test]
    fn clipped_mean_matches_monte_carlo() {
        let w = world(WorldConfig::default());
        let mu = 0.8;
        let mut rng = seed::rng(9);
        let (a, b) = w.config.lambda_star();
        let mc: f64 = (0..200_000).map(|_| (rng.random_range(a..b) * mu).min(1.0)).sum::<f64>() / 200_000.0;
        assert!((w.unselected_mean(mu) - mc).abs() < 2e-3);
    }

    #[test]
    fn irrelevant_instrument_leaves_selection_unchanged() {
        let w = world(WorldConfig {
            mode: Mode::Iv,
            beta0: 0.0,
            ..Default::default()
        });
        let rule = StandardNormalRule::new(8);
        let levels = w.conditional(&[0.3, -0.2, 0.1, 0.5, -1.0], &rule);
        assert!(levels.windows(2).all(|p| (p[0].e1 - p[1].e1).abs() < 1e-15));
    }

    #[test]
    fn quadrature_truth_matches_simulation() {
        let w = world(WorldConfig::default());
        let s = generate(&w, 200_000, 8).unwrap();
        let pop = population_table(&w, 20_000, 4).unwrap();
        let oracle = s.oracle_table().unwrap();
        for y in 0..2 {
            for t in 0..2 {
                for d in 0..2 {
                    assert!((pop.v(y, t, d) - oracle.v(y, t, d)).abs() < 0.01, "v_{y}({t},{d})");
                }
            }
        }
    }

    #[test]
    fn clipping_is_rare_at_default_scales() {
        let s = generate(&world(WorldConfig::default()), 20_000, 6).unwrap();
        let unselected = (0..s.data.len()).filter(|&i| !s.data.d(i)).count();
        assert!((s.clipped as f64) < 0.05 * unselected as f64);
    }
}
