//! Random valid v-statistic fixtures and the separation characterization.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::assumptions::UncertaintySet;
use crate::bounds::{baseline_interval, delta_interval, separation_bound};
use crate::error::{Error, Result};
use crate::measure::{Interval, PerformanceMeasure};
use crate::seed::{self, Stream};
use crate::vstats::VStatTable;

/// Smallest cell mass, keeping every class and action present.
const CELL_FLOOR: f64 = 0.01;
/// Share of fixtures whose `h00` collapses to a point (`α = 0`).
const POINT_SHARE: f64 = 0.1;

/// An uncertainty set together with the table it was built around.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub set: UncertaintySet,
    pub truth: VStatTable,
}

/// Draws a table uniformly from the simplex (floored away from its faces),
/// then random sub-intervals of `[0, ρ_t0]` containing the true `v₁(t,0)`.
pub fn random_fixture<R: Rng>(rng: &mut R) -> Result<Fixture> {
    let mut v = [[[0.0; 2]; 2]; 2];
    for c in v.iter_mut().flatten().flatten() {
        *c = CELL_FLOOR + rng.sample::<f64, _>(Exp1);
    }
    let total: f64 = v.iter().flatten().flatten().sum();
    for c in v.iter_mut().flatten().flatten() {
        *c /= total;
    }
    let truth = VStatTable::new(v)?;
    let identified = truth.identified();
    let around = |rng: &mut R, t: usize, point: bool| {
        let rho = truth.rho(t, 0);
        let x = truth.v(1, t, 0);
        if point {
            return Interval::point(x);
        }
        Interval {
            lo: rng.random_range(0.0..=x),
            hi: rng.random_range(x..=rho),
        }
    };
    let h10 = around(rng, 1, false);
    let point = rng.random::<f64>() < POINT_SHARE;
    let h00 = around(rng, 0, point);
    Ok(Fixture {
        set: UncertaintySet::new(identified, h10, h00)?,
        truth,
    })
}

/// `n` fixtures, the `i`-th drawn from its own derived seed.
pub fn random_fixtures(n: usize, seed: u64) -> Result<Vec<Fixture>> {
    (0..n as u64)
        .map(|i| random_fixture(&mut seed::rng(seed::derive(seed, Stream::Fixture, i))))
        .collect()
}

/// One fixture × measure line of the separation characterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub fixture: usize,
    pub measure: PerformanceMeasure,
    pub alpha: f64,
    pub bound: f64,
    pub improvement: f64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    pub baseline_lower: f64,
    pub baseline_upper: f64,
}

/// Separation bound against the measured width gap on random fixtures.
pub fn separation_characterization(
    n_fixtures: usize,
    seed: u64,
    measures: &[PerformanceMeasure],
) -> Result<Vec<SeparationRow>> {
    if n_fixtures == 0 {
        return Err(Error::InvalidArgument("need at least one fixture".into()));
    }
    let mut rows = Vec::with_capacity(n_fixtures * measures.len());
    for (i, f) in random_fixtures(n_fixtures, seed)?.iter().enumerate() {
        for m in measures {
            let delta = delta_interval(&f.set, m)?;
            let baseline = baseline_interval(&f.set, m)?;
            rows.push(SeparationRow {
                fixture: i,
                measure: *m,
                alpha: f.set.h00.width(),
                bound: separation_bound(&f.set, m)?,
                improvement: baseline.width() - delta.width(),
                delta_lower: delta.lower,
                delta_upper: delta.upper,
                baseline_lower: baseline.lower,
                baseline_upper: baseline.upper,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_contain_their_truth() {
        for f in random_fixtures(200, 1).unwrap() {
            assert!(f.set.contains(&f.truth));
        }
    }

    #[test]
    fn fixtures_are_reproducible() {
        assert_eq!(random_fixtures(5, 3).unwrap(), random_fixtures(5, 3).unwrap());
    }

    #[test]
    fn separation_holds_on_random_fixtures() {
        let rows = separation_characterization(300, 7, &PerformanceMeasure::standard_set()).unwrap();
        for r in &rows {
            assert!(r.improvement >= r.bound - 1e-9, "{r:?}");
            if r.measure == PerformanceMeasure::ppv() {
                assert!(r.improvement.abs() <= 1e-12);
            }
            if r.alpha == 0.0 {
                assert_eq!(r.bound, 0.0);
            }
        }
        assert!(rows.iter().any(|r| r.alpha == 0.0));
    }

    #[test]
    fn zero_fixtures_is_an_error() {
        assert!(separation_characterization(0, 1, &[PerformanceMeasure::accuracy()]).is_err());
    }
}
