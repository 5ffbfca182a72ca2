//! Property tests of the closed-form intervals on randomly drawn valid
//! v-statistic tables and uncertainty boxes.

use policy_regret::measure::{Interval, PerformanceMeasure, UtilityMatrix};
use policy_regret::synthetic::random_fixtures;
use policy_regret::{baseline_interval, delta_interval, delta_value, separation_bound, UncertaintySet, VStatTable};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

/// A valid table, two sub-intervals of `[0, ρ_t0]` around its truth, and
/// where inside the box a second table sits.
#[derive(Debug, Clone)]
struct Case {
    truth: VStatTable,
    set: UncertaintySet,
    inner: (f64, f64),
}

fn case() -> impl Strategy<Value = Case> {
    (
        prop::array::uniform8(0.01f64..1.0),
        prop::array::uniform4(0.0f64..=1.0),
        (0.0f64..=1.0, 0.0f64..=1.0),
    )
        .prop_map(|(cells, cuts, inner)| {
            let total: f64 = cells.iter().sum();
            let mut v = [[[0.0; 2]; 2]; 2];
            for (k, c) in cells.iter().enumerate() {
                v[k / 4][(k / 2) % 2][k % 2] = c / total;
            }
            let truth = VStatTable::new(v).unwrap();
            let around = |t: usize, a: f64, b: f64| {
                let x = truth.v(1, t, 0);
                let rho = truth.rho(t, 0);
                Interval { lo: a * x, hi: x + b * (rho - x) }
            };
            let set = UncertaintySet::new(truth.identified(), around(1, cuts[0], cuts[1]), around(0, cuts[2], cuts[3]))
                .unwrap();
            let inner = (
                set.h10.lo + inner.0 * set.h10.width(),
                set.h00.lo + inner.1 * set.h00.width(),
            );
            Case { truth, set, inner }
        })
}

fn measure() -> impl Strategy<Value = PerformanceMeasure> {
    prop_oneof![
        Just(PerformanceMeasure::accuracy()),
        Just(PerformanceMeasure::tpr()),
        Just(PerformanceMeasure::fpr()),
        Just(PerformanceMeasure::ppv()),
        Just(PerformanceMeasure::npv()),
        prop::array::uniform4(0.0f64..2.0).prop_map(|u| {
            PerformanceMeasure::Utility(UtilityMatrix::new([[u[0], u[1]], [u[2], u[3]]]).unwrap())
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn delta_interval_nests_in_baseline(c in case(), m in measure()) {
        let delta = delta_interval(&c.set, &m).unwrap();
        let baseline = baseline_interval(&c.set, &m).unwrap();
        prop_assert!(delta.lower >= baseline.lower - TOL, "{delta:?} vs {baseline:?}");
        prop_assert!(delta.upper <= baseline.upper + TOL, "{delta:?} vs {baseline:?}");
    }

    #[test]
    fn every_table_in_the_box_lies_in_the_delta_interval(c in case(), m in measure()) {
        let delta = delta_interval(&c.set, &m).unwrap();
        prop_assert!(c.set.contains(&c.truth));
        for table in [c.truth, c.set.table_at(c.inner.0, c.inner.1).unwrap()] {
            let value = delta_value(&table, &m).unwrap();
            prop_assert!(delta.lower - TOL <= value && value <= delta.upper + TOL, "{value} outside {delta:?}");
        }
    }

    #[test]
    fn delta_endpoints_are_attained(c in case(), m in measure()) {
        // every measure is monotone in each coordinate, so the extremes sit
        // at corners of the box
        let delta = delta_interval(&c.set, &m).unwrap();
        let corners: Vec<f64> = [c.set.h10.lo, c.set.h10.hi]
            .iter()
            .flat_map(|&x| [c.set.h00.lo, c.set.h00.hi].map(|w| (x, w)))
            .map(|(x, w)| delta_value(&c.set.table_at(x, w).unwrap(), &m).unwrap())
            .collect();
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((delta.lower - lo).abs() <= 1e-9, "{} vs {lo}", delta.lower);
        prop_assert!((delta.upper - hi).abs() <= 1e-9, "{} vs {hi}", delta.upper);
    }

    #[test]
    fn separation_bound_is_respected(c in case(), m in measure()) {
        let delta = delta_interval(&c.set, &m).unwrap();
        let baseline = baseline_interval(&c.set, &m).unwrap();
        let bound = separation_bound(&c.set, &m).unwrap();
        prop_assert!(bound >= 0.0);
        prop_assert!(baseline.width() - delta.width() >= bound - TOL);
    }

    #[test]
    fn fixtures_are_a_function_of_their_seed(seed in any::<u64>()) {
        prop_assert_eq!(random_fixtures(3, seed).unwrap(), random_fixtures(3, seed).unwrap());
    }
}

#[test]
fn a_point_box_gives_a_point_delta_interval() {
    for f in random_fixtures(50, 11).unwrap() {
        let x = f.truth.v(1, 1, 0);
        let w = f.truth.v(1, 0, 0);
        let set = UncertaintySet::new(f.truth.identified(), Interval::point(x), Interval::point(w)).unwrap();
        for m in PerformanceMeasure::standard_set() {
            let delta = delta_interval(&set, &m).unwrap();
            let truth = delta_value(&f.truth, &m).unwrap();
            assert!((delta.lower - truth).abs() < 1e-12 && (delta.upper - truth).abs() < 1e-12);
        }
    }
}
