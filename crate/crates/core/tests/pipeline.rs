//! End-to-end runs on synthetic data: CSV round trips, cross-fitted
//! estimation, and the ordering of intervals across assumptions.

use approx::assert_abs_diff_eq;
use policy_regret::synthetic::{generate, generate_healthcare, HealthcareConfig, Mode, SyntheticWorld, WorldConfig};
use policy_regret::{
    cross_fit_regret, estimate_regret, load_dataset, subgroup_report, CausalAssumption, EstimationConfig, Method,
    ObservationalDataset, PerformanceMeasure, RegretReport, Schema,
};

fn sample(config: WorldConfig, n: usize, seed: u64) -> ObservationalDataset {
    let world = SyntheticWorld::sample(config, seed).unwrap();
    generate(&world, n, seed + 1).unwrap().data
}

fn quick() -> EstimationConfig {
    EstimationConfig {
        bootstrap_b: 0,
        seed: 3,
        ..Default::default()
    }
}

fn delta(report: &RegretReport, measure: &PerformanceMeasure) -> (f64, f64) {
    let r = report
        .intervals
        .iter()
        .find(|r| r.measure == *measure && r.method == Method::Delta)
        .unwrap();
    (r.lower, r.upper)
}

#[test]
fn csv_round_trip_preserves_every_row() {
    let data = sample(
        WorldConfig {
            mode: Mode::Iv,
            ..Default::default()
        },
        400,
        1,
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    data.save_csv(&path).unwrap();
    let schema = Schema {
        z: Some("z".into()),
        ..Default::default()
    };
    let back = load_dataset(&path, &schema).unwrap();
    assert_eq!(back.len(), data.len());
    assert!(data.rows().eq(back.rows()));
}

#[test]
fn intervals_widen_as_the_assumption_weakens() {
    let data = sample(WorldConfig::default(), 4_000, 2);
    let measures = PerformanceMeasure::standard_set();
    let run = |a: CausalAssumption| cross_fit_regret(&data, &measures, &a, &quick()).unwrap();
    let point = run(CausalAssumption::Msm { lambda: 1.0 });
    let msm = run(CausalAssumption::Msm { lambda: 1.4 });
    let manski = run(CausalAssumption::Manski);
    for m in &measures {
        let (p, s, w) = (delta(&point, m), delta(&msm, m), delta(&manski, m));
        assert_abs_diff_eq!(p.0, p.1, epsilon = 1e-12);
        assert!(w.0 <= s.0 + 1e-12 && s.0 <= p.0 + 1e-12, "{m:?}: {w:?} {s:?} {p:?}");
        assert!(p.1 <= s.1 + 1e-12 && s.1 <= w.1 + 1e-12, "{m:?}: {w:?} {s:?} {p:?}");
    }
}

#[test]
fn delta_intervals_nest_in_baseline_intervals() {
    let data = sample(WorldConfig::default(), 3_000, 4);
    let report = cross_fit_regret(
        &data,
        &PerformanceMeasure::standard_set(),
        &CausalAssumption::Msm { lambda: 1.4 },
        &quick(),
    )
    .unwrap();
    for pair in report.intervals.chunks(2) {
        let (d, b) = (&pair[0], &pair[1]);
        assert_eq!((d.method, b.method), (Method::Delta, Method::Baseline));
        assert!(b.lower <= d.lower + 1e-12 && d.upper <= b.upper + 1e-12, "{d:?} {b:?}");
    }
}

#[test]
fn instrument_bounds_refine_the_no_assumption_bounds() {
    let data = sample(
        WorldConfig {
            mode: Mode::Iv,
            beta0: 0.5,
            ..Default::default()
        },
        6_000,
        5,
    );
    let measures = [PerformanceMeasure::accuracy(), PerformanceMeasure::tpr()];
    let iv = cross_fit_regret(&data, &measures, &CausalAssumption::Iv { z_column: "z".into() }, &quick()).unwrap();
    let manski = cross_fit_regret(&data, &measures, &CausalAssumption::Manski, &quick()).unwrap();
    for (a, b) in iv.intervals.iter().zip(&manski.intervals) {
        assert!(a.upper - a.lower <= b.upper - b.lower + 1e-12, "{a:?} wider than {b:?}");
    }
}

#[test]
fn estimation_is_reproducible_with_bootstrap() {
    let data = sample(WorldConfig::default(), 1_500, 6);
    let config = EstimationConfig {
        bootstrap_b: 10,
        ..quick()
    };
    let measures = [PerformanceMeasure::accuracy()];
    let a = estimate_regret(&data, &measures, &CausalAssumption::Msm { lambda: 1.2 }, &config).unwrap();
    let b = estimate_regret(&data, &measures, &CausalAssumption::Msm { lambda: 1.2 }, &config).unwrap();
    assert_eq!(a, b);
    assert!(a.intervals.iter().all(|r| r.ci_lower.is_some() && r.ci_upper.is_some()));
}

#[test]
fn subgroup_reports_cover_every_group() {
    let data = generate_healthcare(
        &HealthcareConfig {
            n: 3_000,
            ..Default::default()
        },
        7,
    )
    .unwrap()
    .data;
    let report = subgroup_report(
        &data,
        &[PerformanceMeasure::accuracy()],
        &CausalAssumption::Msm { lambda: 1.2 },
        &quick(),
    )
    .unwrap();
    let mut groups: Vec<&str> = report.groups.iter().map(|g| g.group.as_str()).collect();
    groups.sort_unstable();
    assert_eq!(groups, ["group_a", "group_b"]);
    assert!(report.groups.iter().all(|g| g.report.is_some() || g.skipped.is_some()));
}
