//! Sufficient statistics `v_y(t,d) = p(T = t, D = d, Y(1) = y)`.
//!
//! `T` is the proposed policy's action and `D` the status quo's. The cells
//! with `d = 1` are identified from observational data; the `d = 0` cells
//! are only partially identified. `A^π` in the literature denotes the action
//! of a generic policy; here it is `T` for the proposed policy and `D` for
//! the status quo.

use serde::{Deserialize, Serialize};

use crate::dataset::ObservationalDataset;
use crate::error::{Error, Result};
use crate::measure::PerformanceMeasure;

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Proposed,
    StatusQuo,
}

/// The identified half: `v_y(t,1)` and the joint action frequencies `ρ_td`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedVStats {
    /// `v1[y][t] = v_y(t, 1)`.
    pub v1: [[f64; 2]; 2],
    /// `rho[t][d] = p(T = t, D = d)`.
    pub rho: [[f64; 2]; 2],
}

impl IdentifiedVStats {
    pub fn new(v1: [[f64; 2]; 2], rho: [[f64; 2]; 2]) -> Result<Self> {
        let all = v1.iter().flatten().chain(rho.iter().flatten());
        if all.clone().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("v-statistics must lie in [0, 1]".into()));
        }
        for t in 0..2 {
            if (v1[0][t] + v1[1][t] - rho[t][1]).abs() > SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "v_0({t},1) + v_1({t},1) must equal rho_{t}1"
                )));
            }
        }
        let total: f64 = rho.iter().flatten().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidArgument(format!("rho sums to {total}, not 1")));
        }
        Ok(IdentifiedVStats { v1, rho })
    }

    pub fn rho(&self, t: usize, d: usize) -> f64 {
        self.rho[t][d]
    }

    pub fn v(&self, y: usize, t: usize) -> f64 {
        self.v1[y][t]
    }
}

/// All eight cells `v[y][t][d]` with the derived `ρ_td`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "FlatTable", try_from = "FlatTable")]
pub struct VStatTable {
    v: [[[f64; 2]; 2]; 2],
    rho: [[f64; 2]; 2],
}

impl VStatTable {
    /// Builds a table from `v[y][t][d]`, checking nonnegativity and that the
    /// cells sum to one.
    pub fn new(v: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        if v.iter().flatten().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidArgument("v-statistics must be nonnegative".into()));
        }
        let total: f64 = v.iter().flatten().flatten().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidArgument(format!("v-statistics sum to {total}, not 1")));
        }
        let mut rho = [[0.0; 2]; 2];
        for (t, row) in rho.iter_mut().enumerate() {
            for (d, cell) in row.iter_mut().enumerate() {
                *cell = v[0][t][d] + v[1][t][d];
            }
        }
        Ok(VStatTable { v, rho })
    }

    /// Completes the identified half with values of `v_1(1,0)` and `v_1(0,0)`;
    /// the `y = 0` cells follow from `ρ_t0`.
    pub fn complete(identified: &IdentifiedVStats, v1_10: f64, v1_00: f64) -> Result<Self> {
        let rho = identified.rho;
        let mut v = [[[0.0; 2]; 2]; 2];
        for y in 0..2 {
            for t in 0..2 {
                v[y][t][1] = identified.v1[y][t];
            }
        }
        v[1][1][0] = v1_10;
        v[0][1][0] = rho[1][0] - v1_10;
        v[1][0][0] = v1_00;
        v[0][0][0] = rho[0][0] - v1_00;
        // rounding can leave -1e-17 in a cell at the interval edge
        for c in v.iter_mut().flatten().flatten() {
            if *c < 0.0 && *c > -1e-12 {
                *c = 0.0;
            }
        }
        VStatTable::new(v)
    }

    pub fn v(&self, y: usize, t: usize, d: usize) -> f64 {
        self.v[y][t][d]
    }

    pub fn rho(&self, t: usize, d: usize) -> f64 {
        self.rho[t][d]
    }

    pub fn cells(&self) -> &[[[f64; 2]; 2]; 2] {
        &self.v
    }

    pub fn identified(&self) -> IdentifiedVStats {
        IdentifiedVStats {
            v1: [
                [self.v[0][0][1], self.v[0][1][1]],
                [self.v[1][0][1], self.v[1][1][1]],
            ],
            rho: self.rho,
        }
    }

    /// `p(A^policy = a, Y(1) = y)`.
    pub fn joint(&self, policy: Policy, a: usize, y: usize) -> f64 {
        match policy {
            Policy::Proposed => self.v[y][a][0] + self.v[y][a][1],
            Policy::StatusQuo => self.v[y][0][a] + self.v[y][1][a],
        }
    }

    /// `ψ_a(policy) = p(A^policy = a)`.
    pub fn psi(&self, policy: Policy, a: usize) -> f64 {
        match policy {
            Policy::Proposed => self.rho[a][0] + self.rho[a][1],
            Policy::StatusQuo => self.rho[0][a] + self.rho[1][a],
        }
    }

    /// `p(Y(1) = y)`.
    pub fn class_mass(&self, y: usize) -> f64 {
        self.v[y].iter().flatten().sum()
    }
}

#[derive(Serialize, Deserialize)]
struct FlatTable {
    v_000: f64,
    v_001: f64,
    v_010: f64,
    v_011: f64,
    v_100: f64,
    v_101: f64,
    v_110: f64,
    v_111: f64,
    rho_00: f64,
    rho_01: f64,
    rho_10: f64,
    rho_11: f64,
}

impl From<VStatTable> for FlatTable {
    fn from(t: VStatTable) -> Self {
        let v = t.v;
        FlatTable {
            v_000: v[0][0][0],
            v_001: v[0][0][1],
            v_010: v[0][1][0],
            v_011: v[0][1][1],
            v_100: v[1][0][0],
            v_101: v[1][0][1],
            v_110: v[1][1][0],
            v_111: v[1][1][1],
            rho_00: t.rho[0][0],
            rho_01: t.rho[0][1],
            rho_10: t.rho[1][0],
            rho_11: t.rho[1][1],
        }
    }
}

impl TryFrom<FlatTable> for VStatTable {
    type Error = Error;
    fn try_from(f: FlatTable) -> Result<Self> {
        VStatTable::new([
            [[f.v_000, f.v_001], [f.v_010, f.v_011]],
            [[f.v_100, f.v_101], [f.v_110, f.v_111]],
        ])
    }
}

/// Sample averages of `π_t(x_i)·1{d_i = d}` and `π_t(x_i)·1{d_i = 1, y_i = y}`.
///
/// The proposed policy always enters through `pi1`; for a deterministic
/// policy loaded from a realized `t` column this is the count-based estimate.
pub fn estimate_identified(data: &ObservationalDataset) -> IdentifiedVStats {
    let n = data.len() as f64;
    let mut v1 = [[0.0; 2]; 2];
    let mut rho = [[0.0; 2]; 2];
    for i in 0..data.len() {
        let d = data.d(i) as usize;
        for t in 0..2 {
            let w = data.pi_t(i, t);
            rho[t][d] += w;
            if let (1, Some(y)) = (d, data.y(i)) {
                v1[y as usize][t] += w;
            }
        }
    }
    for c in v1.iter_mut().flatten().chain(rho.iter_mut().flatten()) {
        *c /= n;
    }
    IdentifiedVStats { v1, rho }
}

/// Value of `m` for one policy, evaluated on a fully specified table.
pub fn measure_value(v: &VStatTable, policy: Policy, m: &PerformanceMeasure) -> Result<f64> {
    match *m {
        PerformanceMeasure::Utility(u) => {
            let mut total = 0.0;
            for a in 0..2 {
                for y in 0..2 {
                    total += u.get(a, y) * v.joint(policy, a, y);
                }
            }
            Ok(total)
        }
        PerformanceMeasure::ClassPerf { y } => {
            let y = y as usize;
            let mass = v.joint(policy, 0, y) + v.joint(policy, 1, y);
            if mass <= 0.0 {
                return Err(class_absent(y));
            }
            Ok(v.joint(policy, 1, y) / mass)
        }
        PerformanceMeasure::PredictiveValue { a } => {
            let a = a as usize;
            let psi = v.psi(policy, a);
            if psi <= 0.0 {
                return Err(action_absent(policy, a));
            }
            Ok(v.joint(policy, a, a) / psi)
        }
    }
}

/// `δ_m(v) = m(v; π) − m(v; π₀)` through the cancelled decompositions.
pub fn delta_value(v: &VStatTable, m: &PerformanceMeasure) -> Result<f64> {
    match *m {
        PerformanceMeasure::Utility(u) => {
            // Σ_ay λ_ay v_y(a, a')
            let mut total = 0.0;
            for a in 0..2 {
                for y in 0..2 {
                    total += u.lambda(a, y) * v.v(y, a, 1 - a);
                }
            }
            Ok(total)
        }
        PerformanceMeasure::ClassPerf { y } => {
            let y = y as usize;
            let mass = v.class_mass(y);
            if mass <= 0.0 {
                return Err(class_absent(y));
            }
            Ok((v.v(y, 1, 0) - v.v(y, 0, 1)) / mass)
        }
        PerformanceMeasure::PredictiveValue { a } => {
            let a = a as usize;
            let b = 1 - a;
            let psi_new = v.psi(Policy::Proposed, a);
            let psi_old = v.psi(Policy::StatusQuo, a);
            if psi_new <= 0.0 {
                return Err(action_absent(Policy::Proposed, a));
            }
            if psi_old <= 0.0 {
                return Err(action_absent(Policy::StatusQuo, a));
            }
            let sigma = sigma(&v.rho, a);
            let num = sigma * v.v(a, a, a) + psi_old * v.v(a, a, b) - psi_new * v.v(a, b, a);
            Ok(num / (psi_new * psi_old))
        }
    }
}

/// `σ(a) = (1 − 2a)(ρ_10 − ρ_01)`.
pub fn sigma(rho: &[[f64; 2]; 2], a: usize) -> f64 {
    (1.0 - 2.0 * a as f64) * (rho[1][0] - rho[0][1])
}

pub(crate) fn class_absent(y: usize) -> Error {
    Error::ZeroDenominator(format!("class absent: p(Y(1) = {y}) = 0"))
}

pub(crate) fn action_absent(policy: Policy, a: usize) -> Error {
    let who = match policy {
        Policy::Proposed => "proposed",
        Policy::StatusQuo => "status quo",
    };
    Error::ZeroDenominator(format!("{who} policy never takes action {a}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Row;

    fn table(entries: &[((usize, usize, usize), f64)]) -> VStatTable {
        let mut v = [[[0.0; 2]; 2]; 2];
        for &((y, t, d), val) in entries {
            v[y][t][d] = val;
        }
        VStatTable::new(v).unwrap()
    }

    fn row(t: bool, d: bool, y: Option<bool>) -> Row {
        let mut r = Row::new(vec![0.0], d, if t { 1.0 } else { 0.0 }, y);
        r.t = Some(t);
        r
    }

    #[test]
    fn identified_counts_match_hand_tally() {
        let ds = ObservationalDataset::from_rows(vec![
            row(true, true, Some(true)),
            row(true, true, Some(false)),
            row(false, true, Some(true)),
            row(false, false, None),
        ])
        .unwrap();
        let id = estimate_identified(&ds);
        assert_eq!(id.v(1, 1), 0.25);
        assert_eq!(id.v(0, 1), 0.25);
        assert_eq!(id.v(1, 0), 0.25);
        assert_eq!(id.v(0, 0), 0.0);
        assert_eq!(id.rho(0, 0), 0.25);
        assert_eq!(id.rho(1, 0), 0.0);
    }

    #[test]
    fn identified_point_mass() {
        let ds = ObservationalDataset::from_rows(vec![row(true, true, Some(true)); 5]).unwrap();
        let id = estimate_identified(&ds);
        assert_eq!(id.v(1, 1), 1.0);
        assert_eq!(id.v(0, 1) + id.v(1, 0) + id.v(0, 0), 0.0);
        assert_eq!(id.rho(1, 1), 1.0);
    }

    #[test]
    fn identified_stochastic_policy_splits_mass() {
        let ds = ObservationalDataset::from_rows(vec![Row::new(vec![1.0], true, 0.5, Some(true)); 4])
            .unwrap();
        let id = estimate_identified(&ds);
        assert_eq!(id.v(1, 1), 0.5);
        assert_eq!(id.v(1, 0), 0.5);
    }

    #[test]
    fn accuracy_value_sums_agreement_cells() {
        // v_1(1,1)=0.2, v_1(1,0)=0.1, v_0(0,1)=0.06, v_0(0,0)=0.3; the rest
        // fills out a consistent table.
        let v = table(&[
            ((1, 1, 1), 0.2),
            ((1, 1, 0), 0.1),
            ((0, 0, 1), 0.06),
            ((0, 0, 0), 0.3),
            ((0, 1, 1), 0.1),
            ((1, 0, 1), 0.04),
            ((0, 1, 0), 0.1),
            ((1, 0, 0), 0.1),
        ]);
        let m = measure_value(&v, Policy::Proposed, &PerformanceMeasure::accuracy()).unwrap();
        assert!((m - 0.66).abs() < 1e-12);
    }

    #[test]
    fn class_perf_ratio() {
        // v_1(·,·) = 0.10, 0.15, 0.04, 0.20 for cells 00, 10, 01, 11
        let v = table(&[
            ((1, 0, 0), 0.10),
            ((1, 1, 0), 0.15),
            ((1, 0, 1), 0.04),
            ((1, 1, 1), 0.20),
            ((0, 0, 0), 0.51),
        ]);
        let m = measure_value(&v, Policy::Proposed, &PerformanceMeasure::tpr()).unwrap();
        assert!((m - 0.35 / 0.49).abs() < 1e-12);
        assert!((m - 0.7143).abs() < 1e-4);
    }

    #[test]
    fn policies_agree_when_disagreement_cells_vanish() {
        let v = table(&[((1, 1, 1), 0.3), ((0, 1, 1), 0.2), ((1, 0, 0), 0.1), ((0, 0, 0), 0.4)]);
        for m in PerformanceMeasure::standard_set() {
            let a = measure_value(&v, Policy::Proposed, &m).unwrap();
            let b = measure_value(&v, Policy::StatusQuo, &m).unwrap();
            assert_eq!(a, b, "{m}");
            assert_eq!(delta_value(&v, &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn accuracy_delta_on_disagreement_cells() {
        let v = table(&[
            ((1, 1, 0), 0.10),
            ((0, 1, 0), 0.10),
            ((1, 0, 1), 0.04),
            ((0, 0, 1), 0.06),
            ((1, 1, 1), 0.3),
            ((0, 0, 0), 0.4),
        ]);
        let m = PerformanceMeasure::accuracy();
        let d = delta_value(&v, &m).unwrap();
        assert!((d - 0.02).abs() < 1e-12);
        let diff = measure_value(&v, Policy::Proposed, &m).unwrap()
            - measure_value(&v, Policy::StatusQuo, &m).unwrap();
        assert!((d - diff).abs() < 1e-12);
    }

    #[test]
    fn class_perf_delta_symmetric_disagreement_is_zero() {
        let v = table(&[((1, 1, 0), 0.1), ((1, 0, 1), 0.1), ((1, 1, 1), 0.3), ((0, 0, 0), 0.5)]);
        assert_eq!(delta_value(&v, &PerformanceMeasure::tpr()).unwrap(), 0.0);
    }

    #[test]
    fn ppv_delta_matches_hand_evaluation() {
        // ρ11=0.3, ρ10=0.2, ρ01=0.1, ρ00=0.4; v_1(1,1)=0.2, v_1(1,0)=0.15, v_1(0,1)=0.04
        let v = table(&[
            ((1, 1, 1), 0.2),
            ((0, 1, 1), 0.1),
            ((1, 1, 0), 0.15),
            ((0, 1, 0), 0.05),
            ((1, 0, 1), 0.04),
            ((0, 0, 1), 0.06),
            ((1, 0, 0), 0.2),
            ((0, 0, 0), 0.2),
        ]);
        let d = delta_value(&v, &PerformanceMeasure::ppv()).unwrap();
        let hand = ((0.1 - 0.2) * 0.2 + 0.4 * 0.15 - 0.5 * 0.04) / (0.5 * 0.4);
        assert!((d - hand).abs() < 1e-12);
        assert!((d - 0.10).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_are_errors() {
        let v = table(&[((0, 1, 1), 0.5), ((0, 0, 0), 0.5)]);
        assert!(matches!(
            measure_value(&v, Policy::Proposed, &PerformanceMeasure::tpr()),
            Err(Error::ZeroDenominator(_))
        ));
        assert!(delta_value(&v, &PerformanceMeasure::tpr()).is_err());
        let all_t1 = table(&[((1, 1, 1), 0.5), ((0, 1, 0), 0.5)]);
        assert!(delta_value(&all_t1, &PerformanceMeasure::npv()).is_err());
    }

    #[test]
    fn table_rejects_invalid_cells() {
        let mut v = [[[0.125; 2]; 2]; 2];
        v[0][0][0] = -0.125;
        assert!(VStatTable::new(v).is_err());
        assert!(VStatTable::new([[[0.1; 2]; 2]; 2]).is_err());
    }

    #[test]
    fn json_uses_flat_keys() {
        let v = table(&[((1, 1, 0), 0.25), ((0, 0, 1), 0.75)]);
        let json = serde_json::to_value(v).unwrap();
        assert_eq!(json["v_110"], 0.25);
        assert_eq!(json["rho_01"], 0.75);
        let back: VStatTable = serde_json::from_value(json).unwrap();
        assert_eq!(back, v);
    }
}
