//! Performance measures and regret intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nonnegative utilities `u[a][y]` for action `a` and potential outcome `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct UtilityMatrix([[f64; 2]; 2]);

impl UtilityMatrix {
    pub fn new(u: [[f64; 2]; 2]) -> Result<Self> {
        if u.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "utilities must be finite and nonnegative, got {u:?}"
            )));
        }
        Ok(UtilityMatrix(u))
    }

    /// `u11 = u00 = 1`, `u10 = u01 = 0`.
    pub fn accuracy() -> Self {
        UtilityMatrix([[1.0, 0.0], [0.0, 1.0]])
    }

    /// Utilities for a cost structure normalized so the two error costs sum
    /// to one: a false positive costs `r / (1 + r)` and a false negative
    /// `1 / (1 + r)` where `r` is the false-positive to false-negative cost
    /// ratio. Correct decisions earn the larger of the two costs.
    pub fn cost_ratio(ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost ratio must be positive, got {ratio}"
            )));
        }
        let fp = ratio / (1.0 + ratio);
        let fn_ = 1.0 / (1.0 + ratio);
        let top = fp.max(fn_);
        UtilityMatrix::new([[top, top - fn_], [top - fp, top]])
    }

    pub fn get(&self, a: usize, y: usize) -> f64 {
        self.0[a][y]
    }

    /// `λ_ay = u_ay − u_a'y`.
    pub fn lambda(&self, a: usize, y: usize) -> f64 {
        self.0[a][y] - self.0[1 - a][y]
    }
}

impl TryFrom<[[f64; 2]; 2]> for UtilityMatrix {
    type Error = Error;
    fn try_from(u: [[f64; 2]; 2]) -> Result<Self> {
        UtilityMatrix::new(u)
    }
}

impl From<UtilityMatrix> for [[f64; 2]; 2] {
    fn from(u: UtilityMatrix) -> Self {
        u.0
    }
}

/// A policy performance measure evaluated against the potential outcome Y(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PerformanceMeasure {
    /// Expected utility `Σ u_ay p(A = a, Y(1) = y)`.
    Utility(UtilityMatrix),
    /// `p(A = 1 | Y(1) = y)`: TPR for `y = 1`, FPR for `y = 0`.
    ClassPerf { y: u8 },
    /// `p(Y(1) = a | A = a)`: PPV for `a = 1`, NPV for `a = 0`.
    PredictiveValue { a: u8 },
}

impl PerformanceMeasure {
    pub fn accuracy() -> Self {
        PerformanceMeasure::Utility(UtilityMatrix::accuracy())
    }
    pub fn tpr() -> Self {
        PerformanceMeasure::ClassPerf { y: 1 }
    }
    pub fn fpr() -> Self {
        PerformanceMeasure::ClassPerf { y: 0 }
    }
    pub fn ppv() -> Self {
        PerformanceMeasure::PredictiveValue { a: 1 }
    }
    pub fn npv() -> Self {
        PerformanceMeasure::PredictiveValue { a: 0 }
    }

    /// The five measures studied throughout: accuracy utility, FPR, TPR,
    /// NPV and PPV.
    pub fn standard_set() -> Vec<Self> {
        vec![
            Self::accuracy(),
            Self::fpr(),
            Self::tpr(),
            Self::npv(),
            Self::ppv(),
        ]
    }

    pub fn class_perf(y: u8) -> Result<Self> {
        check_binary("y", y)?;
        Ok(PerformanceMeasure::ClassPerf { y })
    }

    pub fn predictive_value(a: u8) -> Result<Self> {
        check_binary("a", a)?;
        Ok(PerformanceMeasure::PredictiveValue { a })
    }

    pub fn name(&self) -> String {
        match self {
            PerformanceMeasure::Utility(u) if *u == UtilityMatrix::accuracy() => "accuracy".into(),
            PerformanceMeasure::Utility(u) => format!(
                "utility:{},{},{},{}",
                u.get(0, 0),
                u.get(0, 1),
                u.get(1, 0),
                u.get(1, 1)
            ),
            PerformanceMeasure::ClassPerf { y: 1 } => "tpr".into(),
            PerformanceMeasure::ClassPerf { .. } => "fpr".into(),
            PerformanceMeasure::PredictiveValue { a: 1 } => "ppv".into(),
            PerformanceMeasure::PredictiveValue { .. } => "npv".into(),
        }
    }
}

fn check_binary(name: &str, v: u8) -> Result<()> {
    if v > 1 {
        return Err(Error::InvalidArgument(format!("{name} must be 0 or 1, got {v}")));
    }
    Ok(())
}

impl fmt::Display for PerformanceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PerformanceMeasure {
    type Err = Error;

    /// Accepts `accuracy`, `tpr`, `fpr`, `ppv`, `npv`,
    /// `utility:u00,u01,u10,u11` and `cost:<fp/fn ratio>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "accuracy" => return Ok(Self::accuracy()),
            "tpr" => return Ok(Self::tpr()),
            "fpr" => return Ok(Self::fpr()),
            "ppv" => return Ok(Self::ppv()),
            "npv" => return Ok(Self::npv()),
            _ => {}
        }
        let bad = || Error::InvalidArgument(format!("unknown measure `{s}`"));
        if let Some(rest) = s.strip_prefix("utility:") {
            let vals: Vec<f64> = rest
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if vals.len() != 4 {
                return Err(bad());
            }
            let u = UtilityMatrix::new([[vals[0], vals[1]], [vals[2], vals[3]]])?;
            return Ok(PerformanceMeasure::Utility(u));
        }
        if let Some(rest) = s.strip_prefix("cost:") {
            let ratio = rest.trim().parse::<f64>().map_err(|_| bad())?;
            return Ok(PerformanceMeasure::Utility(UtilityMatrix::cost_ratio(ratio)?));
        }
        Err(bad())
    }
}

impl TryFrom<String> for PerformanceMeasure {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PerformanceMeasure> for String {
    fn from(m: PerformanceMeasure) -> Self {
        m.name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Delta,
    Baseline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Delta => "delta",
            Method::Baseline => "baseline",
        })
    }
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("interval [{lo}, {hi}] is reversed")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn clamp_into(&self, lo: f64, hi: f64) -> Self {
        Interval {
            lo: self.lo.clamp(lo, hi),
            hi: self.hi.clamp(lo, hi),
        }
    }
}

/// Bounds on the regret `m(π) − m(π₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretInterval {
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    pub measure: PerformanceMeasure,
}

impl RegretInterval {
    pub fn new(lower: f64, upper: f64, method: Method, measure: PerformanceMeasure) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::InvalidArgument(format!(
                "regret interval [{lower}, {upper}] is reversed"
            )));
        }
        Ok(RegretInterval {
            lower,
            upper,
            method,
            ci_lower: None,
            ci_upper: None,
            measure,
        })
    }

    pub fn with_ci(mut self, ci_lower: f64, ci_upper: f64) -> Result<Self> {
        if !(ci_lower <= ci_upper) {
            return Err(Error::InvalidArgument(format!(
                "confidence band [{ci_lower}, {ci_upper}] is reversed"
            )));
        }
        self.ci_lower = Some(ci_lower);
        self.ci_upper = Some(ci_upper);
        Ok(self)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utilities_must_be_nonnegative() {
        assert!(UtilityMatrix::new([[1.0, -0.1], [0.0, 1.0]]).is_err());
        assert!(UtilityMatrix::new([[1.0, f64::NAN], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn lambda_is_action_contrast() {
        let u = UtilityMatrix::new([[0.5, 0.0], [0.2, 1.0]]).unwrap();
        assert_eq!(u.lambda(1, 1), 1.0);
        assert_eq!(u.lambda(1, 0), 0.2 - 0.5);
        assert_eq!(u.lambda(0, 0), 0.5 - 0.2);
    }

    #[test]
    fn cost_ratio_keeps_error_costs() {
        let u = UtilityMatrix::cost_ratio(0.1).unwrap();
        let fp = u.get(1, 1) - u.get(1, 0);
        let fn_ = u.get(0, 0) - u.get(0, 1);
        assert!((fn_ / fp - 10.0).abs() < 1e-12);
        assert!((fp + fn_ - 1.0).abs() < 1e-12);
        assert_eq!(u.get(0, 1), 0.0);
    }

    #[test]
    fn parses_measure_names() {
        for m in PerformanceMeasure::standard_set() {
            assert_eq!(m.name().parse::<PerformanceMeasure>().unwrap(), m);
        }
        let u: PerformanceMeasure = "utility:1,0,0.5,2".parse().unwrap();
        assert_eq!(u.name().parse::<PerformanceMeasure>().unwrap(), u);
        assert!("utility:1,0".parse::<PerformanceMeasure>().is_err());
        assert!("f1".parse::<PerformanceMeasure>().is_err());
        assert!(PerformanceMeasure::class_perf(2).is_err());
    }

    #[test]
    fn measures_serialize_by_name() {
        let json = serde_json::to_string(&PerformanceMeasure::tpr()).unwrap();
        assert_eq!(json, "\"tpr\"");
        let cost = PerformanceMeasure::Utility(UtilityMatrix::cost_ratio(0.1).unwrap());
        let back: PerformanceMeasure = serde_json::from_str(&serde_json::to_string(&cost).unwrap()).unwrap();
        assert_eq!(back, cost);
    }

    #[test]
    fn regret_interval_invariants() {
        assert!(RegretInterval::new(0.2, 0.1, Method::Delta, PerformanceMeasure::tpr()).is_err());
        let r = RegretInterval::new(-0.1, 0.1, Method::Delta, PerformanceMeasure::tpr()).unwrap();
        assert!(r.clone().with_ci(0.0, -0.2).is_err());
        // a band narrower than the interval is allowed
        assert!(r.with_ci(-0.05, 0.05).is_ok());
    }
}
