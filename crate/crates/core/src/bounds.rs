//! Closed-form regret intervals over an uncertainty set.
//!
//! The δ-interval bounds `m(π) − m(π₀)` directly, letting the shared
//! unobserved cells cancel; the baseline interval bounds each policy's value
//! separately and subtracts the extremes. Every measure here is linear or
//! linear-fractional in `(v₁(1,0), v₁(0,0))`, so extremes sit at corners of
//! the box and the closed forms below pick the right corner by sign.

use crate::assumptions::UncertaintySet;
use crate::error::Result;
use crate::measure::{Interval, Method, PerformanceMeasure, RegretInterval, UtilityMatrix};
use crate::vstats::{action_absent, class_absent, sigma, Policy};

/// Derived quantities governing the closed forms for one measure and set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSelector {
    pub measure: PerformanceMeasure,
    /// `λ_ay = u_ay − u_a'y` (utility measures only).
    pub lambda: Option<[[f64; 2]; 2]>,
    /// `ỹ = 1{λ₁₁ > λ₁₀}` (utility measures only).
    pub tilde_y: Option<usize>,
    /// `σ(a)` for `a = 0, 1`.
    pub sigma: [f64; 2],
    /// `ψ_a(π)` and `ψ_a(π₀)` indexed `[policy][a]`, proposed first.
    pub psi: [[f64; 2]; 2],
    /// `γ̄_y`, the largest attainable `p(Y(1) = y)`.
    pub gamma_bar: [f64; 2],
    /// Width of the interval on `v₀(0,0)`.
    pub alpha: f64,
}

impl BoundSelector {
    pub fn new(set: &UncertaintySet, measure: &PerformanceMeasure) -> Self {
        let id = &set.identified;
        let rho = &id.rho;
        let (lambda, tilde_y) = match measure {
            PerformanceMeasure::Utility(u) => {
                let l = [[u.lambda(0, 0), u.lambda(0, 1)], [u.lambda(1, 0), u.lambda(1, 1)]];
                (Some(l), Some(usize::from(l[1][1] > l[1][0])))
            }
            _ => (None, None),
        };
        let psi = [
            [rho[0][0] + rho[0][1], rho[1][0] + rho[1][1]],
            [rho[0][0] + rho[1][0], rho[0][1] + rho[1][1]],
        ];
        let gamma_bar = [0, 1].map(|y| {
            set.interval(y, 0).hi + set.interval(y, 1).hi + id.v(y, 0) + id.v(y, 1)
        });
        BoundSelector {
            measure: *measure,
            lambda,
            tilde_y,
            sigma: [sigma(rho, 0), sigma(rho, 1)],
            psi,
            gamma_bar,
            alpha: set.interval(0, 0).width(),
        }
    }
}

/// Values of `v_y(1,0)` and `v_y(0,0)` chosen from the set, plus the
/// identified `v_y(0,1)`, `v_y(1,1)`.
struct Cells {
    v10: f64,
    v00: f64,
    v01: f64,
    v11: f64,
}

impl Cells {
    fn total(&self) -> f64 {
        self.v10 + self.v00 + self.v01 + self.v11
    }
}

fn cells(set: &UncertaintySet, y: usize, v10: f64, v00: f64) -> Cells {
    Cells {
        v10,
        v00,
        v01: set.identified.v(y, 0),
        v11: set.identified.v(y, 1),
    }
}

/// A ClassPerf denominator must stay positive over the whole box.
fn check_class_present(set: &UncertaintySet, y: usize) -> Result<()> {
    let lo = set.interval(y, 1).lo + set.interval(y, 0).lo + set.identified.v(y, 0) + set.identified.v(y, 1);
    if lo <= 0.0 {
        return Err(class_absent(y));
    }
    Ok(())
}

fn check_action_present(sel: &BoundSelector, a: usize) -> Result<()> {
    if sel.psi[0][a] <= 0.0 {
        return Err(action_absent(Policy::Proposed, a));
    }
    if sel.psi[1][a] <= 0.0 {
        return Err(action_absent(Policy::StatusQuo, a));
    }
    Ok(())
}

/// Endpoint selector: `hi` when `up`, else `lo`.
fn pick(h: Interval, up: bool) -> f64 {
    if up {
        h.hi
    } else {
        h.lo
    }
}

/// Bounds on `δ_m = m(π) − m(π₀)` over the set.
pub fn delta_interval(set: &UncertaintySet, m: &PerformanceMeasure) -> Result<RegretInterval> {
    let (lo, hi) = delta_endpoints(set, m)?;
    RegretInterval::new(lo, hi.max(lo), Method::Delta, *m)
}

fn delta_endpoints(set: &UncertaintySet, m: &PerformanceMeasure) -> Result<(f64, f64)> {
    let id = &set.identified;
    match *m {
        PerformanceMeasure::Utility(u) => {
            // only the (1,0) cells move: λ₁₁ v₁(1,0) + λ₁₀ (ρ₁₀ − v₁(1,0))
            let sel = BoundSelector::new(set, m);
            let up = sel.tilde_y == Some(1);
            let fixed = u.lambda(0, 1) * id.v(1, 0) + u.lambda(0, 0) * id.v(0, 0);
            let at = |v1_10: f64| {
                u.lambda(1, 1) * v1_10 + u.lambda(1, 0) * (set.rho10() - v1_10) + fixed
            };
            Ok((at(pick(set.h10, !up)), at(pick(set.h10, up))))
        }
        PerformanceMeasure::ClassPerf { y } => {
            let y = y as usize;
            check_class_present(set, y)?;
            let (h10, h00) = (set.interval(y, 1), set.interval(y, 0));
            let value = |c: Cells| (c.v10 - c.v01) / c.total();
            // increasing in v_y(1,0); in v_y(0,0) decreasing iff the numerator is positive
            let upper = {
                let positive = h10.hi - id.v(y, 0) >= 0.0;
                value(cells(set, y, h10.hi, pick(h00, !positive)))
            };
            let lower = {
                let positive = h10.lo - id.v(y, 0) >= 0.0;
                value(cells(set, y, h10.lo, pick(h00, positive)))
            };
            Ok((lower, upper))
        }
        PerformanceMeasure::PredictiveValue { a } => {
            let a = a as usize;
            let sel = BoundSelector::new(set, m);
            check_action_present(&sel, a)?;
            let (psi_new, psi_old) = (sel.psi[0][a], sel.psi[1][a]);
            let s = sel.sigma[a];
            let scale = psi_new * psi_old;
            if a == 1 {
                // σ(1)v₁(1,1) + ψ₁(π₀)v₁(1,0) − ψ₁(π)v₁(0,1)
                let at = |v10: f64| (s * id.v(1, 1) + psi_old * v10 - psi_new * id.v(1, 0)) / scale;
                Ok((at(set.h10.lo), at(set.h10.hi)))
            } else {
                // σ(0)v₀(0,0) + ψ₀(π₀)v₀(0,1) − ψ₀(π)v₀(1,0)
                let (h00, h10) = (set.interval(0, 0), set.interval(0, 1));
                let at = |v00: f64, v10: f64| (s * v00 + psi_old * id.v(0, 0) - psi_new * v10) / scale;
                let grows = s >= 0.0;
                Ok((
                    at(pick(h00, !grows), h10.hi),
                    at(pick(h00, grows), h10.lo),
                ))
            }
        }
    }
}

/// Extremes `(min, max)` of one policy's value over the set.
pub fn policy_value_range(
    set: &UncertaintySet,
    policy: Policy,
    m: &PerformanceMeasure,
) -> Result<(f64, f64)> {
    let id = &set.identified;
    match (*m, policy) {
        (PerformanceMeasure::Utility(u), _) => Ok(utility_range(set, &u, policy)),
        (PerformanceMeasure::ClassPerf { y }, _) => {
            let y = y as usize;
            check_class_present(set, y)?;
            let (h10, h00) = (set.interval(y, 1), set.interval(y, 0));
            match policy {
                Policy::Proposed => {
                    // (v_y(1,0) + v_y(1,1)) / total: up in v_y(1,0), down in v_y(0,0)
                    let value = |c: Cells| (c.v10 + c.v11) / c.total();
                    Ok((
                        value(cells(set, y, h10.lo, h00.hi)),
                        value(cells(set, y, h10.hi, h00.lo)),
                    ))
                }
                Policy::StatusQuo => {
                    // (v_y(0,1) + v_y(1,1)) / total: down in both free cells
                    let value = |c: Cells| (c.v01 + c.v11) / c.total();
                    Ok((
                        value(cells(set, y, h10.hi, h00.hi)),
                        value(cells(set, y, h10.lo, h00.lo)),
                    ))
                }
            }
        }
        (PerformanceMeasure::PredictiveValue { a }, _) => {
            let a = a as usize;
            let sel = BoundSelector::new(set, m);
            check_action_present(&sel, a)?;
            match (policy, a) {
                (Policy::Proposed, 1) => {
                    let psi = sel.psi[0][1];
                    Ok(((set.h10.lo + id.v(1, 1)) / psi, (set.h10.hi + id.v(1, 1)) / psi))
                }
                (Policy::Proposed, _) => {
                    let psi = sel.psi[0][0];
                    let h = set.interval(0, 0);
                    Ok(((h.lo + id.v(0, 0)) / psi, (h.hi + id.v(0, 0)) / psi))
                }
                (Policy::StatusQuo, 1) => {
                    let v = (id.v(1, 0) + id.v(1, 1)) / sel.psi[1][1];
                    Ok((v, v))
                }
                (Policy::StatusQuo, _) => {
                    let psi = sel.psi[1][0];
                    let (h00, h10) = (set.interval(0, 0), set.interval(0, 1));
                    Ok(((h00.lo + h10.lo) / psi, (h00.hi + h10.hi) / psi))
                }
            }
        }
    }
}

fn utility_range(set: &UncertaintySet, u: &UtilityMatrix, policy: Policy) -> (f64, f64) {
    let id = &set.identified;
    let (rho10, rho00) = (set.rho10(), set.rho00());
    // identified d = 1 cells
    let mut fixed = 0.0;
    for y in 0..2 {
        for t in 0..2 {
            let a = match policy {
                Policy::Proposed => t,
                Policy::StatusQuo => 1,
            };
            fixed += u.get(a, y) * id.v(y, t);
        }
    }
    // free cells: v₁(1,0) = x10, v₁(0,0) = x00 with complements v₀(t,0)
    let (c10, c00, base) = match policy {
        Policy::Proposed => (
            u.get(1, 1) - u.get(1, 0),
            u.get(0, 1) - u.get(0, 0),
            u.get(1, 0) * rho10 + u.get(0, 0) * rho00,
        ),
        Policy::StatusQuo => (
            u.get(0, 1) - u.get(0, 0),
            u.get(0, 1) - u.get(0, 0),
            u.get(0, 0) * (rho10 + rho00),
        ),
    };
    let linear = |h: Interval, c: f64, up: bool| c * pick(h, (c >= 0.0) == up);
    let lo = fixed + base + linear(set.h10, c10, false) + linear(set.h00, c00, false);
    let hi = fixed + base + linear(set.h10, c10, true) + linear(set.h00, c00, true);
    (lo, hi)
}

/// Bounds `[min m(π) − max m(π₀), max m(π) − min m(π₀)]`.
pub fn baseline_interval(set: &UncertaintySet, m: &PerformanceMeasure) -> Result<RegretInterval> {
    let (new_lo, new_hi) = policy_value_range(set, Policy::Proposed, m)?;
    let (old_lo, old_hi) = policy_value_range(set, Policy::StatusQuo, m)?;
    RegretInterval::new(new_lo - old_hi, new_hi - old_lo, Method::Baseline, *m)
}

/// Guaranteed lower bound on `width(baseline) − width(δ)`.
///
/// For utilities this is `2α·|u₀₁ − u₀₀|`, the share of the baseline width
/// caused by `v(0,0)` being double counted across the two policies.
pub fn separation_bound(set: &UncertaintySet, m: &PerformanceMeasure) -> Result<f64> {
    let sel = BoundSelector::new(set, m);
    let alpha = sel.alpha;
    match *m {
        PerformanceMeasure::Utility(u) => Ok(2.0 * alpha * (u.get(0, 1) - u.get(0, 0)).abs()),
        PerformanceMeasure::ClassPerf { y } => {
            let y = y as usize;
            let g = sel.gamma_bar[y];
            if g <= 0.0 {
                return Err(class_absent(y));
            }
            Ok(2.0 * alpha * set.identified.v(y, 1) / (g * g))
        }
        PerformanceMeasure::PredictiveValue { a: 1 } => Ok(0.0),
        PerformanceMeasure::PredictiveValue { .. } => {
            check_action_present(&sel, 0)?;
            Ok(2.0 * alpha / sel.psi[0][0].max(sel.psi[1][0]))
        }
    }
}

/// Measured `width(baseline) − width(δ)`.
pub fn measured_improvement(set: &UncertaintySet, m: &PerformanceMeasure) -> Result<f64> {
    Ok(baseline_interval(set, m)?.width() - delta_interval(set, m)?.width())
}
