//! Expectations over a bivariate normal by tensor Gauss–Hermite quadrature.

use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;

/// Nodes and weights for expectations under a standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardNormalRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl StandardNormalRule {
    pub fn new(degree: usize) -> Self {
        let rule = GaussHermite::new(NonZeroUsize::new(degree.max(1)).expect("positive degree"));
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / std::f64::consts::PI.sqrt()))
            .unzip();
        StandardNormalRule { nodes, weights }
    }

    /// `E[f(G)]` for `G ~ N(0, 1)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// `E[f(S₁, S₂)]` for a centred bivariate normal with covariance
    /// `[[s11, s12], [s12, s22]]`.
    pub fn expect_bivariate(&self, cov: [f64; 3], mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let [s11, s12, s22] = cov;
        let l11 = s11.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { s12 / l11 } else { 0.0 };
        let l22 = (s22 - l21 * l21).max(0.0).sqrt();
        let mut total = 0.0;
        for (&g1, &w1) in self.nodes.iter().zip(&self.weights) {
            let a = l11 * g1;
            let b0 = l21 * g1;
            for (&g2, &w2) in self.nodes.iter().zip(&self.weights) {
                total += w1 * w2 * f(a, b0 + l22 * g2);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_normal_moments() {
        let rule = StandardNormalRule::new(10);
        assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-12);
        assert!((rule.expect(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((rule.expect(|x| x.powi(4)) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn bivariate_covariance_is_reproduced() {
        let rule = StandardNormalRule::new(8);
        let cov = [2.0, 0.6, 0.5];
        assert!((rule.expect_bivariate(cov, |a, _| a * a) - 2.0).abs() < 1e-10);
        assert!((rule.expect_bivariate(cov, |a, b| a * b) - 0.6).abs() < 1e-10);
        assert!((rule.expect_bivariate(cov, |_, b| b * b) - 0.5).abs() < 1e-10);
        // degenerate first coordinate
        assert!((rule.expect_bivariate([0.0, 0.0, 1.0], |_, b| b * b) - 1.0).abs() < 1e-10);
    }
}
