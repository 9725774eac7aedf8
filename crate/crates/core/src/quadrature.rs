//! Uniform quadrature on symmetric intervals for integrals against
//! exponentially decaying kernels such as `sech²`.

/// Rectangle rule on `[-half_width, half_width]` with an odd number of nodes
/// (so `0` is a node). For integrands analytic in a strip and negligible at the
/// end points this is spectrally accurate.
#[derive(Debug, Clone)]
pub struct UniformRule {
    nodes: Vec<f64>,
    weight: f64,
}

impl UniformRule {
    pub fn symmetric(half_width: f64, spacing: f64) -> Self {
        let m = (half_width / spacing).ceil() as i64;
        let weight = half_width / m as f64;
        let nodes = (-m..=m).map(|k| k as f64 * weight).collect();
        Self { nodes, weight }
    }

    /// Default rule for integrals against `sech²(μy)`: the kernel is below
    /// `1e-17` past `|μy| = 20`, and poles sit at distance `π/(2μ)` from the
    /// real axis, so a step of `0.05/μ` leaves errors far below roundoff.
    pub fn for_sech_kernel(mu: f64) -> Self {
        Self::symmetric(20.0 / mu, 0.05 / mu)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&y| f(y)).sum::<f64>() * self.weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sech;

    #[test]
    fn sech_moments() {
        let rule = UniformRule::for_sech_kernel(1.0);
        assert!((rule.integrate(|y| sech(y).powi(2)) - 2.0).abs() < 1e-14);
        assert!((rule.integrate(|y| sech(y).powi(4)) - 4.0 / 3.0).abs() < 1e-14);
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((rule.integrate(|y| y * y * sech(y).powi(2)) - pi2_6).abs() < 1e-13);
    }

    #[test]
    fn scaled_kernel() {
        let rule = UniformRule::for_sech_kernel(0.5);
        assert!((rule.integrate(|y| sech(0.5 * y).powi(2)) - 4.0).abs() < 1e-13);
    }
}
