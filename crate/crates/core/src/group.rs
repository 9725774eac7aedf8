//! The soliton group `G = H₃ ⋉ ℝ₊` and its action on fields.
//!
//! `g = (a, v, γ, μ)` acts by
//! `(g·u)(x) = e^{iγ} e^{iv(x−a)} μ u(μ(x−a))`,
//! and the soliton manifold is the orbit of `η = sech`.

use crate::grid::{sech, Grid, WaveField, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub a: f64,
    pub v: f64,
    /// Stored unwrapped; never reduced mod 2π.
    pub gamma: f64,
    pub mu: f64,
}

impl GroupElement {
    pub fn new(a: f64, v: f64, gamma: f64, mu: f64) -> Result<Self> {
        let g = Self { a, v, gamma, mu };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.a, self.v, self.gamma, self.mu].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidGroupElement(format!("non-finite component in {self:?}")));
        }
        if self.mu <= 0.0 {
            return Err(Error::InvalidGroupElement(format!("scale must be positive, got {}", self.mu)));
        }
        Ok(())
    }

    pub const fn identity() -> Self {
        Self { a: 0.0, v: 0.0, gamma: 0.0, mu: 1.0 }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.v, self.gamma, self.mu]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        Self { a: p[0], v: p[1], gamma: p[2], mu: p[3] }
    }

    /// Group law: `v″ = v + v′μ`, `a″ = a + a′/μ`, `γ″ = γ + γ′ + v a′/μ`, `μ″ = μμ′`.
    pub fn multiply(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            a: self.a + other.a / self.mu,
            v: self.v + other.v * self.mu,
            gamma: self.gamma + other.gamma + self.v * other.a / self.mu,
            mu: self.mu * other.mu,
        }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            a: -self.a * self.mu,
            v: -self.v / self.mu,
            gamma: -self.gamma + self.v * self.a,
            mu: 1.0 / self.mu,
        }
    }

    /// One-parameter subgroups `exp(s eⱼ)`, `j = 1..=4`.
    pub fn exp_basis(j: usize, s: f64) -> GroupElement {
        match j {
            1 => GroupElement { a: s, ..Self::identity() },
            2 => GroupElement { v: s, ..Self::identity() },
            3 => GroupElement { gamma: s, ..Self::identity() },
            4 => GroupElement { mu: s.exp(), ..Self::identity() },
            _ => panic!("basis index must be 1..=4, got {j}"),
        }
    }

    /// The phase-and-amplitude factor `e^{iγ} e^{iv(x−a)} μ` and the rescaled
    /// argument `μ(x−a)`.
    fn frame(&self, x: f64) -> (C64, f64) {
        let phase = C64::from_polar(self.mu, self.gamma + self.v * (x - self.a));
        (phase, self.mu * (x - self.a))
    }

    /// Action on an analytically known profile, evaluated on the grid without resampling.
    pub fn act_on_profile(&self, grid: Grid, profile: impl Fn(f64) -> C64) -> WaveField {
        WaveField::from_fn(grid, |x| {
            let (factor, y) = self.frame(x);
            factor * profile(y)
        })
    }

    /// `g·η` sampled on the grid.
    pub fn soliton(&self, grid: Grid) -> WaveField {
        self.act_on_profile(grid, |y| C64::new(sech(y), 0.0))
    }
}

impl Default for GroupElement {
    fn default() -> Self {
        Self::identity()
    }
}

/// Coefficients over the basis `e₁ = −∂x`, `e₂ = ix`, `e₃ = i`, `e₄ = ∂x·x`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LieAlgebraElement {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl LieAlgebraElement {
    pub fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Self {
        Self { c1, c2, c3, c4 }
    }

    pub fn basis(j: usize) -> Self {
        let mut c = [0.0; 4];
        c[j - 1] = 1.0;
        Self::from_array(c)
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self { c1: c[0], c2: c[1], c3: c[2], c4: c[3] }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.c1, self.c2, self.c3, self.c4]
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// `(g·u)(x) = e^{iγ} e^{iv(x−a)} μ u(μ(x−a))` for a sampled field.
///
/// Pure translations are done with a Fourier phase; rescalings evaluate the
/// trigonometric interpolant at `μ(x−a)` by a chirp-z transform. Points
/// `μ(x−a)` outside the box read zero rather than a periodic image, so for
/// `μ > 1` the field is treated as vanishing off the box.
pub fn act(g: &GroupElement, u: &WaveField) -> WaveField {
    let grid = *u.grid();
    let resampled: Vec<C64> = if g.mu == 1.0 {
        u.translate(g.a).into_values()
    } else {
        let (lo, hi) = (grid.x_min(), grid.x_min() + grid.domain_length());
        let mut values = u.resample_affine(g.mu, -g.mu * g.a);
        for (k, z) in values.iter_mut().enumerate() {
            let y = g.mu * (grid.x(k) - g.a);
            if y < lo || y >= hi {
                *z = C64::new(0.0, 0.0);
            }
        }
        values
    };
    let values = resampled
        .into_iter()
        .enumerate()
        .map(|(k, z)| g.frame(grid.x(k)).0 * z)
        .collect();
    WaveField::from_raw(grid, values)
}

/// `X·u = c₁(−∂x u) + c₂(ixu) + c₃(iu) + c₄ ∂x(xu)`.
///
/// `∂x(xu)` is evaluated as `u + x∂x u`, which avoids differentiating the
/// non-periodic product `xu`.
pub fn lie_apply(x: &LieAlgebraElement, u: &WaveField) -> WaveField {
    let du = u.derivative();
    let values = u
        .values()
        .iter()
        .zip(du.values())
        .enumerate()
        .map(|(k, (&z, &dz))| {
            let xk = u.grid().x(k);
            -x.c1 * dz + C64::i() * (x.c2 * xk + x.c3) * z + x.c4 * (z + xk * dz)
        })
        .collect();
    WaveField::from_raw(*u.grid(), values)
}

pub fn soliton_profile(grid: Grid) -> WaveField {
    WaveField::from_real_fn(grid, sech)
}

/// Parameters of the exact `V = 0` solution started from `g0·η`.
pub fn free_soliton_parameters(g0: &GroupElement, t: f64) -> GroupElement {
    GroupElement {
        a: g0.a + g0.v * t,
        v: g0.v,
        gamma: g0.gamma + 0.5 * (g0.mu * g0.mu + g0.v * g0.v) * t,
        mu: g0.mu,
    }
}

/// Exact free-soliton solution `u(·, t) = g(t)·η` of the `V = 0` equation.
pub fn free_soliton(g0: &GroupElement, t: f64, grid: Grid) -> WaveField {
    free_soliton_parameters(g0, t).soliton(grid)
}

/// `eⱼ·η` for `j = 1..=4`, in closed form.
pub fn tangent_basis(grid: Grid) -> [WaveField; 4] {
    tangent_basis_at(&GroupElement::identity(), grid)
}

/// `g·(eⱼ·η)` for `j = 1..=4`, in closed form.
pub fn tangent_basis_at(g: &GroupElement, grid: Grid) -> [WaveField; 4] {
    let e1 = |y: f64| C64::new(sech(y) * y.tanh(), 0.0);
    let e2 = |y: f64| C64::new(0.0, y * sech(y));
    let e3 = |y: f64| C64::new(0.0, sech(y));
    let e4 = |y: f64| C64::new(sech(y) * (1.0 - y * y.tanh()), 0.0);
    [
        g.act_on_profile(grid, e1),
        g.act_on_profile(grid, e2),
        g.act_on_profile(grid, e3),
        g.act_on_profile(grid, e4),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &GroupElement, b: &GroupElement, tol: f64) -> bool {
        a.to_array().iter().zip(b.to_array()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_laws() {
        let e = GroupElement::identity();
        assert_eq!(e.to_array(), [0.0, 0.0, 0.0, 1.0]);
        let g = GroupElement::new(1.0, 2.0, 3.0, 2.0).unwrap();
        assert_eq!(e.multiply(&g), g);
        assert_eq!(g.multiply(&e), g);
    }

    #[test]
    fn multiply_by_hand() {
        let g = GroupElement::new(1.0, 2.0, 0.0, 2.0).unwrap();
        let h = GroupElement::new(2.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(g.multiply(&h).to_array(), [2.0, 4.0, 2.0, 2.0]);
    }

    #[test]
    fn inverses() {
        let e = GroupElement::identity();
        assert_eq!(e.inverse(), e);
        let phase = GroupElement::new(0.0, 0.0, 0.8, 1.0).unwrap();
        assert_eq!(phase.inverse().to_array(), [0.0, 0.0, -0.8, 1.0]);
        let g = GroupElement::new(1.0, 2.0, 0.0, 2.0).unwrap();
        assert!(close(&g.multiply(&g.inverse()), &e, 1e-14));
        assert!(close(&g.inverse().multiply(&g), &e, 1e-14));
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(GroupElement::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(GroupElement::new(f64::NAN, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn act_translates_soliton() {
        let grid = Grid::new(1536, 60.0).unwrap();
        let eta = soliton_profile(grid);
        let g = GroupElement::new(1.3, 0.0, 0.0, 1.0).unwrap();
        let moved = act(&g, &eta);
        let exact = WaveField::from_real_fn(grid, |x| sech(x - 1.3));
        assert!((&moved - &exact).max_abs() < 1e-12);
        assert_eq!(act(&GroupElement::identity(), &eta), eta.translate(0.0));
    }

    #[test]
    fn act_matches_closed_form_with_scaling() {
        let grid = Grid::new(1024, 80.0).unwrap();
        let eta = soliton_profile(grid);
        let g = GroupElement::new(-0.7, 0.4, 1.1, 1.3).unwrap();
        let numeric = act(&g, &eta);
        let exact = g.soliton(grid);
        assert!((&numeric - &exact).max_abs() < 1e-10);
        assert!((numeric.l2_norm_sq() - 1.3 * 2.0).abs() < 1e-8 * 2.6);
    }

    #[test]
    fn strong_compression_sees_no_periodic_images() {
        // At μ = 2 the edge point x = −40 maps to −80, an image of the peak.
        let grid = Grid::new(1024, 80.0).unwrap();
        let g = GroupElement::new(0.5, 0.0, 0.0, 2.0).unwrap();
        let numeric = act(&g, &soliton_profile(grid));
        assert!((&numeric - &g.soliton(grid)).max_abs() < 1e-10);
    }

    #[test]
    fn lie_apply_examples() {
        let grid = Grid::new(1536, 60.0).unwrap();
        let eta = soliton_profile(grid);
        let ie = lie_apply(&LieAlgebraElement::basis(3), &eta);
        assert!((&ie - &eta.scale(C64::i())).max_abs() < 1e-15);
        let e1 = lie_apply(&LieAlgebraElement::basis(1), &eta);
        let exact = WaveField::from_real_fn(grid, |x| sech(x) * x.tanh());
        assert!((&e1 - &exact).max_abs() < 1e-8);
        let e4 = lie_apply(&LieAlgebraElement::basis(4), &eta);
        let d = eta.derivative();
        let exact = eta.map(|x, z| z + x * d.values()[((x - grid.x_min()) / grid.spacing()).round() as usize]);
        assert!((&e4 - &exact).max_abs() < 1e-8);
        let closed = tangent_basis(grid);
        for j in 1..=4 {
            let numeric = lie_apply(&LieAlgebraElement::basis(j), &eta);
            assert!((&numeric - &closed[j - 1]).max_abs() < 1e-8, "basis {j}");
        }
    }

    #[test]
    fn soliton_profile_moments() {
        let grid = Grid::new(1536, 60.0).unwrap();
        let eta = soliton_profile(grid);
        assert_eq!(eta.values()[768].re, 1.0);
        assert!((eta.l2_norm_sq() - 2.0).abs() < 1e-10);
        let x2 = eta.map(|x, z| x * x * z * z).integrate().re;
        assert!((x2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10);
    }

    #[test]
    fn free_soliton_examples() {
        let grid = Grid::new(1024, 60.0).unwrap();
        let g0 = GroupElement::new(0.5, 0.3, 0.2, 1.2).unwrap();
        assert_eq!(free_soliton(&g0, 0.0, grid), g0.soliton(grid));
        let u = free_soliton(&GroupElement::identity(), 1.0, grid);
        let exact = WaveField::from_fn(grid, |x| C64::from_polar(sech(x), 0.5));
        assert!((&u - &exact).max_abs() < 1e-14);
        for t in [0.0, 1.0, 3.5] {
            let m = free_soliton(&g0, t, grid).l2_norm_sq();
            assert!((m - 2.4).abs() < 1e-10);
        }
    }

    #[test]
    fn free_soliton_solves_the_free_equation() {
        // i u_t + ½ u_xx + |u|² u = 0 with a centred time difference.
        let grid = Grid::new(1024, 60.0).unwrap();
        let g0 = GroupElement::new(-1.0, 0.5, 0.0, 1.0).unwrap();
        let (t, dt) = (0.7, 1e-4);
        let up = free_soliton(&g0, t + dt, grid);
        let um = free_soliton(&g0, t - dt, grid);
        let u = free_soliton(&g0, t, grid);
        let ut = &(&up - &um) * (0.5 / dt);
        let uxx = u.second_derivative();
        let res = u.map(|x, z| {
            let k = ((x - grid.x_min()) / grid.spacing()).round() as usize;
            C64::i() * ut.values()[k] + 0.5 * uxx.values()[k] + z * z.norm_sqr()
        });
        assert!(res.l2_norm_sq().sqrt() < 1e-6);
    }
}
