//! Symplectically orthogonal decomposition `u = g·(η + w)`.
//!
//! `g(u)` is defined by the four conditions `ω(g⁻¹·u − η, eⱼ·η) = 0`. Using
//! `ω(g·x, g·y) = μ(g) ω(x, y)` they are evaluated on the original grid as
//! `ω(u, g·(eⱼη))/μ − ω(η, eⱼη)`, where `g·(eⱼη)` is known in closed form,
//! so the Newton iteration never resamples `u`.

use nalgebra::{Matrix4, Vector4};

use crate::grid::{sech, Grid, WaveField, C64};
use crate::group::{act, tangent_basis, GroupElement, LieAlgebraElement};
use crate::potential::Potential;
use crate::quadrature::UniformRule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    /// Stop when every pairing residual is below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_iterations: 50, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub g: GroupElement,
    /// `g⁻¹·u − η`
    pub w: WaveField,
    /// Achieved `ω(w, eⱼη)`, `j = 1..=4`.
    pub ortho_residual: [f64; 4],
    pub newton_iters: usize,
}

impl Decomposition {
    pub fn ortho_max(&self) -> f64 {
        self.ortho_residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
}

/// Precomputed tangent data for one grid.
#[derive(Debug, Clone)]
pub struct Modulator {
    grid: Grid,
    eta: WaveField,
    basis: [WaveField; 4],
    gram: Matrix4<f64>,
    /// `ω(η, eⱼη)` as computed by the windowed pairing.
    base: [f64; 4],
    pub options: ExtractOptions,
}

/// `sech` is below `1e-17` past this.
const TAIL: f64 = 40.0;

impl Modulator {
    pub fn new(grid: Grid) -> Self {
        let eta = WaveField::from_real_fn(grid, sech);
        let basis = tangent_basis(grid);
        let gram = Matrix4::from_fn(|j, k| basis[j].symplectic_pairing(&basis[k]).unwrap());
        let mut m = Self { grid, eta, basis, gram, base: [0.0; 4], options: ExtractOptions::default() };
        m.base = m.raw_pairings(m.eta.values(), &GroupElement::identity());
        m
    }

    pub fn with_options(mut self, options: ExtractOptions) -> Self {
        self.options = options;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eta(&self) -> &WaveField {
        &self.eta
    }

    /// `eⱼη` on the grid.
    pub fn basis(&self) -> &[WaveField; 4] {
        &self.basis
    }

    /// `ω(eⱼη, eₖη)` assembled by quadrature.
    pub fn gram(&self) -> &Matrix4<f64> {
        &self.gram
    }

    /// `ω(u, g·(eⱼη)) / μ` summed over the window where `g·η` is not negligible.
    fn raw_pairings(&self, u: &[C64], g: &GroupElement) -> [f64; 4] {
        let dx = self.grid.spacing();
        let x0 = self.grid.x_min();
        let n = self.grid.n_points();
        let reach = TAIL / g.mu;
        let lo = (((g.a - reach - x0) / dx).ceil().max(0.0) as usize).min(n);
        let hi = (((g.a + reach - x0) / dx).floor().max(-1.0) + 1.0).min(n as f64) as usize;
        let mut acc = [0.0; 4];
        for (k, z) in u.iter().enumerate().take(hi).skip(lo) {
            let x = x0 + k as f64 * dx;
            let y = g.mu * (x - g.a);
            let s = sech(y);
            let t = y.tanh();
            // Im(z · conj(e^{iθ} μ p)) with θ = γ + v(x−a)
            let rot = z * C64::from_polar(g.mu, -(g.gamma + g.v * (x - g.a)));
            let (re, im) = (rot.re, rot.im);
            acc[0] += im * s * t; // p₁ = sech·tanh (real)
            acc[1] += -re * y * s; // p₂ = i y sech
            acc[2] += -re * s; // p₃ = i sech
            acc[3] += im * s * (1.0 - y * t); // p₄ = (y sech)′ (real)
        }
        acc.map(|v| v * dx / g.mu)
    }

    /// The four orthogonality conditions `ω(g⁻¹·u − η, eⱼη)` as functions of `g`.
    pub fn residual(&self, u: &WaveField, g: &GroupElement) -> [f64; 4] {
        let raw = self.raw_pairings(u.values(), g);
        std::array::from_fn(|j| raw[j] - self.base[j])
    }

    /// Newton solve for `g(u)` only; no resampling of `u`.
    pub fn locate(&self, u: &WaveField, guess: &GroupElement) -> Result<(GroupElement, usize)> {
        if !u.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let opts = self.options;
        let mut p = guess.to_array();
        let mut residual = f64::INFINITY;
        for iter in 0..=opts.max_iterations {
            let g = GroupElement::from_array(p);
            let f = self.residual(u, &g);
            residual = f.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
            if !residual.is_finite() {
                break;
            }
            if residual <= opts.tolerance {
                return Ok((g, iter));
            }
            if iter == opts.max_iterations {
                break;
            }
            let mut jac = Matrix4::zeros();
            for k in 0..4 {
                let step = opts.fd_step * p[k].abs().max(1.0);
                let mut q = p;
                q[k] += step;
                let fq = self.residual(u, &GroupElement::from_array(q));
                for j in 0..4 {
                    jac[(j, k)] = (fq[j] - f[j]) / step;
                }
            }
            let Some(delta) = jac.lu().solve(&Vector4::from(f)) else {
                break;
            };
            let mut damp = 1.0;
            while p[3] - damp * delta[3] <= 0.0 {
                damp *= 0.5;
            }
            for k in 0..4 {
                p[k] -= damp * delta[k];
            }
        }
        Err(Error::NoConvergence { iterations: opts.max_iterations, residual })
    }

    /// Full decomposition `u = g·(η + w)` with the residual `w` resampled.
    pub fn extract(&self, u: &WaveField, guess: &GroupElement) -> Result<Decomposition> {
        let (g, newton_iters) = self.locate(u, guess)?;
        let w = &act(&g.inverse(), u) - &self.eta;
        let ortho_residual = std::array::from_fn(|j| w.symplectic_pairing(&self.basis[j]).unwrap());
        Ok(Decomposition { g, w, ortho_residual, newton_iters })
    }

    /// Symplectic projection onto `T_ηM`: the `X` with `ω(u − Xη, Yη) = 0` for all `Y`.
    pub fn project_tangent(&self, u: &WaveField) -> Result<LieAlgebraElement> {
        let mut rhs = Vector4::zeros();
        for k in 0..4 {
            rhs[k] = u.symplectic_pairing(&self.basis[k])?;
        }
        // Σⱼ cⱼ ω(eⱼη, eₖη) = ω(u, eₖη)
        let c = self
            .gram
            .transpose()
            .lu()
            .solve(&rhs)
            .expect("tangent Gram matrix is singular; grid too coarse or box too small");
        Ok(LieAlgebraElement::new(c[0], c[1], c[2], c[3]))
    }
}

/// One-shot extraction on the field's own grid.
pub fn extract(u: &WaveField, guess: &GroupElement) -> Result<Decomposition> {
    Modulator::new(*u.grid()).extract(u, guess)
}

/// `α = ½∫V(x/μ+a)η² − ½∫V′(x/μ+a)(x/μ)η²`, `β = (1/2μ)∫V′(x/μ+a)η²`.
pub fn alpha_beta<P: Potential + ?Sized>(pot: &P, a: f64, mu: f64) -> AlphaBeta {
    let rule = UniformRule::for_sech_kernel(1.0);
    let (mut s_v, mut s_xd, mut s_d) = (0.0, 0.0, 0.0);
    for &x in rule.nodes() {
        let e2 = sech(x).powi(2);
        let (v, dv) = pot.value_d1(x / mu + a);
        s_v += v * e2;
        s_xd += dv * (x / mu) * e2;
        s_d += dv * e2;
    }
    let w = rule.weight();
    AlphaBeta { alpha: 0.5 * w * (s_v - s_xd), beta: w * s_d / (2.0 * mu) }
}

/// `X₀ = (−ȧ+v)e₁ + (−v̇−β)e₂ + (−γ̇ + ȧv − ½v² + ½ − α)e₃ − μ̇ e₄`.
pub fn generator_deficit(g: &GroupElement, g_dot: [f64; 4], ab: &AlphaBeta) -> LieAlgebraElement {
    let [a_dot, v_dot, gamma_dot, mu_dot] = g_dot;
    let v = g.v;
    LieAlgebraElement::new(
        -a_dot + v,
        -v_dot - ab.beta,
        -gamma_dot + a_dot * v - 0.5 * v * v + 0.5 - ab.alpha,
        -mu_dot,
    )
}

/// `‖w‖²_{L²} − 2(1−μ)/μ`; vanishes for orthogonal `w` when `‖u‖² = 2`.
pub fn mass_identity_gap(w: &WaveField, mu: f64) -> f64 {
    w.l2_norm_sq() - 2.0 * (1.0 - mu) / mu
}

/// Time derivatives of a sampled parameter path: centred differences inside,
/// one-sided at the ends.
pub fn parameter_rates(times: &[f64], params: &[GroupElement]) -> Vec<[f64; 4]> {
    let n = times.len();
    assert_eq!(n, params.len());
    if n < 2 {
        return vec![[0.0; 4]; n];
    }
    (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let dt = times[hi] - times[lo];
            let (p, q) = (params[lo].to_array(), params[hi].to_array());
            std::array::from_fn(|d| (q[d] - p[d]) / dt)
        })
        .collect()
}
