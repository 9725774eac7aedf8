//! Structural checks shared by the property tests and the acceptance suite.
//! Each returns the measured error so callers decide how to report it.
#![allow(dead_code)]

use std::ops::ControlFlow;

use solitonlab::effective::{effective_hamiltonian, effective_rhs, integrate_ode, EffectiveModel, ModState};
use solitonlab::group::{act, free_soliton, lie_apply};
use solitonlab::modulation::Modulator;
use solitonlab::spectral::{LinearizedOperator, OperatorKind};
use solitonlab::{GroupElement, Grid, LieAlgebraElement, PotentialSpec, WaveField, C64};

pub fn wide_grid() -> Grid {
    Grid::new(8192, 240.0).unwrap()
}

pub fn soliton_grid() -> Grid {
    Grid::new(2048, 80.0).unwrap()
}

/// Smooth, rapidly decaying test field.
pub fn bump(grid: Grid, centre: f64, width: f64, k: f64, c: C64) -> WaveField {
    WaveField::from_fn(grid, |x| {
        let y = (x - centre) / width;
        c * C64::from_polar(1.0 / y.cosh(), k * x)
    })
}

fn l2_distance(u: &WaveField, v: &WaveField) -> f64 {
    (u - v).l2_norm_sq().sqrt()
}

pub fn associativity_error(g1: &GroupElement, g2: &GroupElement, g3: &GroupElement) -> f64 {
    let left = g1.multiply(g2).multiply(g3).to_array();
    let right = g1.multiply(&g2.multiply(g3)).to_array();
    left.iter().zip(&right).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max)
}

pub fn inverse_error(g: &GroupElement) -> f64 {
    let id = GroupElement::identity().to_array();
    [g.multiply(&g.inverse()), g.inverse().multiply(g)]
        .iter()
        .flat_map(|p| p.to_array().into_iter().zip(id).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// `‖g·(g₂·u) − (g g₂)·u‖_{L²}`.
pub fn homomorphism_error(g: &GroupElement, g2: &GroupElement, u: &WaveField) -> f64 {
    l2_distance(&act(g, &act(g2, u)), &act(&g.multiply(g2), u))
}

/// `act` on `η` against the closed-form orbit point.
pub fn action_oracle_error(g: &GroupElement, grid: Grid) -> f64 {
    let eta = WaveField::from_real_fn(grid, |x| 1.0 / x.cosh());
    let expect = WaveField::from_fn(grid, |x| {
        let y = g.mu * (x - g.a);
        C64::from_polar(g.mu / y.cosh(), g.gamma + g.v * (x - g.a))
    });
    l2_distance(&act(g, &eta), &expect)
}

/// Relative defect in `ω(g·u, g·w) = μ ω(u, w)`.
pub fn conformality_error(g: &GroupElement, u: &WaveField, w: &WaveField) -> f64 {
    let before = u.symplectic_pairing(w).unwrap();
    let after = act(g, u).symplectic_pairing(&act(g, w)).unwrap();
    (after - g.mu * before).abs() / (g.mu * before).abs().max(1e-12)
}

/// Ratio of the forward-difference errors at `s` and `s/2` for `exp(s eⱼ)`.
pub fn lie_derivative_ratio(j: usize, u: &WaveField, s: f64) -> f64 {
    let generator = lie_apply(&LieAlgebraElement::basis(j), u);
    let err = |s: f64| {
        let moved = act(&GroupElement::exp_basis(j, s), u);
        let quotient = &(&moved - u) * (1.0 / s);
        l2_distance(&quotient, &generator)
    };
    err(s) / err(0.5 * s)
}

/// `‖i∂ₜu + ½u_xx + |u|²u‖_{L²}` for the exact free soliton, `∂ₜ` by centred difference.
pub fn free_soliton_residual(g0: &GroupElement, t: f64, dt: f64, grid: Grid) -> f64 {
    let u = free_soliton(g0, t, grid);
    let ut = &(&free_soliton(g0, t + dt, grid) - &free_soliton(g0, t - dt, grid)) * (0.5 / dt);
    let nonlinear = u.map(|_, z| z * z.norm_sqr());
    let residual = &(&(&ut * C64::i()) + &(&u.second_derivative() * 0.5)) + &nonlinear;
    residual.l2_norm_sq().sqrt()
}

/// Parameter error of `extract(g·η)` from a nearby guess.
pub fn extraction_error(m: &Modulator, g: &GroupElement, guess: &GroupElement) -> f64 {
    let u = g.soliton(*m.grid());
    let d = m.extract(&u, guess).unwrap();
    d.g.to_array().iter().zip(g.to_array()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Simpson rule on `[−lim, lim]`; independent of the periodic grid quadrature.
fn simpson(f: impl Fn(f64) -> f64, lim: f64, n: usize) -> f64 {
    let h = 2.0 * lim / n as f64;
    let sum: f64 = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            w * f(-lim + k as f64 * h)
        })
        .sum();
    sum * h / 3.0
}

/// `P(i f η)` for real `f = p₀ + p₁x + p₂x² + p₃ sin(kx)`, against
/// `c₂ = ∫f sech² tanh`, `c₃ = ∫f sech²(1 − x tanh)` and `c₁ = c₄ = 0`.
pub fn projection_error(m: &Modulator, p: [f64; 4], k: f64) -> f64 {
    let f = |x: f64| p[0] + p[1] * x + p[2] * x * x + p[3] * (k * x).sin();
    let u = m.eta().map(|x, z| C64::i() * f(x) * z);
    let c = m.project_tangent(&u).unwrap();
    let s2 = |x: f64| (1.0 / x.cosh()).powi(2);
    let c2 = simpson(|x| f(x) * s2(x) * x.tanh(), 30.0, 60_000);
    let c3 = simpson(|x| f(x) * s2(x) * (1.0 - x * x.tanh()), 30.0, 60_000);
    [c.c1.abs(), c.c4.abs(), (c.c2 - c2).abs(), (c.c3 - c3).abs()].into_iter().fold(0.0, f64::max)
}

/// Central-difference gradient of the effective Hamiltonian.
fn hamiltonian_gradient(s: &ModState, pot: &PotentialSpec, step: f64) -> [f64; 4] {
    let p = s.to_array();
    std::array::from_fn(|j| {
        let mut hi = p;
        let mut lo = p;
        hi[j] += step;
        lo[j] -= step;
        (effective_hamiltonian(&ModState::from_array(hi), pot) - effective_hamiltonian(&ModState::from_array(lo), pot))
            / (2.0 * step)
    })
}

/// Componentwise gap between `effective_rhs` and the Hamiltonian vector field
/// `(f_v/μ, −f_a/μ − v f_γ/μ, v f_v/μ − f_μ, f_γ)` built from finite differences.
pub fn hamiltonian_field_error(s: &ModState, pot: &PotentialSpec) -> f64 {
    let [fa, fv, fg, fm] = hamiltonian_gradient(s, pot, 1e-5);
    let expect = [fv / s.mu, -fa / s.mu - s.v * fg / s.mu, s.v * fv / s.mu - fm, fg];
    let rhs = effective_rhs(s, pot);
    rhs.iter().zip(expect).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The γ slot alone: `γ̇ = v f_v/μ − f_μ`.
pub fn gamma_rate_error(s: &ModState, pot: &PotentialSpec) -> f64 {
    let [_, fv, _, fm] = hamiltonian_gradient(s, pot, 1e-5);
    (effective_rhs(s, pot)[2] - (s.v * fv / s.mu - fm)).abs()
}

/// Run forward for `t`, flip `v`, run forward again; the result should be the
/// start with `v` reversed.
pub fn time_reversal_error(s0: &ModState, pot: &PotentialSpec, t: f64, dt: f64) -> f64 {
    let model = EffectiveModel(pot);
    let forward = *integrate_ode(&model, *s0, t, dt).last().unwrap();
    let flipped = ModState { v: -forward.v, ..forward };
    let back = *integrate_ode(&model, flipped, t, dt).last().unwrap();
    (back.a - s0.a).abs().max((back.v + s0.v).abs())
}

/// `|⟨Lf, g⟩ − ⟨f, Lg⟩|` for real fields.
pub fn self_adjointness_error(kind: OperatorKind, f: &WaveField, g: &WaveField) -> f64 {
    let op = LinearizedOperator::new(kind, *f.grid());
    let lf = op.apply(f).unwrap();
    let lg = op.apply(g).unwrap();
    (lf.inner(g).unwrap() - f.inner(&lg).unwrap()).abs()
}

/// Observer that stops a solver run on the first non-finite field.
pub fn finite_guard(_: f64, u: &WaveField) -> ControlFlow<()> {
    if u.is_finite() {
        ControlFlow::Continue(())
    } else {
        ControlFlow::Break(())
    }
}
