//! Finite-dimensional modulation dynamics.
//!
//! Two models for the soliton parameters `(a, v, γ, μ)`:
//!
//! * the Hamiltonian flow of the GP energy restricted to the soliton manifold,
//!   `H = μv²/2 − μ³/6 + ½μ² (V ∗ sech²(μ·))(a)`, under the restricted form
//!   `μ dv∧da + v dμ∧da + dγ∧dμ`;
//! * Newton's equations `ȧ = v`, `v̇ = −V′(a)`, `γ̇ = ½ + v²/2 − V(a)`.
//!
//! Convolutions are evaluated by a dedicated quadrature in the kernel
//! variable, independent of any PDE grid.

use std::io::Write;

use crate::grid::sech;
use crate::potential::Potential;
use crate::quadrature::UniformRule;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModState {
    pub a: f64,
    pub v: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl ModState {
    pub fn new(a: f64, v: f64, gamma: f64, mu: f64) -> Self {
        Self { a, v, gamma, mu }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.v, self.gamma, self.mu]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        Self { a: p[0], v: p[1], gamma: p[2], mu: p[3] }
    }

    pub fn group_element(&self) -> crate::GroupElement {
        crate::GroupElement::from_array(self.to_array())
    }
}

/// The three convolutions entering the effective flow, at one `(a, μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convolutions {
    /// `∫ sech²(μy) V(a−y) dy`
    pub sech2: f64,
    /// `∫ sech²(μy) V′(a−y) dy`
    pub sech2_d1: f64,
    /// `μ ∫ (μy) sech²(μy) tanh(μy) V(a−y) dy`
    pub moment: f64,
}

pub fn convolutions<P: Potential + ?Sized>(pot: &P, a: f64, mu: f64) -> Convolutions {
    let rule = UniformRule::for_sech_kernel(mu);
    let (mut s0, mut s1, mut sm) = (0.0, 0.0, 0.0);
    for &y in rule.nodes() {
        let z = mu * y;
        let k = sech(z).powi(2);
        let (v, dv) = pot.value_d1(a - y);
        s0 += k * v;
        s1 += k * dv;
        sm += z * k * z.tanh() * v;
    }
    let w = rule.weight();
    Convolutions { sech2: s0 * w, sech2_d1: s1 * w, moment: mu * sm * w }
}

pub fn conv_sech2<P: Potential + ?Sized>(pot: &P, a: f64, mu: f64) -> f64 {
    convolutions(pot, a, mu).sech2
}

pub fn conv_moment<P: Potential + ?Sized>(pot: &P, a: f64, mu: f64) -> f64 {
    convolutions(pot, a, mu).moment
}

/// Right-hand side of the effective-Hamiltonian flow.
pub fn effective_rhs<P: Potential + ?Sized>(s: &ModState, pot: &P) -> [f64; 4] {
    let c = convolutions(pot, s.a, s.mu);
    [
        s.v,
        -0.5 * s.mu * c.sech2_d1,
        0.5 * s.v * s.v + 0.5 * s.mu * s.mu - s.mu * c.sech2 + c.moment,
        0.0,
    ]
}

/// Newton's equations with the `O(h²)` corrections dropped.
pub fn newton_rhs<P: Potential + ?Sized>(s: &ModState, pot: &P) -> [f64; 4] {
    [s.v, -pot.d1(s.a), 0.5 + 0.5 * s.v * s.v - pot.value(s.a), 0.0]
}

/// The GP Hamiltonian restricted to the soliton manifold.
pub fn effective_hamiltonian<P: Potential + ?Sized>(s: &ModState, pot: &P) -> f64 {
    let mu = s.mu;
    0.5 * mu * s.v * s.v - mu.powi(3) / 6.0 + 0.5 * mu * mu * conv_sech2(pot, s.a, mu)
}

/// Hamiltonian vector field of `f` on the soliton manifold, from partials of `f`:
/// `ȧ = f_v/μ`, `v̇ = −f_a/μ − v f_γ/μ`, `γ̇ = v f_v/μ − f_μ`, `μ̇ = f_γ`.
pub fn hamiltonian_vector_field(s: &ModState, grad: [f64; 4]) -> [f64; 4] {
    let [f_a, f_v, f_g, f_m] = grad;
    [
        f_v / s.mu,
        -f_a / s.mu - s.v * f_g / s.mu,
        s.v * f_v / s.mu - f_m,
        f_g,
    ]
}

/// A modulation ODE together with the energy it is expected to conserve.
pub trait ModulationModel: Sync {
    fn name(&self) -> &'static str;
    fn rhs(&self, s: &ModState) -> [f64; 4];
    fn hamiltonian(&self, s: &ModState) -> f64;
}

pub struct EffectiveModel<'p, P: Potential + ?Sized>(pub &'p P);

impl<P: Potential + ?Sized> ModulationModel for EffectiveModel<'_, P> {
    fn name(&self) -> &'static str {
        "effective"
    }
    fn rhs(&self, s: &ModState) -> [f64; 4] {
        effective_rhs(s, self.0)
    }
    fn hamiltonian(&self, s: &ModState) -> f64 {
        effective_hamiltonian(s, self.0)
    }
}

pub struct NewtonModel<'p, P: Potential + ?Sized>(pub &'p P);

impl<P: Potential + ?Sized> ModulationModel for NewtonModel<'_, P> {
    fn name(&self) -> &'static str {
        "newton"
    }
    fn rhs(&self, s: &ModState) -> [f64; 4] {
        newton_rhs(s, self.0)
    }
    /// Point-particle energy `μv²/2 − μ³/6 + μV(a)`.
    fn hamiltonian(&self, s: &ModState) -> f64 {
        0.5 * s.mu * s.v * s.v - s.mu.powi(3) / 6.0 + s.mu * self.0.value(s.a)
    }
}

/// Classical fixed-step RK4 for a time-dependent system. Returns every step,
/// including the initial point. The step is shrunk so that an integer number
/// of steps lands exactly on `t_end`.
pub fn rk4<const D: usize>(
    mut f: impl FnMut(f64, &[f64; D]) -> [f64; D],
    y0: [f64; D],
    t_end: f64,
    dt: f64,
) -> Vec<(f64, [f64; D])> {
    let n = step_count(t_end, dt);
    let h = if n == 0 { 0.0 } else { t_end / n as f64 };
    let mut out = Vec::with_capacity(n + 1);
    let mut y = y0;
    out.push((0.0, y));
    let axpy = |y: &[f64; D], k: &[f64; D], s: f64| -> [f64; D] {
        let mut r = *y;
        r.iter_mut().zip(k).for_each(|(r, k)| *r += s * k);
        r
    };
    for i in 0..n {
        let t = i as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &axpy(&y, &k3, h));
        for d in 0..D {
            y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        out.push(((i + 1) as f64 * h, y));
    }
    out
}

pub(crate) fn step_count(t_end: f64, dt: f64) -> usize {
    assert!(dt > 0.0 && t_end >= 0.0, "need dt > 0 and t_end ≥ 0");
    (t_end / dt - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModulationTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModState>,
    /// Value of the model's Hamiltonian at each recorded state.
    pub h_eff: Vec<f64>,
}

impl ModulationTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&ModState> {
        self.states.last()
    }

    /// Linear interpolation between recorded steps; clamps outside the range.
    pub fn state_at(&self, t: f64) -> ModState {
        let n = self.times.len();
        assert!(n > 0, "empty trajectory");
        if n == 1 || t <= self.times[0] {
            return self.states[0];
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1];
        }
        let j = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        let (p, q) = (self.states[j - 1].to_array(), self.states[j].to_array());
        ModState::from_array(std::array::from_fn(|d| p[d] + w * (q[d] - p[d])))
    }

    /// Every `stride`-th row (and always the last) as CSV `t,a,v,gamma,mu,H_eff`,
    /// preceded by a `# ` comment line.
    pub fn write_csv<W: Write>(&self, out: W, comment: &str, stride: usize) -> Result<()> {
        let mut out = out;
        writeln!(out, "# {comment}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "a", "v", "gamma", "mu", "H_eff"])?;
        let stride = stride.max(1);
        for (i, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            if i % stride != 0 && i + 1 != self.len() {
                continue;
            }
            wtr.write_record([t, &s.a, &s.v, &s.gamma, &s.mu, &self.h_eff[i]].map(|x| x.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Integrates a modulation model with RK4, recording every step.
pub fn integrate_ode(model: &dyn ModulationModel, s0: ModState, t_end: f64, dt: f64) -> ModulationTrajectory {
    let steps = rk4(|_, y| model.rhs(&ModState::from_array(*y)), s0.to_array(), t_end, dt);
    let mut traj = ModulationTrajectory::default();
    for (t, y) in steps {
        let s = ModState::from_array(y);
        traj.times.push(t);
        traj.h_eff.push(model.hamiltonian(&s));
        traj.states.push(s);
    }
    traj
}

/// One instance of the perturbed-versus-exact comparison
/// `ȧ = v + ε₁, v̇ = h f(ha) + ε₂` against the unperturbed system.
pub struct OdeCompare<'a> {
    pub h: f64,
    pub a0: f64,
    pub v0: f64,
    pub force: &'a dyn Fn(f64) -> f64,
    pub eps1: &'a dyn Fn(f64) -> f64,
    pub eps2: &'a dyn Fn(f64) -> f64,
    pub t_end: f64,
    pub dt: f64,
}

impl OdeCompare<'_> {
    /// `(sup |a − ā|, sup |v − v̄|)` over the recorded steps.
    pub fn run(&self) -> (f64, f64) {
        let h = self.h;
        let perturbed = rk4(
            |t, y| [y[1] + (self.eps1)(t), h * (self.force)(h * y[0]) + (self.eps2)(t)],
            [self.a0, self.v0],
            self.t_end,
            self.dt,
        );
        let exact = rk4(|_, y| [y[1], h * (self.force)(h * y[0])], [self.a0, self.v0], self.t_end, self.dt);
        perturbed.iter().zip(&exact).fold((0.0, 0.0), |(ga, gv), ((_, p), (_, q))| {
            (ga.max((p[0] - q[0]).abs()), gv.max((p[1] - q[1]).abs()))
        })
    }
}

/// The two bounds `(h^{2−2δ} log(1/h), h^{3−2δ} log(1/h))`.
pub fn ode_compare_bounds(h: f64, delta: f64) -> (f64, f64) {
    let l = (1.0 / h).ln();
    (h.powf(2.0 - 2.0 * delta) * l, h.powf(3.0 - 2.0 * delta) * l)
}

/// The admissible horizon `δ h⁻¹ log(1/h)`.
pub fn log_time_window(h: f64, delta: f64) -> f64 {
    delta * (1.0 / h).ln() / h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PotentialSpec;

    struct Constant(f64);
    impl Potential for Constant {
        fn value(&self, _: f64) -> f64 {
            self.0
        }
        fn d1(&self, _: f64) -> f64 {
            0.0
        }
        fn d2(&self, _: f64) -> f64 {
            0.0
        }
        fn d3(&self, _: f64) -> f64 {
            0.0
        }
    }

    /// Brute-force convolution on a much finer, wider rule.
    fn oracle(pot: &dyn Potential, a: f64, mu: f64, kernel: impl Fn(f64) -> f64) -> f64 {
        let rule = UniformRule::symmetric(40.0 / mu, 0.05 / (8.0 * mu));
        rule.integrate(|y| kernel(y) * pot.value(a - y))
    }

    #[test]
    fn constant_potential_convolutions() {
        let c = convolutions(&Constant(0.7), 1.3, 1.0);
        assert!((c.sech2 - 1.4).abs() < 1e-13);
        assert!(c.sech2_d1.abs() < 1e-15);
        assert!((c.moment - 0.7).abs() < 1e-13);
        let zero = convolutions(&PotentialSpec::zero(), 0.3, 1.0);
        assert_eq!((zero.sech2, zero.moment), (0.0, 0.0));
    }

    #[test]
    fn convolution_matches_fine_oracle() {
        let pot = PotentialSpec::sech2_well(-1.0, 0.2).unwrap();
        for &(a, mu) in &[(0.0, 1.0), (-3.0, 1.0), (2.5, 0.7)] {
            let c = convolutions(&pot, a, mu);
            let o = oracle(&pot, a, mu, |y| sech(mu * y).powi(2));
            assert!((c.sech2 - o).abs() < 1e-8, "{a} {mu}");
            let om = oracle(&pot, a, mu, |y| mu * (mu * y) * sech(mu * y).powi(2) * (mu * y).tanh());
            assert!((c.moment - om).abs() < 1e-8);
        }
    }

    #[test]
    fn taylor_expansion_of_force() {
        // ½ (sech² ∗ V′)(a) = V′(a) + V‴(a) π²/24 + O(h⁵); the remainder
        // constant for W = −sech² is about 6, so check the scaling.
        let pi2 = std::f64::consts::PI.powi(2);
        let sup_remainder = |h: f64| {
            let pot = PotentialSpec::sech2_well(-1.0, h).unwrap();
            (-400..=400)
                .map(|i| i as f64 * 0.05 / h)
                .map(|a| 0.5 * convolutions(&pot, a, 1.0).sech2_d1 - pot.d1(a) - pot.d3(a) * pi2 / 24.0)
                .fold(0.0, |m: f64, r| m.max(r.abs()))
        };
        let (r1, r2) = (sup_remainder(0.1), sup_remainder(0.05));
        assert!(r2 < 2e-6, "{r2}");
        let order = (r1 / r2).log2();
        assert!((order - 5.0).abs() < 0.1, "order {order}");
        let pot = PotentialSpec::sech2_well(-1.0, 0.05).unwrap();
        for &a in &[0.0, 20.0, 40.0] {
            let r = 0.5 * convolutions(&pot, a, 1.0).sech2_d1 - pot.d1(a) - pot.d3(a) * pi2 / 24.0;
            assert!(r.abs() < 1e-6, "a = {a}: {r}");
        }
    }

    struct Reflected<'a>(&'a dyn Potential);
    impl Potential for Reflected<'_> {
        fn value(&self, x: f64) -> f64 {
            self.0.value(-x)
        }
        fn d1(&self, x: f64) -> f64 {
            -self.0.d1(-x)
        }
        fn d2(&self, x: f64) -> f64 {
            self.0.d2(-x)
        }
        fn d3(&self, x: f64) -> f64 {
            -self.0.d3(-x)
        }
    }

    #[test]
    fn moment_reflection_symmetry() {
        // Asymmetric potential: a tabulated, shifted well.
        let values = (0..=400).map(|k| -sech(-10.0 + 0.05 * k as f64 - 0.6).powi(2)).collect();
        let pot = PotentialSpec::new(crate::Profile::Tabulated { y0: -10.0, dy: 0.05, values }, 1.0, 0.3).unwrap();
        for a in [-2.0, 0.4, 1.7] {
            let lhs = conv_moment(&pot, a, 1.0);
            let rhs = conv_moment(&Reflected(&pot), -a, 1.0);
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
            assert!(lhs.abs() > 1e-3);
        }
    }

    #[test]
    fn rhs_examples() {
        let zero = PotentialSpec::zero();
        let s = ModState::new(0.4, 0.8, 0.1, 1.0);
        let r = effective_rhs(&s, &zero);
        assert_eq!(r, [0.8, 0.0, 0.5 + 0.32, 0.0]);
        assert_eq!(newton_rhs(&s, &zero), r);

        let well = PotentialSpec::sech2_well(-1.0, 0.2).unwrap();
        let r = effective_rhs(&ModState::new(-3.0, 0.0, 0.0, 1.0), &well);
        let oracle_force = -0.5 * UniformRule::symmetric(40.0, 0.005).integrate(|y| sech(y).powi(2) * well.d1(-3.0 - y));
        assert!((r[1] - oracle_force).abs() < 1e-10);
        assert!(r[1] > 0.0, "attractive well pulls towards the centre");

        let at_centre = effective_rhs(&ModState::new(0.0, 0.0, 0.0, 1.0), &well);
        assert!(at_centre[1].abs() < 1e-15);
        assert_eq!(newton_rhs(&ModState::new(0.0, 0.0, 0.0, 1.0), &well)[1], 0.0);
    }

    #[test]
    fn newton_differs_by_third_derivative_term() {
        let pi2 = std::f64::consts::PI.powi(2);
        for h in [0.1, 0.05] {
            let well = PotentialSpec::sech2_well(-1.0, h).unwrap();
            let a = -0.8 / h;
            let s = ModState::new(a, 0.0, 0.0, 1.0);
            let diff = newton_rhs(&s, &well)[1] - effective_rhs(&s, &well)[1];
            assert!((diff - well.d3(a) * pi2 / 24.0).abs() < 20.0 * h.powi(5));
        }
    }

    #[test]
    fn free_motion_closed_form() {
        let zero = PotentialSpec::zero();
        let traj = integrate_ode(&EffectiveModel(&zero), ModState::new(0.0, 1.0, 0.0, 1.0), 2.0, 1e-3);
        let end = traj.last().unwrap();
        assert!((end.a - 2.0).abs() < 1e-12);
        assert!((end.v - 1.0).abs() < 1e-15);
        assert!((end.gamma - 2.0).abs() < 1e-12);
        assert_eq!(traj.len(), 2001);
    }

    #[test]
    fn effective_hamiltonian_values() {
        let zero = PotentialSpec::zero();
        assert!((effective_hamiltonian(&ModState::new(0.0, 0.0, 0.0, 1.0), &zero) + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn scale_is_conserved_and_rk4_is_fourth_order() {
        let well = PotentialSpec::sech2_well(-1.0, 0.3).unwrap();
        let model = EffectiveModel(&well);
        let s0 = ModState::new(-2.0, 0.1, 0.0, 1.0);
        let t = 3.0;
        let reference = integrate_ode(&model, s0, t, 0.1 / 8.0).last().copied().unwrap();
        let err = |dt: f64| {
            let s = integrate_ode(&model, s0, t, dt).last().copied().unwrap();
            assert_eq!(s.mu, 1.0);
            (s.a - reference.a).abs() + (s.v - reference.v).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn ode_compare_zero_perturbation() {
        let zero = |_: f64| 0.0;
        let force = |x: f64| -x.sin();
        let cmp = OdeCompare { h: 0.1, a0: 1.0, v0: 0.2, force: &force, eps1: &zero, eps2: &zero, t_end: 5.0, dt: 1e-3 };
        assert_eq!(cmp.run(), (0.0, 0.0));
    }

    #[test]
    fn trajectory_interpolation() {
        let traj = ModulationTrajectory {
            times: vec![0.0, 1.0, 2.0],
            states: vec![ModState::new(0.0, 0.0, 0.0, 1.0), ModState::new(1.0, 2.0, 0.0, 1.0), ModState::new(3.0, 2.0, 0.0, 1.0)],
            h_eff: vec![0.0; 3],
        };
        assert_eq!(traj.state_at(0.5).a, 0.5);
        assert_eq!(traj.state_at(1.5).a, 2.0);
        assert_eq!(traj.state_at(9.0).a, 3.0);
    }
}
