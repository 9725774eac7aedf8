//! Linearisation about the ground state `η = sech`:
//! `L± = −½∂² − (2±1)η² + ½`, and `𝓛 = L₊ ⊕ L₋` acting on `(Re w, Im w)`.

use std::f64::consts::PI;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::grid::{sech, Grid, WaveField, C64};
use crate::potential::Potential;
use crate::{Error, Result};

/// `ρ₀ = 9 / (2(12 + π²))`.
pub const RHO0: f64 = 9.0 / (2.0 * (12.0 + PI * PI));
/// `c₂ = (7 + 2ρ₀) / (2ρ₀)`.
pub const C2: f64 = (7.0 + 2.0 * RHO0) / (2.0 * RHO0);
/// Proven lower bound `2ρ₀/(7 + 2ρ₀) ≈ 0.0555` for the constrained form.
pub const COERCIVITY_BOUND: f64 = 1.0 / C2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    LPlus,
    LMinus,
    /// Complex operator `𝓛w = −½w″ − 2η²w − η²w̄ + ½w`.
    CalL,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::LPlus => "Lplus",
            Self::LMinus => "Lminus",
            Self::CalL => "calL",
        }
    }

    /// Coefficient of `η²` in the real operators.
    fn well_depth(self) -> f64 {
        match self {
            Self::LPlus => 3.0,
            Self::LMinus => 1.0,
            Self::CalL => unreachable!("calL is not a scalar Schrödinger operator"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// L²-normalised; positive at the first node with `x > 0`.
    pub vector: WaveField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedOperator {
    pub kind: OperatorKind,
    pub grid: Grid,
}

impl LinearizedOperator {
    pub fn new(kind: OperatorKind, grid: Grid) -> Self {
        Self { kind, grid }
    }

    pub fn apply(&self, w: &WaveField) -> Result<WaveField> {
        if !w.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let dd = w.second_derivative();
        let values = match self.kind {
            OperatorKind::CalL => w
                .values()
                .iter()
                .zip(dd.values())
                .enumerate()
                .map(|(k, (z, d))| {
                    let e2 = sech(self.grid.x(k)).powi(2);
                    -0.5 * d - 2.0 * e2 * z - e2 * z.conj() + 0.5 * z
                })
                .collect(),
            kind => {
                if w.values().iter().any(|z| z.im != 0.0) {
                    return Err(Error::RealOperatorComplexInput(kind.name()));
                }
                let depth = kind.well_depth();
                w.values()
                    .iter()
                    .zip(dd.values())
                    .enumerate()
                    .map(|(k, (z, d))| C64::new(-0.5 * d.re + (0.5 - depth * sech(self.grid.x(k)).powi(2)) * z.re, 0.0))
                    .collect()
            }
        };
        WaveField::new(self.grid, values)
    }

    /// The `count` lowest eigenpairs. For `CalL` the spectra of both blocks
    /// are merged; `L₋` eigenvectors appear as imaginary fields.
    pub fn eigen_extremes(&self, count: usize) -> Result<Vec<EigenPair>> {
        if count > 6 {
            return Err(Error::InvalidConfig(format!("at most 6 eigenpairs, asked for {count}")));
        }
        let mut pairs = match self.kind {
            OperatorKind::CalL => {
                let mut all = lowest_pairs(self.grid, OperatorKind::LPlus, count, C64::new(1.0, 0.0));
                all.extend(lowest_pairs(self.grid, OperatorKind::LMinus, count, C64::i()));
                all
            }
            kind => lowest_pairs(self.grid, kind, count, C64::new(1.0, 0.0)),
        };
        pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
        pairs.truncate(count);
        Ok(pairs)
    }
}

/// Dense spectral second-derivative matrix.
pub fn second_derivative_matrix(grid: Grid) -> DMatrix<f64> {
    let n = grid.n_points();
    let mut d2 = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let col = WaveField::new(grid, e).expect("finite unit vector").second_derivative();
        for (i, z) in col.values().iter().enumerate() {
            d2[(i, j)] = z.re;
        }
    }
    // Exact symmetry up to FFT roundoff.
    (&d2 + d2.transpose()) * 0.5
}

/// Dense matrix of `L₊` or `L₋`.
pub fn operator_matrix(grid: Grid, kind: OperatorKind) -> DMatrix<f64> {
    let depth = kind.well_depth();
    let mut m = second_derivative_matrix(grid) * -0.5;
    for k in 0..grid.n_points() {
        m[(k, k)] += 0.5 - depth * sech(grid.x(k)).powi(2);
    }
    m
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn lowest_pairs(grid: Grid, kind: OperatorKind, count: usize, unit: C64) -> Vec<EigenPair> {
    let (values, vectors) = sorted_eigen(operator_matrix(grid, kind));
    let dx = grid.spacing();
    let probe = grid.n_points() / 2 + 1;
    (0..count.min(values.len()))
        .map(|i| {
            let col = vectors.column(i);
            let norm = (col.norm_squared() * dx).sqrt();
            let sign = if col[probe] < 0.0 { -1.0 } else { 1.0 };
            let samples = col.iter().map(|&c| unit * (sign * c / norm)).collect();
            let vector = WaveField::new(grid, samples).expect("finite eigenvector");
            EigenPair { value: values[i], vector }
        })
        .collect()
}

/// Right-hand side `(π²/12 + x²)η` of the forced equation.
pub fn forced_rhs(grid: Grid) -> WaveField {
    WaveField::from_real_fn(grid, |x| (PI * PI / 12.0 + x * x) * sech(x))
}

/// Grid used for the forced problem when none is given. `f` decays like
/// `x³e^{−|x|}`, so the box must be wider than for `η` itself.
pub fn forced_grid() -> Grid {
    Grid::new(512, 80.0).expect("valid built-in grid")
}

/// Solves `L₊f = (π²/12 + x²)η` with `f` orthogonal to the discrete kernel of `L₊`.
pub fn solve_forced(grid: Grid) -> Result<WaveField> {
    static CACHE: Mutex<Vec<(Grid, WaveField)>> = Mutex::new(Vec::new());
    if let Some((_, f)) = CACHE.lock().unwrap().iter().find(|(g, _)| g.same_as(&grid)) {
        return Ok(f.clone());
    }
    let f = solve_forced_uncached(grid)?;
    CACHE.lock().unwrap().push((grid, f.clone()));
    Ok(f)
}

fn solve_forced_uncached(grid: Grid) -> Result<WaveField> {
    let a = operator_matrix(grid, OperatorKind::LPlus);
    let (values, vectors) = sorted_eigen(a.clone());
    let idx = (0..values.len()).min_by(|&i, &j| values[i].abs().total_cmp(&values[j].abs())).unwrap();
    let kernel: DVector<f64> = vectors.column(idx).into_owned();
    let rhs = DVector::from_iterator(grid.n_points(), forced_rhs(grid).values().iter().map(|z| z.re));
    let projected = &rhs - &kernel * kernel.dot(&rhs);
    let system = a + &kernel * kernel.transpose();
    let sol = system
        .lu()
        .solve(&projected)
        .ok_or_else(|| Error::InvalidGrid("forced system is singular on this grid".into()))?;
    WaveField::new(grid, sol.iter().map(|&r| C64::new(r, 0.0)).collect())
}

/// `w̃ = −(V″(a) / 2μ⁴) f`.
pub fn tilde_w<P: Potential + ?Sized>(a: f64, mu: f64, potential: &P, grid: Grid) -> Result<WaveField> {
    let scale = -potential.d2(a) / (2.0 * mu.powi(4));
    if scale == 0.0 {
        return Ok(WaveField::zeros(grid));
    }
    Ok(&solve_forced(grid)? * scale)
}

/// `⟨𝓛w, w⟩` with the real inner product.
pub fn lyapunov_quadratic(w: &WaveField) -> Result<f64> {
    let lw = LinearizedOperator::new(OperatorKind::CalL, *w.grid()).apply(w)?;
    lw.inner(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coercivity {
    /// `min ⟨𝓛w,w⟩/‖w‖²_{H¹}` over `w` with `ω(w, eⱼη) = 0`.
    pub constrained: f64,
    /// The same minimum without constraints.
    pub unconstrained: f64,
}

/// Minimum of the Rayleigh quotient `⟨𝓛w,w⟩ / ‖w‖²_{H¹}`.
///
/// With `w = p + iq` both forms split, and the four symplectic conditions
/// become `p ⊥ η, xη` and `q ⊥ η′, (xη)′`, so each block is solved separately.
pub fn coercivity_constant(grid: Grid) -> Coercivity {
    let xs = grid.coords();
    let column = |f: &dyn Fn(f64) -> f64| DVector::from_iterator(xs.len(), xs.iter().map(|&x| f(x)));
    let eta = column(&|x| sech(x));
    let x_eta = column(&|x| x * sech(x));
    let d_eta = column(&|x| -sech(x) * x.tanh());
    let d_x_eta = column(&|x| sech(x) * (1.0 - x * x.tanh()));

    let d2 = second_derivative_matrix(grid);
    let gram = (DMatrix::identity(xs.len(), xs.len()) - &d2) * grid.spacing();
    let chol = gram.cholesky().expect("H¹ Gram matrix is positive definite");
    let l = chol.l();

    let block = |kind: OperatorKind, constraints: &[&DVector<f64>]| -> (f64, f64) {
        let a = operator_matrix(grid, kind) * grid.spacing();
        // A′ = L⁻¹ A L⁻ᵀ
        let linv_a = l.solve_lower_triangular(&a).unwrap();
        let a_prime = l.solve_lower_triangular(&linv_a.transpose()).unwrap();
        let a_prime = (&a_prime + a_prime.transpose()) * 0.5;
        let unconstrained = sorted_eigen(a_prime.clone()).0[0];

        // Constraint ⟨c, p⟩ = 0 becomes ⟨L⁻¹c, y⟩ = 0 for y = Lᵀp.
        let mut q: Vec<DVector<f64>> = Vec::new();
        for c in constraints {
            let mut v = l.solve_lower_triangular(*c).unwrap();
            for b in &q {
                v -= b * b.dot(&v);
            }
            q.push(v.normalize());
        }
        let n = a_prime.nrows();
        let mut p = DMatrix::identity(n, n);
        for b in &q {
            p -= b * b.transpose();
        }
        let penalty = 1e3 * (1.0 + a_prime.amax());
        let mut m = &p * &a_prime * &p;
        for b in &q {
            m += b * b.transpose() * penalty;
        }
        let m = (&m + m.transpose()) * 0.5;
        (sorted_eigen(m).0[0], unconstrained)
    };

    let (cp, up) = block(OperatorKind::LPlus, &[&eta, &x_eta]);
    let (cq, uq) = block(OperatorKind::LMinus, &[&d_eta, &d_x_eta]);
    Coercivity { constrained: cp.min(cq), unconstrained: up.min(uq) }
}

/// Eigenvalues of `L₊` and `L₋` as `(kind, index, value)` rows.
pub fn spectrum_table(grid: Grid, count: usize) -> Result<Vec<(&'static str, usize, f64)>> {
    let mut rows = Vec::new();
    for kind in [OperatorKind::LPlus, OperatorKind::LMinus] {
        let pairs = LinearizedOperator::new(kind, grid).eigen_extremes(count)?;
        rows.extend(pairs.iter().enumerate().map(|(i, p)| (kind.name(), i, p.value)));
    }
    Ok(rows)
}

/// Least-squares fit of `ln|f| = c + p ln x + s x` on `[lo, hi]`; returns `(c, p, s)`.
pub fn fit_decay(f: &WaveField, lo: f64, hi: f64) -> (f64, f64, f64) {
    let rows: Vec<(f64, f64)> = f
        .grid()
        .coords()
        .iter()
        .zip(f.values())
        .filter(|(x, z)| **x >= lo && **x <= hi && z.norm() > 0.0)
        .map(|(x, z)| (*x, z.norm().ln()))
        .collect();
    let design = DMatrix::from_fn(rows.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => rows[r].0.ln(),
        _ => rows[r].0,
    });
    let target = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let normal = design.transpose() * &design;
    let coef = normal.lu().solve(&(design.transpose() * target)).expect("decay fit is well posed");
    (coef[0], coef[1], coef[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(512, 40.0).unwrap()
    }

    fn eta(g: Grid) -> WaveField {
        WaveField::from_real_fn(g, sech)
    }

    #[test]
    fn kernel_and_ground_state_identities() {
        let g = Grid::new(512, 60.0).unwrap();
        let lm = LinearizedOperator::new(OperatorKind::LMinus, g);
        let lp = LinearizedOperator::new(OperatorKind::LPlus, g);
        assert!(lm.apply(&eta(g)).unwrap().max_abs() < 1e-8);
        assert!(lp.apply(&eta(g).derivative()).unwrap().max_abs() < 1e-8);
        let e2 = WaveField::from_real_fn(g, |x| sech(x).powi(2));
        let diff = &lp.apply(&e2).unwrap() + &(&e2 * 1.5);
        assert!(diff.max_abs() < 1e-8);
    }

    #[test]
    fn real_operators_reject_complex_fields() {
        let lp = LinearizedOperator::new(OperatorKind::LPlus, grid());
        let err = lp.apply(&eta(grid()).scale(C64::i())).unwrap_err();
        assert!(matches!(err, Error::RealOperatorComplexInput("Lplus")));
    }

    #[test]
    fn block_structure_of_cal_l() {
        let g = grid();
        let w = WaveField::from_fn(g, |x| C64::new(sech(x) * x, (-(x * x) / 3.0).exp()));
        let full = LinearizedOperator::new(OperatorKind::CalL, g).apply(&w).unwrap();
        let re = LinearizedOperator::new(OperatorKind::LPlus, g).apply(&w.map(|_, z| C64::new(z.re, 0.0))).unwrap();
        let im = LinearizedOperator::new(OperatorKind::LMinus, g).apply(&w.map(|_, z| C64::new(z.im, 0.0))).unwrap();
        let split = &re + &im.scale(C64::i());
        assert!((&full - &split).max_abs() < 1e-13);
    }

    #[test]
    fn lowest_eigenpairs() {
        let lp = LinearizedOperator::new(OperatorKind::LPlus, grid()).eigen_extremes(3).unwrap();
        assert!((lp[0].value + 1.5).abs() < 1e-4);
        assert!(lp[1].value.abs() < 1e-4);
        assert!(lp[2].value >= 0.5 - 1e-2, "{}", lp[2].value);
        // Ground state ∝ η², normalised: ∫η⁴ = 4/3.
        let ground = WaveField::from_real_fn(grid(), |x| sech(x).powi(2) / (4.0f64 / 3.0).sqrt());
        assert!((&lp[0].vector - &ground).max_abs() < 1e-8);
        // Kernel ∝ −η′ = sech·tanh after sign fixing; ∫sech²tanh² = 2/3.
        let kernel = WaveField::from_real_fn(grid(), |x| sech(x) * x.tanh() / (2.0f64 / 3.0).sqrt());
        assert!((&lp[1].vector - &kernel).max_abs() < 1e-8);

        let lm = LinearizedOperator::new(OperatorKind::LMinus, grid()).eigen_extremes(2).unwrap();
        assert!(lm[0].value.abs() < 1e-4);
        assert!((&lm[0].vector - &(&eta(grid()) * (0.5f64).sqrt())).max_abs() < 1e-8);
        assert!(lm[1].value > 0.4);
    }

    #[test]
    fn discrete_spectrum_below_continuum() {
        for (kind, expect) in [(OperatorKind::LPlus, vec![-1.5, 0.0]), (OperatorKind::LMinus, vec![0.0])] {
            let pairs = LinearizedOperator::new(kind, grid()).eigen_extremes(6).unwrap();
            let low: Vec<f64> = pairs.iter().map(|p| p.value).filter(|v| *v < 0.4).collect();
            assert_eq!(low.len(), expect.len());
            for (a, b) in low.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-3);
            }
        }
        let cal = LinearizedOperator::new(OperatorKind::CalL, grid()).eigen_extremes(3).unwrap();
        assert!((cal[0].value + 1.5).abs() < 1e-4 && cal[1].value.abs() < 1e-4 && cal[2].value.abs() < 1e-4);
        assert!(LinearizedOperator::new(OperatorKind::LPlus, grid()).eigen_extremes(7).is_err());
    }

    #[test]
    fn forced_solution_properties() {
        let g = forced_grid();
        let f = solve_forced(g).unwrap();
        let lp = LinearizedOperator::new(OperatorKind::LPlus, g);
        let residual = &lp.apply(&f).unwrap() - &forced_rhs(g);
        assert!(residual.l2_norm_sq().sqrt() < 1e-8, "{}", residual.l2_norm_sq().sqrt());
        assert!(f.inner(&eta(g)).unwrap().abs() < 1e-7);
        let n = g.n_points();
        let odd_part = (1..n).map(|k| (f.values()[k] - f.values()[n - k]).norm()).fold(0.0, f64::max);
        assert!(odd_part < 1e-9);
        let x_eta_prime = WaveField::from_real_fn(g, |x| sech(x) * (1.0 - x * x.tanh()));
        // Scaling generator: differentiating μη(μx) in μ gives L₊(xη)′ = −η.
        let err = (&lp.apply(&x_eta_prime).unwrap() + &eta(g)).max_abs();
        assert!(err < 1e-7, "{err:e}");
    }

    #[test]
    fn forced_solution_decays_exponentially() {
        let g = forced_grid();
        let f = solve_forced(g).unwrap();
        let (_, power, rate) = fit_decay(&f, 10.0, g.domain_length() / 2.0 - 5.0);
        assert!(rate <= -0.9, "rate {rate}, power {power}");
    }

    #[test]
    fn tilde_w_examples() {
        let g = forced_grid();
        assert_eq!(tilde_w(0.0, 1.0, &crate::PotentialSpec::zero(), g).unwrap().max_abs(), 0.0);
        let f_h1 = solve_forced(g).unwrap().h1_norm();
        for h in [0.2, 0.1] {
            let pot = crate::PotentialSpec::sech2_well(-1.0, h).unwrap();
            let c = pot.profile_sup(2) * f_h1 / 2.0;
            for a in [0.0, 2.0, -7.0] {
                let w = tilde_w(a, 1.0, &pot, g).unwrap();
                assert!(w.h1_norm() <= c * h * h * (1.0 + 1e-12));
                for b in crate::group::tangent_basis(g) {
                    assert!(w.symplectic_pairing(&b).unwrap().abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn coercivity() {
        let c = coercivity_constant(Grid::new(256, 40.0).unwrap());
        assert!(c.constrained >= COERCIVITY_BOUND, "{c:?}");
        assert!(c.unconstrained < 0.0);
        assert!((RHO0 - 0.205_765_04).abs() < 1e-8);
        assert!((C2 - 18.009_7).abs() < 1e-4);
        assert!((C2 - 18.02).abs() < 0.02);
        assert!((COERCIVITY_BOUND - 0.0555).abs() < 1e-4);
    }

    #[test]
    fn lyapunov_kernel_directions() {
        let g = Grid::new(512, 60.0).unwrap();
        assert!(lyapunov_quadratic(&eta(g).derivative()).unwrap().abs() < 1e-8);
        assert!(lyapunov_quadratic(&eta(g).scale(C64::i())).unwrap().abs() < 1e-8);
    }

    #[test]
    fn fit_recovers_known_decay() {
        let g = forced_grid();
        let f = WaveField::from_real_fn(g, |x| 3.0 * x.abs().powi(3) * (-1.2 * x.abs()).exp());
        let (c, p, s) = fit_decay(&f, 10.0, 30.0);
        assert!((c - 3f64.ln()).abs() < 1e-8 && (p - 3.0).abs() < 1e-8 && (s + 1.2).abs() < 1e-9);
    }
}
