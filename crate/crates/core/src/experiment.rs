//! Experiment drivers behind the command-line tool: configuration, PDE runs
//! with per-snapshot decomposition, ODE comparisons, scaling sweeps and the
//! spectral report. Every driver writes CSV files whose first line is a
//! `#` comment with the full configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::{
    integrate_ode, log_time_window, ode_compare_bounds, EffectiveModel, ModState, ModulationTrajectory, NewtonModel,
    OdeCompare,
};
use crate::grid::{sech, Grid, WaveField, C64};
use crate::group::GroupElement;
use crate::modulation::{alpha_beta, generator_deficit, mass_identity_gap, parameter_rates, Modulator};
use crate::potential::{PotentialSpec, Profile};
use crate::solver::{energy, evolve, SolverConfig};
use crate::spectral::{
    coercivity_constant, forced_grid, forced_rhs, solve_forced, spectrum_table, fit_decay, LinearizedOperator,
    OperatorKind, COERCIVITY_BOUND, C2, RHO0,
};
use crate::{Error, Result};

/// Horizon of the single-`h` well experiment when no `t_end` is configured.
pub const WELL_RUN_T_END: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub amplitude: f64,
    pub h: f64,
    /// Slowness values for `sweep`.
    pub h_values: Vec<f64>,
    pub a0: f64,
    pub v0: f64,
    pub n_points: usize,
    pub box_length: f64,
    pub dt: f64,
    /// RK4 step for the modulation ODEs.
    pub ode_dt: f64,
    /// Fixed horizon. When absent, `simulate`/`compare` use
    /// [`WELL_RUN_T_END`] and `sweep` uses `min(time_cap, δ log(1/h)/h)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub delta: f64,
    pub time_cap: f64,
    /// Solver steps between decompositions.
    pub snapshot_stride: usize,
    pub seed: u64,
    /// H¹ size of a seeded random perturbation added to the initial datum.
    pub perturb_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Sech2Well,
            amplitude: -1.0,
            h: 0.2,
            h_values: vec![0.2, 0.1, 0.05],
            a0: -3.0,
            v0: 0.0,
            n_points: 8192,
            box_length: 240.0,
            dt: 2e-3,
            ode_dt: 1e-3,
            t_end: None,
            delta: 0.25,
            time_cap: 100.0,
            snapshot_stride: 10,
            seed: 0,
            perturb_scale: 0.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for &h in std::iter::once(&self.h).chain(&self.h_values) {
            if !(h > 0.0 && h <= 0.5) {
                return bad(format!("h must lie in (0, 0.5], got {h}"));
            }
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad(format!("delta must lie in (0, 0.5), got {}", self.delta));
        }
        if !(self.ode_dt > 0.0) || !(self.time_cap > 0.0) {
            return bad("ode_dt and time_cap must be positive".into());
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("t_end must be finite and ≥ 0, got {t}"));
            }
        }
        if !(self.perturb_scale >= 0.0) {
            return bad("perturb_scale must be ≥ 0".into());
        }
        if !self.a0.is_finite() || !self.v0.is_finite() {
            return bad("a0 and v0 must be finite".into());
        }
        self.grid()?;
        self.potential(self.h)?;
        SolverConfig::new(self.grid()?, self.dt, 0.0, PotentialSpec::zero(), self.snapshot_stride.max(1))?;
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_points, self.box_length)
    }

    pub fn potential(&self, h: f64) -> Result<PotentialSpec> {
        PotentialSpec::new(self.profile.clone(), self.amplitude, h)
    }

    /// Horizon of a single run.
    pub fn run_t_end(&self) -> f64 {
        self.t_end.unwrap_or(WELL_RUN_T_END)
    }

    /// Horizon of the sweep case `h`.
    pub fn sweep_t_end(&self, h: f64) -> f64 {
        self.t_end.unwrap_or_else(|| self.time_cap.min(log_time_window(h, self.delta)))
    }

    pub fn initial_group(&self) -> GroupElement {
        GroupElement { a: self.a0, v: self.v0, gamma: 0.0, mu: 1.0 }
    }

    /// `(a₀, v₀, 0, 1)·η`, plus the seeded perturbation when requested.
    pub fn initial_field(&self) -> Result<WaveField> {
        let grid = self.grid()?;
        let u = self.initial_group().soliton(grid);
        if self.perturb_scale == 0.0 {
            return Ok(u);
        }
        let r = random_perturbation(grid, self.a0, self.seed);
        Ok(&u + &(&r * self.perturb_scale))
    }

    /// One-line rendering of the whole configuration for CSV headers.
    pub fn comment(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        text.lines().filter(|l| !l.trim().is_empty()).collect::<Vec<_>>().join("; ")
    }
}

/// Smooth random field near `centre` with unit H¹ norm.
pub fn random_perturbation(grid: Grid, centre: f64, seed: u64) -> WaveField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(C64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (c, centre + rng.random_range(-3.0..3.0), rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0))
        })
        .collect();
    let r = WaveField::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|&(c, x0, s, k)| c * (-(x - x0).powi(2) / (2.0 * s * s)).exp() * C64::from_polar(1.0, k * x))
            .sum()
    });
    let norm = r.h1_norm();
    &r * (1.0 / norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub g: GroupElement,
    pub mass: f64,
    pub energy: f64,
    pub w_l2: f64,
    pub w_h1: f64,
    pub ortho_max: f64,
    pub mass_gap: f64,
    /// `|X₀|` from centred differences of the parameter path.
    pub x0_norm: f64,
    /// `‖u − (a, v, γ, 1)·η‖_{H¹}` against a reference modulation trajectory.
    pub err_ref: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    ExtractionFailed { t: f64 },
    Diverged { t: f64 },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Completed => "ok",
            Self::ExtractionFailed { .. } => "extraction_failed",
            Self::Diverged { .. } => "diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PdeRun {
    pub h: f64,
    pub t_end: f64,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
}

impl PdeRun {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    fn sup(&self, f: impl Fn(&Snapshot) -> f64) -> f64 {
        self.snapshots.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_mass_gap(&self) -> f64 {
        self.sup(|s| s.mass_gap.abs())
    }

    pub fn max_ortho(&self) -> f64 {
        self.sup(|s| s.ortho_max)
    }

    pub fn max_w_h1(&self) -> f64 {
        self.sup(|s| s.w_h1)
    }

    /// Largest relative mass deviation from the first snapshot.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.snapshots.first().map_or(1.0, |s| s.mass);
        self.sup(|s| ((s.mass - m0) / m0).abs())
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.snapshots.first().map_or(1.0, |s| s.energy);
        self.sup(|s| ((s.energy - e0) / e0).abs())
    }

    pub fn max_err_ref(&self) -> Option<f64> {
        self.snapshots.iter().map(|s| s.err_ref).try_fold(0.0, |m: f64, e| e.map(|e| m.max(e)))
    }

    /// Smallest `c` with `|X₀| ≤ c(h²‖w‖ + ‖w‖² + ‖w‖³)` over snapshots
    /// where `‖w‖_{H¹} > floor`.
    pub fn deficit_constant(&self, floor: f64) -> f64 {
        let h2 = self.h * self.h;
        self.snapshots
            .iter()
            .filter(|s| s.w_h1 > floor)
            .map(|s| s.x0_norm / (h2 * s.w_h1 + s.w_h1.powi(2) + s.w_h1.powi(3)))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W, comment: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# {comment}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "t", "a", "v", "gamma", "mu", "mass", "energy", "w_l2", "w_h1", "ortho_max", "mass_gap", "x0_norm",
            "err_ref", "status",
        ])?;
        for s in &self.snapshots {
            let mut row: Vec<String> = [s.t, s.g.a, s.g.v, s.g.gamma, s.g.mu, s.mass, s.energy, s.w_l2, s.w_h1]
                .iter()
                .chain(&[s.ortho_max, s.mass_gap, s.x0_norm])
                .map(|x| x.to_string())
                .collect();
            row.push(s.err_ref.map(|e| e.to_string()).unwrap_or_default());
            row.push("ok".into());
            wtr.write_record(&row)?;
        }
        match self.status {
            RunStatus::Completed => {}
            RunStatus::ExtractionFailed { t } | RunStatus::Diverged { t } => {
                let mut row = vec![t.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 12));
                row.push(self.status.label().into());
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Evolves the configured initial datum under `V = W(h·)` up to `t_end`,
/// decomposing every `snapshot_stride` steps. With a reference trajectory,
/// each snapshot also records its H¹ distance to `(a, v, γ, 1)·η`.
pub fn run_pde(cfg: &ExperimentConfig, h: f64, t_end: f64, reference: Option<&ModulationTrajectory>) -> Result<PdeRun> {
    let grid = cfg.grid()?;
    let potential = cfg.potential(h)?;
    let solver = SolverConfig::new(grid, cfg.dt, t_end, potential.clone(), cfg.snapshot_stride)?;
    let modulator = Modulator::new(grid);
    let u0 = cfg.initial_field()?;

    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut status = RunStatus::Completed;
    let mut guess = cfg.initial_group();
    let outcome = evolve(&solver, &u0, |t, u| {
        // Linear extrapolation of the last two parameter sets.
        if let [.., p, q] = snapshots.as_slice() {
            let s = (t - q.t) / (q.t - p.t);
            let (p, q) = (p.g.to_array(), q.g.to_array());
            let mut next: [f64; 4] = std::array::from_fn(|k| q[k] + s * (q[k] - p[k]));
            next[3] = next[3].max(0.5 * q[3]);
            guess = GroupElement::from_array(next);
        }
        match modulator.extract(u, &guess) {
            Ok(d) => {
                let err_ref = reference.map(|r| {
                    let s = r.state_at(t);
                    let g = GroupElement { a: s.a, v: s.v, gamma: s.gamma, mu: 1.0 };
                    (u - &g.soliton(grid)).h1_norm()
                });
                let w_l2 = d.w.l2_norm_sq();
                snapshots.push(Snapshot {
                    t,
                    g: d.g,
                    mass: u.l2_norm_sq(),
                    energy: energy(u, &potential),
                    w_l2: w_l2.sqrt(),
                    w_h1: d.w.h1_norm(),
                    ortho_max: d.ortho_max(),
                    mass_gap: mass_identity_gap(&d.w, d.g.mu),
                    x0_norm: 0.0,
                    err_ref,
                });
                ControlFlow::Continue(())
            }
            Err(_) => {
                status = RunStatus::ExtractionFailed { t };
                ControlFlow::Break(())
            }
        }
    });
    match outcome {
        Ok(_) => {}
        Err(Error::Diverged { last_valid_t }) => status = RunStatus::Diverged { t: last_valid_t },
        Err(e) => return Err(e),
    }

    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let params: Vec<GroupElement> = snapshots.iter().map(|s| s.g).collect();
    for (s, rate) in snapshots.iter_mut().zip(parameter_rates(&times, &params)) {
        let ab = alpha_beta(&potential, s.g.a, s.g.mu);
        s.x0_norm = generator_deficit(&s.g, rate, &ab).norm();
    }
    Ok(PdeRun { h, t_end, snapshots, status })
}

/// Both modulation models from `(a₀, v₀, 0, 1)`.
pub fn model_trajectories(cfg: &ExperimentConfig, h: f64, t_end: f64) -> Result<(ModulationTrajectory, ModulationTrajectory)> {
    let potential = cfg.potential(h)?;
    let s0 = ModState::new(cfg.a0, cfg.v0, 0.0, 1.0);
    let eff = integrate_ode(&EffectiveModel(&potential), s0, t_end, cfg.ode_dt);
    let newton = integrate_ode(&NewtonModel(&potential), s0, t_end, cfg.ode_dt);
    Ok((eff, newton))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub a_pde: f64,
    pub a_eff: f64,
    pub a_newton: f64,
    pub gap_eff: f64,
    pub gap_newton: f64,
    pub w_h1: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub h: f64,
    pub rows: Vec<ComparisonRow>,
    pub sup_gap_eff: f64,
    pub sup_gap_newton: f64,
    /// `sup_t ‖u − g_eff·η‖_{H¹}`.
    pub sup_err_eff: f64,
    /// Sign changes of the PDE velocity (two per full oscillation).
    pub turning_points: usize,
    pub status: RunStatus,
    pub mass_drift: f64,
    pub max_mass_gap: f64,
    pub max_ortho: f64,
    pub deficit_constant: f64,
}

impl ComparisonReport {
    pub fn full_oscillations(&self) -> usize {
        self.turning_points / 2
    }

    pub fn write_csv<W: Write>(&self, out: W, comment: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# {comment}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "a_pde", "a_eff", "a_newton", "gap_eff", "gap_newton", "w_h1"])?;
        for r in &self.rows {
            wtr.write_record([r.t, r.a_pde, r.a_eff, r.a_newton, r.gap_eff, r.gap_newton, r.w_h1].map(|x| x.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> Vec<(&'static str, String)> {
        vec![
            ("h", self.h.to_string()),
            ("status", self.status.label().to_string()),
            ("sup_gap_eff", self.sup_gap_eff.to_string()),
            ("sup_gap_newton", self.sup_gap_newton.to_string()),
            ("sup_err_eff_h1", self.sup_err_eff.to_string()),
            ("full_oscillations", self.full_oscillations().to_string()),
            ("mass_drift", self.mass_drift.to_string()),
            ("max_mass_gap", self.max_mass_gap.to_string()),
            ("max_ortho_residual", self.max_ortho.to_string()),
            ("deficit_constant", self.deficit_constant.to_string()),
        ]
    }
}

pub struct Comparison {
    pub report: ComparisonReport,
    pub pde: PdeRun,
    pub effective: ModulationTrajectory,
    pub newton: ModulationTrajectory,
}

/// PDE run plus both ODE models at one `h`, joined on the snapshot times.
pub fn compare(cfg: &ExperimentConfig, h: f64, t_end: f64) -> Result<Comparison> {
    let (effective, newton) = model_trajectories(cfg, h, t_end)?;
    let pde = run_pde(cfg, h, t_end, Some(&effective))?;
    let rows: Vec<ComparisonRow> = pde
        .snapshots
        .iter()
        .map(|s| {
            let a_eff = effective.state_at(s.t).a;
            let a_newton = newton.state_at(s.t).a;
            ComparisonRow {
                t: s.t,
                a_pde: s.g.a,
                a_eff,
                a_newton,
                gap_eff: (s.g.a - a_eff).abs(),
                gap_newton: (s.g.a - a_newton).abs(),
                w_h1: s.w_h1,
            }
        })
        .collect();
    let sup = |f: fn(&ComparisonRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let velocities: Vec<f64> = pde.snapshots.iter().map(|s| s.g.v).collect();
    let report = ComparisonReport {
        h,
        sup_gap_eff: sup(|r| r.gap_eff),
        sup_gap_newton: sup(|r| r.gap_newton),
        sup_err_eff: pde.max_err_ref().unwrap_or(f64::NAN),
        turning_points: sign_changes(&velocities),
        status: pde.status,
        mass_drift: pde.mass_drift(),
        max_mass_gap: pde.max_mass_gap(),
        max_ortho: pde.max_ortho(),
        deficit_constant: pde.deficit_constant(1e-6),
        rows,
    };
    Ok(Comparison { report, pde, effective, newton })
}

fn sign_changes(xs: &[f64]) -> usize {
    let mut last = 0.0;
    let mut count = 0;
    for &x in xs {
        if x != 0.0 {
            if last != 0.0 && (x > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = x;
        }
    }
    count
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub h: f64,
    pub t_end: f64,
    /// `sup_t ‖u − g_eff·η‖_{H¹}`
    pub err_h1: f64,
    pub gap_eff: f64,
    pub gap_newton: f64,
    pub status: RunStatus,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub exponent_err: f64,
    pub exponent_gap_eff: f64,
    pub exponent_gap_newton: f64,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W, comment: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# {comment}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["h", "t_end", "err_h1", "gap_eff", "gap_newton", "status"])?;
        for r in &self.rows {
            let mut rec: Vec<String> = [r.h, r.t_end, r.err_h1, r.gap_eff, r.gap_newton].map(|x| x.to_string()).to_vec();
            rec.push(r.status.label().into());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_fit_csv<W: Write>(&self, out: W, comment: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# {comment}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["quantity", "exponent"])?;
        for (name, p) in [
            ("err_h1", self.exponent_err),
            ("gap_eff", self.exponent_gap_eff),
            ("gap_newton", self.exponent_gap_newton),
        ] {
            wtr.write_record([name.to_string(), p.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs [`compare`] for each `h` in parallel and fits the scaling exponents.
pub fn sweep(cfg: &ExperimentConfig) -> Result<(SweepReport, Vec<Comparison>)> {
    if cfg.h_values.len() < 3 {
        return Err(Error::InvalidConfig("a sweep needs at least three h values".into()));
    }
    let runs: Vec<Comparison> = cfg
        .h_values
        .par_iter()
        .map(|&h| compare(cfg, h, cfg.sweep_t_end(h)))
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = runs
        .iter()
        .map(|c| SweepRow {
            h: c.report.h,
            t_end: c.pde.t_end,
            err_h1: c.report.sup_err_eff,
            gap_eff: c.report.sup_gap_eff,
            gap_newton: c.report.sup_gap_newton,
            status: c.report.status,
        })
        .collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let col = |f: fn(&SweepRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let report = SweepReport {
        exponent_err: fit_exponent(&hs, &col(|r| r.err_h1)),
        exponent_gap_eff: fit_exponent(&hs, &col(|r| r.gap_eff)),
        exponent_gap_newton: fit_exponent(&hs, &col(|r| r.gap_newton)),
        rows,
    };
    Ok((report, runs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `|value| < tolerance`.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value.abs() < tolerance }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, tolerance: threshold, pass: value >= threshold }
    }
}

pub fn write_checks<W: Write>(checks: &[Check], out: W, comment: &str) -> Result<()> {
    let mut out = out;
    writeln!(out, "# {comment}")?;
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["check", "value", "threshold", "pass"])?;
    for c in checks {
        wtr.write_record([c.name.clone(), c.value.to_string(), c.tolerance.to_string(), c.pass.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub eigenvalues: Vec<(&'static str, usize, f64)>,
    pub forced: WaveField,
    pub checks: Vec<Check>,
}

impl SpectralReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn write_eigenvalues<W: Write>(&self, out: W, comment: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# {comment}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["operator", "index", "eigenvalue"])?;
        for (kind, i, value) in &self.eigenvalues {
            wtr.write_record([kind.to_string(), i.to_string(), value.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// The real solution `f` of the forced problem as `x,f` rows.
    pub fn write_forced<W: Write>(&self, out: W, comment: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# {comment}")?;
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["x", "f"])?;
        for (x, z) in self.forced.grid().coords().iter().zip(self.forced.values()) {
            wtr.write_record([x.to_string(), z.re.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Eigenvalues, identities, forced solution and coercivity of the linearisation.
pub fn spectral_report() -> Result<SpectralReport> {
    let grid = Grid::new(512, 40.0)?;
    let fine = Grid::new(512, 60.0)?;
    let lp = LinearizedOperator::new(OperatorKind::LPlus, fine);
    let lm = LinearizedOperator::new(OperatorKind::LMinus, fine);
    let eta = WaveField::from_real_fn(fine, sech);
    let eta_sq = WaveField::from_real_fn(fine, |x| sech(x).powi(2));
    let x_eta_prime = WaveField::from_real_fn(fine, |x| sech(x) * (1.0 - x * x.tanh()));

    let mut checks = vec![
        Check::below("Lminus_eta", lm.apply(&eta)?.max_abs(), 1e-8),
        Check::below("Lplus_eta_prime", lp.apply(&eta.derivative())?.max_abs(), 1e-8),
        Check::below("Lplus_eta_squared", (&lp.apply(&eta_sq)? + &(&eta_sq * 1.5)).max_abs(), 1e-8),
        Check::below("Lplus_x_eta_prime_minus_eta", (&lp.apply(&x_eta_prime)? - &eta).max_abs(), 1e-7),
    ];

    let eigenvalues = spectrum_table(grid, 6)?;
    let low = |kind: &str| -> Vec<f64> {
        eigenvalues.iter().filter(|r| r.0 == kind && r.2 < 0.4).map(|r| r.2).collect()
    };
    let (plus, minus) = (low("Lplus"), low("Lminus"));
    let discrete = |vals: &[f64], expect: &[f64]| -> f64 {
        if vals.len() != expect.len() {
            return f64::INFINITY;
        }
        vals.iter().zip(expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    checks.push(Check::below("Lplus_discrete_spectrum", discrete(&plus, &[-1.5, 0.0]), 1e-3));
    checks.push(Check::below("Lminus_discrete_spectrum", discrete(&minus, &[0.0]), 1e-3));

    let fg = forced_grid();
    let forced = solve_forced(fg)?;
    let lpf = LinearizedOperator::new(OperatorKind::LPlus, fg);
    checks.push(Check::below(
        "forced_residual_l2",
        (&lpf.apply(&forced)? - &forced_rhs(fg)).l2_norm_sq().sqrt(),
        1e-8,
    ));
    for (j, b) in crate::group::tangent_basis(fg).iter().enumerate() {
        checks.push(Check::below(format!("forced_pairing_e{}", j + 1), forced.symplectic_pairing(b)?, 1e-7));
    }
    checks.push(Check::below("forced_integral_against_eta", forced.inner(&WaveField::from_real_fn(fg, sech))?, 1e-7));
    let n = fg.n_points();
    let odd = (1..n).map(|k| (forced.values()[k] - forced.values()[n - k]).norm()).fold(0.0, f64::max);
    checks.push(Check::below("forced_odd_part", odd, 1e-9));
    let (_, _, rate) = fit_decay(&forced, 10.0, fg.domain_length() / 2.0 - 5.0);
    checks.push(Check { name: "forced_decay_rate".into(), value: rate, tolerance: -0.9, pass: rate <= -0.9 });

    let coercivity = coercivity_constant(Grid::new(256, 40.0)?);
    checks.push(Check::at_least("coercivity_constrained_min", coercivity.constrained, COERCIVITY_BOUND));
    checks.push(Check {
        name: "coercivity_unconstrained_min".into(),
        value: coercivity.unconstrained,
        tolerance: 0.0,
        pass: coercivity.unconstrained < 0.0,
    });
    checks.push(Check { name: "rho0".into(), value: RHO0, tolerance: 0.0, pass: true });
    checks.push(Check { name: "c2".into(), value: C2, tolerance: 0.0, pass: true });
    Ok(SpectralReport { eigenvalues, forced, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationShape {
    Constant,
    Oscillatory,
}

impl PerturbationShape {
    pub fn label(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Oscillatory => "oscillatory",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeCompareRow {
    pub h: f64,
    pub delta: f64,
    pub shape: PerturbationShape,
    pub sup_a: f64,
    pub sup_v: f64,
    pub bound_a: f64,
    pub bound_v: f64,
}

impl OdeCompareRow {
    pub fn holds(&self) -> bool {
        self.sup_a <= self.bound_a && self.sup_v <= self.bound_v
    }

    pub fn case(&self) -> String {
        format!("h={} delta={} {}", self.h, self.delta, self.shape.label())
    }
}

/// Perturbed system `ȧ = v + ε, v̇ = −h sin(ha) + ε` against the exact one on
/// `[0, δ h⁻¹ log(1/h)]`, with `|ε| = h^{4−δ}` constant or times `sin t`.
pub fn ode_compare_case(h: f64, delta: f64, shape: PerturbationShape, a0: f64, v0: f64, dt: f64) -> OdeCompareRow {
    let size = h.powf(4.0 - delta);
    let eps = move |t: f64| match shape {
        PerturbationShape::Constant => size,
        PerturbationShape::Oscillatory => size * t.sin(),
    };
    let force = |y: f64| -y.sin();
    let (sup_a, sup_v) = OdeCompare { h, a0, v0, force: &force, eps1: &eps, eps2: &eps, t_end: log_time_window(h, delta), dt }.run();
    let (bound_a, bound_v) = ode_compare_bounds(h, delta);
    OdeCompareRow { h, delta, shape, sup_a, sup_v, bound_a, bound_v }
}

/// The grid `{0.1, 0.05} × {0.2, 0.25}` times both perturbation shapes.
pub fn ode_compare_grid(cfg: &ExperimentConfig) -> Vec<OdeCompareRow> {
    let mut rows = Vec::new();
    for h in [0.1, 0.05] {
        for delta in [0.2, 0.25] {
            for shape in [PerturbationShape::Constant, PerturbationShape::Oscillatory] {
                rows.push(ode_compare_case(h, delta, shape, cfg.a0, cfg.v0, cfg.ode_dt));
            }
        }
    }
    rows
}

pub fn write_ode_compare<W: Write>(rows: &[OdeCompareRow], out: W, comment: &str) -> Result<()> {
    let mut out = out;
    writeln!(out, "# {comment}")?;
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["h", "delta", "shape", "sup_a", "sup_v", "bound_a", "bound_v", "pass"])?;
    for r in rows {
        wtr.write_record([
            r.h.to_string(),
            r.delta.to_string(),
            r.shape.label().to_string(),
            r.sup_a.to_string(),
            r.sup_v.to_string(),
            r.bound_a.to_string(),
            r.bound_v.to_string(),
            r.holds().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `model_h{h}.csv`
pub fn trajectory_file_name(model: &str, h: f64) -> String {
    format!("{model}_h{h}.csv")
}

/// Creates `dir/name` (and `dir`) for writing.
pub fn create_output(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}
