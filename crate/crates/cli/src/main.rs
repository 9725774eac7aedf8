use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use solitonlab::experiment::{
    compare, create_output, ode_compare_grid, run_pde, spectral_report, sweep, trajectory_file_name,
    write_checks, write_ode_compare, Check, ExperimentConfig, RunStatus,
};

const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

/// Single soliton in a slowly varying potential: PDE runs, modulation ODEs
/// and spectral diagnostics.
#[derive(Parser, Debug)]
#[command(name = "solitonlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve the PDE and decompose the solution along the way.
    Simulate(RunArgs),
    /// PDE against the effective and Newton modulation models at one h.
    Compare(RunArgs),
    /// Compare over the configured h values and fit scaling exponents.
    Sweep(RunArgs),
    /// Spectral facts about the linearised operators.
    Spectral(RunArgs),
    /// Perturbed-ODE comparison over the fixed (h, delta, shape) grid.
    OdeCompare(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML file with experiment settings; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    /// Grid points.
    #[arg(long)]
    n: Option<usize>,
    /// Box length.
    #[arg(long = "box")]
    box_length: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// H¹ size of a seeded random perturbation of the initial datum.
    #[arg(long)]
    perturb_scale: Option<f64>,
}

impl RunArgs {
    fn config(&self) -> solitonlab::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(h) = self.h {
            cfg.h = h;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(a0) = self.a0 {
            cfg.a0 = a0;
        }
        if let Some(v0) = self.v0 {
            cfg.v0 = v0;
        }
        if let Some(n) = self.n {
            cfg.n_points = n;
        }
        if let Some(l) = self.box_length {
            cfg.box_length = l;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if self.t_end.is_some() {
            cfg.t_end = self.t_end;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(p) = self.perturb_scale {
            cfg.perturb_scale = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Outcome of a subcommand that completed its I/O.
#[derive(Debug, PartialEq, Eq)]
enum Verdict {
    Ok,
    ChecksFailed,
    Diverged,
}

impl From<RunStatus> for Verdict {
    fn from(status: RunStatus) -> Self {
        match status {
            RunStatus::Completed => Verdict::Ok,
            RunStatus::ExtractionFailed { .. } => Verdict::ChecksFailed,
            RunStatus::Diverged { .. } => Verdict::Diverged,
        }
    }
}

fn write_file(
    dir: &Path,
    name: &str,
    write: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> solitonlab::Result<()>,
) -> solitonlab::Result<()> {
    let (path, mut out) = create_output(dir, name)?;
    write(&mut out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_checks(checks: &[Check]) -> Verdict {
    for c in checks {
        println!("{:<32} {:>14.6e}  {}", c.name, c.value, if c.pass { "ok" } else { "FAIL" });
    }
    if checks.iter().all(|c| c.pass) {
        Verdict::Ok
    } else {
        Verdict::ChecksFailed
    }
}

fn simulate(args: &RunArgs) -> solitonlab::Result<Verdict> {
    let cfg = args.config()?;
    let run = run_pde(&cfg, cfg.h, cfg.run_t_end(), None)?;
    let comment = cfg.comment();
    write_file(&args.out, &trajectory_file_name("pde", cfg.h), |out| run.write_csv(out, &comment))?;
    println!("status {}  mass drift {:.3e}  energy drift {:.3e}  max mass gap {:.3e}", run.status.label(),
        run.mass_drift(), run.energy_drift(), run.max_mass_gap());
    Ok(run.status.into())
}

fn compare_cmd(args: &RunArgs) -> solitonlab::Result<Verdict> {
    let cfg = args.config()?;
    let h = cfg.h;
    let c = compare(&cfg, h, cfg.run_t_end())?;
    let comment = cfg.comment();
    write_file(&args.out, &trajectory_file_name("compare", h), |out| c.report.write_csv(out, &comment))?;
    write_file(&args.out, &trajectory_file_name("pde", h), |out| c.pde.write_csv(out, &comment))?;
    write_file(&args.out, &trajectory_file_name("effective", h), |out| c.effective.write_csv(out, &comment, 1))?;
    write_file(&args.out, &trajectory_file_name("newton", h), |out| c.newton.write_csv(out, &comment, 1))?;
    for (key, value) in c.report.summary() {
        println!("{key:<20} {value}");
    }
    if c.report.status != RunStatus::Completed {
        return Ok(c.report.status.into());
    }
    let r = &c.report;
    let checks = [
        Check { name: "gap_ratio".into(), value: r.sup_gap_eff / r.sup_gap_newton, tolerance: 0.2,
            pass: r.sup_gap_eff <= 0.2 * r.sup_gap_newton },
        Check::below("mass_identity_gap", r.max_mass_gap, 1e-7),
        Check::below("orthogonality_residual", r.max_ortho, 1e-9),
    ];
    Ok(print_checks(&checks))
}

fn sweep_cmd(args: &RunArgs) -> solitonlab::Result<Verdict> {
    let cfg = args.config()?;
    let (report, runs) = sweep(&cfg)?;
    let comment = cfg.comment();
    write_file(&args.out, "sweep.csv", |out| report.write_csv(out, &comment))?;
    write_file(&args.out, "sweep_fit.csv", |out| report.write_fit_csv(out, &comment))?;
    for c in &runs {
        write_file(&args.out, &trajectory_file_name("compare", c.report.h), |out| c.report.write_csv(out, &comment))?;
    }
    if let Some(bad) = runs.iter().find(|c| c.report.status != RunStatus::Completed) {
        return Ok(bad.report.status.into());
    }
    let checks = [
        Check::at_least("error_exponent", report.exponent_err, 1.7),
        Check {
            name: "newton_exponent_deficit".into(),
            value: report.exponent_gap_eff - report.exponent_gap_newton,
            tolerance: 0.5,
            pass: report.exponent_gap_newton <= report.exponent_gap_eff - 0.5,
        },
    ];
    Ok(print_checks(&checks))
}

fn spectral_cmd(args: &RunArgs) -> solitonlab::Result<Verdict> {
    let cfg = args.config()?;
    let report = spectral_report()?;
    let comment = cfg.comment();
    write_file(&args.out, "spectral.csv", |out| report.write_eigenvalues(out, &comment))?;
    write_file(&args.out, "forced.csv", |out| report.write_forced(out, &comment))?;
    write_file(&args.out, "spectral_checks.csv", |out| write_checks(&report.checks, out, &comment))?;
    Ok(print_checks(&report.checks))
}

fn ode_compare_cmd(args: &RunArgs) -> solitonlab::Result<Verdict> {
    let cfg = args.config()?;
    let rows = ode_compare_grid(&cfg);
    let comment = cfg.comment();
    write_file(&args.out, "ode_compare.csv", |out| write_ode_compare(&rows, out, &comment))?;
    for r in &rows {
        println!("{:<36} a {:.3e} <= {:.3e}  v {:.3e} <= {:.3e}  {}", r.case(), r.sup_a, r.bound_a, r.sup_v,
            r.bound_v, if r.holds() { "ok" } else { "FAIL" });
    }
    Ok(if rows.iter().all(|r| r.holds()) { Verdict::Ok } else { Verdict::ChecksFailed })
}

fn main() -> ExitCode {
    // clap's own usage-error code is 2, which here means a failed check.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Spectral(a) => spectral_cmd(a),
        Command::OdeCompare(a) => ode_compare_cmd(a),
    };
    match result {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::ChecksFailed) => ExitCode::from(EXIT_CHECK_FAILED),
        Ok(Verdict::Diverged) => ExitCode::from(EXIT_DIVERGED),
        Err(solitonlab::Error::Diverged { last_valid_t }) => {
            eprintln!("error: solution diverged after t = {last_valid_t}");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
