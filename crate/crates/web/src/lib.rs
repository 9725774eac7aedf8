//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Each export returns a flat `Float64Array`; the row layout is given on
//! each function.

use solitonlab::experiment::{model_trajectories, run_pde, ExperimentConfig};
use solitonlab::spectral::{LinearizedOperator, OperatorKind};
use solitonlab::Grid;
use wasm_bindgen::prelude::*;

/// Coarse grid for in-browser PDE runs.
const DEMO_POINTS: usize = 1024;
const DEMO_BOX: f64 = 120.0;
const DEMO_DT: f64 = 5e-3;
const DEMO_ODE_DT: f64 = 1e-2;
/// Stored ODE samples per unit time.
const SAMPLES_PER_UNIT: f64 = 10.0;

fn demo_config(h: f64, a0: f64, v0: f64) -> solitonlab::Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        h,
        a0,
        v0,
        n_points: DEMO_POINTS,
        box_length: DEMO_BOX,
        dt: DEMO_DT,
        ode_dt: DEMO_ODE_DT,
        snapshot_stride: 20,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn ode_rows(h: f64, a0: f64, v0: f64, t_end: f64) -> solitonlab::Result<Vec<f64>> {
    let cfg = demo_config(h, a0, v0)?;
    let (eff, newton) = model_trajectories(&cfg, h, t_end)?;
    let samples = (t_end * SAMPLES_PER_UNIT).ceil().max(1.0) as usize;
    Ok((0..=samples)
        .flat_map(|k| {
            let t = t_end * k as f64 / samples as f64;
            [t, eff.state_at(t).a, newton.state_at(t).a]
        })
        .collect())
}

fn operator_kind(name: &str) -> solitonlab::Result<OperatorKind> {
    match name {
        "Lplus" => Ok(OperatorKind::LPlus),
        "Lminus" => Ok(OperatorKind::LMinus),
        other => Err(solitonlab::Error::InvalidConfig(format!("unknown operator {other}"))),
    }
}

pub fn spectrum_rows(kind: &str, count: usize) -> solitonlab::Result<Vec<f64>> {
    let grid = Grid::new(256, 40.0)?;
    let pairs = LinearizedOperator::new(operator_kind(kind)?, grid).eigen_extremes(count)?;
    let mut out = Vec::with_capacity((pairs.len() + 1) * grid.n_points());
    out.extend(grid.coords());
    out.extend(pairs.iter().map(|p| p.value));
    for p in &pairs {
        out.extend(p.vector.values().iter().map(|z| z.re));
    }
    Ok(out)
}

pub fn pde_rows(h: f64, a0: f64, v0: f64, t_end: f64) -> solitonlab::Result<Vec<f64>> {
    let cfg = demo_config(h, a0, v0)?;
    let run = run_pde(&cfg, h, t_end, None)?;
    Ok(run.snapshots.iter().flat_map(|s| [s.t, s.g.a, s.g.mu, s.w_h1]).collect())
}

fn js<T>(r: solitonlab::Result<T>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Effective and Newton centre trajectories: rows `[t, a_eff, a_newton]`.
#[wasm_bindgen]
pub fn trajectories(h: f64, a0: f64, v0: f64, t_end: f64) -> Result<Vec<f64>, JsError> {
    js(ode_rows(h, a0, v0, t_end))
}

/// Lowest `count` eigenpairs of `"Lplus"` or `"Lminus"` on a 256-point box
/// of length 40: the `N` grid points, then `count` eigenvalues, then `count`
/// eigenvectors of length `N`.
#[wasm_bindgen]
pub fn spectrum(kind: &str, count: usize) -> Result<Vec<f64>, JsError> {
    js(spectrum_rows(kind, count))
}

/// Coarse PDE run with modulation extraction: rows `[t, a, mu, w_h1]`.
#[wasm_bindgen]
pub fn simulate(h: f64, a0: f64, v0: f64, t_end: f64) -> Result<Vec<f64>, JsError> {
    js(pde_rows(h, a0, v0, t_end))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ode_rows_start_together() {
        let rows = ode_rows(0.2, -3.0, 0.0, 5.0).unwrap();
        assert_eq!(rows.len() % 3, 0);
        assert_eq!(&rows[..3], &[0.0, -3.0, -3.0]);
        assert_eq!(rows.len() / 3, 51);
    }

    #[test]
    fn spectrum_layout() {
        let rows = spectrum_rows("Lplus", 3).unwrap();
        assert_eq!(rows.len(), 256 + 3 + 3 * 256);
        assert!((rows[256] + 1.5).abs() < 1e-6);
        assert!(rows[257].abs() < 1e-6);
        assert!(spectrum_rows("L0", 2).is_err());
    }

    #[test]
    fn pde_rows_track_the_centre() {
        let rows = pde_rows(0.2, -3.0, 0.0, 1.0).unwrap();
        assert_eq!(rows.len() % 4, 0);
        let last = &rows[rows.len() - 4..];
        assert!((last[0] - 1.0).abs() < 1e-12);
        assert!(last[1] > -3.0 && last[1] < -2.8, "{last:?}");
        assert!(last[3] < 0.05);
    }
}
