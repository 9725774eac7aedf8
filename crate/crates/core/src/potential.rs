//! Slowly varying external potentials `V(x) = W(hx)`.

use serde::{Deserialize, Serialize};

use crate::grid::sech;
use crate::{Error, Result};

/// A real potential with (at least) three derivatives.
pub trait Potential: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    fn d3(&self, x: f64) -> f64;

    /// `(V, V′)` at once; built-ins share the transcendental work.
    fn value_d1(&self, x: f64) -> (f64, f64) {
        (self.value(x), self.d1(x))
    }
}

/// Shape of the profile `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Profile {
    Zero,
    /// `W(y) = amplitude · sech² y`; negative amplitude is an attractive well.
    Sech2Well,
    /// Natural cubic spline through `values` sampled at `y0 + k·dy`,
    /// constant extension outside.
    Tabulated { y0: f64, dy: f64, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub profile: Profile,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    pub h: f64,
    #[serde(skip)]
    spline: Option<Spline>,
}

fn default_amplitude() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn new(profile: Profile, amplitude: f64, h: f64) -> Result<Self> {
        let mut spec = Self { profile, amplitude, h, spline: None };
        spec.prepare()?;
        Ok(spec)
    }

    pub fn zero() -> Self {
        Self { profile: Profile::Zero, amplitude: 0.0, h: 1.0, spline: None }
    }

    /// `V(x) = amplitude · sech²(hx)`.
    pub fn sech2_well(amplitude: f64, h: f64) -> Result<Self> {
        Self::new(Profile::Sech2Well, amplitude, h)
    }

    /// Validates and builds derived data; call after deserialising.
    pub fn prepare(&mut self) -> Result<()> {
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::InvalidPotential(format!("h must lie in (0, 1], got {}", self.h)));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidPotential("amplitude must be finite".into()));
        }
        if let Profile::Tabulated { y0, dy, values } = &self.profile {
            if values.len() < 4 || !(*dy > 0.0) || !y0.is_finite() {
                return Err(Error::InvalidPotential("tabulated profile needs ≥ 4 samples and dy > 0".into()));
            }
            self.spline = Some(Spline::natural(*y0, *dy, values));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.profile, Profile::Zero) || self.amplitude == 0.0
    }

    /// `W^{(k)}(y)` for `k = 0..=3`.
    pub fn profile_derivative(&self, k: usize, y: f64) -> f64 {
        let amp = self.amplitude;
        match &self.profile {
            Profile::Zero => 0.0,
            Profile::Sech2Well => {
                let s2 = sech(y).powi(2);
                let t = y.tanh();
                amp * match k {
                    0 => s2,
                    1 => -2.0 * s2 * t,
                    2 => 4.0 * s2 * t * t - 2.0 * s2 * s2,
                    3 => -8.0 * s2 * t.powi(3) + 16.0 * s2 * s2 * t,
                    _ => panic!("derivative order {k} not available"),
                }
            }
            Profile::Tabulated { .. } => {
                let spline = self.spline.as_ref().expect("tabulated potential used before prepare()");
                amp * spline.eval(k, y)
            }
        }
    }

    /// `sup |W^{(k)}|` estimated on a fine sample of `[-20, 20]` (built-ins decay there).
    pub fn profile_sup(&self, k: usize) -> f64 {
        let (lo, hi) = match &self.profile {
            Profile::Tabulated { y0, dy, values } => (*y0, y0 + dy * (values.len() - 1) as f64),
            _ => (-20.0, 20.0),
        };
        (0..=4000)
            .map(|i| lo + (hi - lo) * i as f64 / 4000.0)
            .map(|y| self.profile_derivative(k, y).abs())
            .fold(0.0, f64::max)
    }
}

impl Potential for PotentialSpec {
    fn value(&self, x: f64) -> f64 {
        self.profile_derivative(0, self.h * x)
    }

    fn d1(&self, x: f64) -> f64 {
        self.h * self.profile_derivative(1, self.h * x)
    }

    fn d2(&self, x: f64) -> f64 {
        self.h * self.h * self.profile_derivative(2, self.h * x)
    }

    fn d3(&self, x: f64) -> f64 {
        self.h.powi(3) * self.profile_derivative(3, self.h * x)
    }

    fn value_d1(&self, x: f64) -> (f64, f64) {
        match self.profile {
            Profile::Sech2Well => {
                let y = self.h * x;
                let s2 = sech(y).powi(2);
                let amp = self.amplitude;
                (amp * s2, -2.0 * amp * self.h * s2 * y.tanh())
            }
            _ => (self.value(x), self.d1(x)),
        }
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn d1(&self, x: f64) -> f64 {
        (**self).d1(x)
    }
    fn d2(&self, x: f64) -> f64 {
        (**self).d2(x)
    }
    fn d3(&self, x: f64) -> f64 {
        (**self).d3(x)
    }
    fn value_d1(&self, x: f64) -> (f64, f64) {
        (**self).value_d1(x)
    }
}

/// Natural cubic spline on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
struct Spline {
    y0: f64,
    dy: f64,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl Spline {
    fn natural(y0: f64, dy: f64, values: &[f64]) -> Self {
        let n = values.len();
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let rhs = 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (dy * dy);
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Self { y0, dy, values: values.to_vec(), m }
    }

    fn eval(&self, k: usize, y: f64) -> f64 {
        let n = self.values.len();
        let s = (y - self.y0) / self.dy;
        if s < 0.0 || s > (n - 1) as f64 {
            let edge = if s < 0.0 { 0 } else { n - 1 };
            return if k == 0 { self.values[edge] } else { 0.0 };
        }
        let i = (s.floor() as usize).min(n - 2);
        let (h, y_l, y_r) = (self.dy, self.values[i], self.values[i + 1]);
        let (m_l, m_r) = (self.m[i], self.m[i + 1]);
        let a = (i + 1) as f64 - s; // weight of left knot
        let b = s - i as f64;
        match k {
            0 => a * y_l + b * y_r + ((a.powi(3) - a) * m_l + (b.powi(3) - b) * m_r) * h * h / 6.0,
            1 => (y_r - y_l) / h + ((1.0 - 3.0 * a * a) * m_l + (3.0 * b * b - 1.0) * m_r) * h / 6.0,
            2 => a * m_l + b * m_r,
            3 => (m_r - m_l) / h,
            _ => panic!("derivative order {k} not available"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sech2_derivatives_match_finite_differences() {
        let w = PotentialSpec::sech2_well(-1.0, 0.2).unwrap();
        let eps = 1e-5;
        for &x in &[-7.0, -3.0, -0.4, 0.0, 1.1, 5.0] {
            let fd1 = (w.value(x + eps) - w.value(x - eps)) / (2.0 * eps);
            let fd2 = (w.d1(x + eps) - w.d1(x - eps)) / (2.0 * eps);
            let fd3 = (w.d2(x + eps) - w.d2(x - eps)) / (2.0 * eps);
            assert!((fd1 - w.d1(x)).abs() < 1e-9);
            assert!((fd2 - w.d2(x)).abs() < 1e-9);
            assert!((fd3 - w.d3(x)).abs() < 1e-9);
            let (v, d) = w.value_d1(x);
            assert!((v - w.value(x)).abs() < 1e-15 && (d - w.d1(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_profile() {
        let z = PotentialSpec::zero();
        assert!(z.is_zero());
        assert_eq!(z.value(3.0), 0.0);
        assert_eq!(z.d3(-1.0), 0.0);
    }

    #[test]
    fn tabulated_spline_tracks_smooth_profile() {
        let dy = 0.01;
        let values: Vec<f64> = (0..=2000).map(|k| -sech(-10.0 + k as f64 * dy).powi(2)).collect();
        let tab = PotentialSpec::new(Profile::Tabulated { y0: -10.0, dy, values }, 1.0, 0.5).unwrap();
        let exact = PotentialSpec::sech2_well(-1.0, 0.5).unwrap();
        for &x in &[-6.0, -1.3, 0.0, 2.2] {
            assert!((tab.value(x) - exact.value(x)).abs() < 1e-7);
            assert!((tab.d1(x) - exact.d1(x)).abs() < 1e-6);
            assert!((tab.d2(x) - exact.d2(x)).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_bad_slowness() {
        assert!(PotentialSpec::sech2_well(-1.0, 0.0).is_err());
        assert!(PotentialSpec::sech2_well(-1.0, 1.5).is_err());
    }

    #[test]
    fn deserialises_from_toml() {
        let mut spec: PotentialSpec = toml::from_str("h = 0.2\namplitude = -1.0\n[profile]\nkind = \"sech2well\"\n").unwrap();
        spec.prepare().unwrap();
        assert_eq!(spec, PotentialSpec::sech2_well(-1.0, 0.2).unwrap());
    }
}
