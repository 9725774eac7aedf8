//! Periodic 1D grid and complex fields sampled on it.
//!
//! The box `[-L/2, L/2)` stands in for the real line. All fields of interest
//! (solitons, perturbations, eigenfunctions) decay exponentially, so the
//! periodic wrap-around is below roundoff once the box is a few dozen soliton
//! widths wide.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

pub type C64 = Complex<f64>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_points: usize,
    domain_length: f64,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(n_points: usize, domain_length: f64) -> Result<Self> {
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        if !n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("point count must be even, got {n_points}")));
        }
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::InvalidGrid(format!("domain length must be positive, got {domain_length}")));
        }
        Ok(Self { n_points, domain_length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn spacing(&self) -> f64 {
        self.domain_length / self.n_points as f64
    }

    /// Left edge of the box, `-L/2`.
    pub fn x_min(&self) -> f64 {
        -0.5 * self.domain_length
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min() + k as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.x(k)).collect()
    }

    /// Physical wavenumbers in FFT order: `0, 1, .., N/2-1, -N/2, .., -1` times `2π/L`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = 2.0 * PI / self.domain_length;
        (0..n)
            .map(|j| {
                let m = if j < n / 2 { j } else { j - n };
                m as f64 * dk
            })
            .collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.n_points / 2
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.n_points == other.n_points && self.domain_length == other.domain_length
    }
}

/// Complex samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: Grid,
    values: Vec<C64>,
}

impl WaveField {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidField(format!("non-finite sample at index {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without checking finiteness. Length must match.
    pub(crate) fn from_raw(grid: Grid, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![C64::new(0.0, 0.0); grid.n_points()])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> C64) -> Self {
        let values = (0..grid.n_points()).map(|k| f(grid.x(k))).collect();
        Self::from_raw(grid, values)
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64, C64) -> C64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &z)| f(self.grid.x(k), z))
            .collect();
        Self::from_raw(self.grid, values)
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|_, z| z * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|_, z| z.conj())
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Pointwise product `self · other`.
    pub fn pointwise(&self, other: &WaveField) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self::from_raw(self.grid, values))
    }

    pub fn check_grid(&self, other: &WaveField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Rectangle rule `Δx Σ f_k`, spectrally accurate for smooth periodic or
    /// rapidly decaying integrands.
    pub fn integrate(&self) -> C64 {
        let s: C64 = self.values.iter().sum();
        s * self.grid.spacing()
    }

    /// Real inner product `⟨u, v⟩ = Re ∫ u v̄`.
    pub fn inner(&self, other: &WaveField) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a * b.conj()).re).sum();
        Ok(s * self.grid.spacing())
    }

    /// `ω(u, v) = Im ∫ u v̄`.
    pub fn symplectic_pairing(&self, other: &WaveField) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a * b.conj()).im).sum();
        Ok(s * self.grid.spacing())
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn h1_norm_sq(&self) -> f64 {
        self.l2_norm_sq() + self.derivative().l2_norm_sq()
    }

    pub fn h1_norm(&self) -> f64 {
        self.h1_norm_sq().sqrt()
    }

    /// Unnormalised forward DFT of the samples.
    pub fn spectrum(&self) -> Vec<C64> {
        let (fwd, _) = fft_pair(self.grid.n_points());
        let mut buf = self.values.clone();
        fwd.process(&mut buf);
        buf
    }

    /// Inverse of [`WaveField::spectrum`] (includes the `1/N`).
    pub fn from_spectrum(grid: Grid, mut spectrum: Vec<C64>) -> Self {
        let (_, inv) = fft_pair(grid.n_points());
        inv.process(&mut spectrum);
        let norm = 1.0 / grid.n_points() as f64;
        spectrum.iter_mut().for_each(|z| *z *= norm);
        Self::from_raw(grid, spectrum)
    }

    /// Applies the Fourier multiplier `m(k)` (with `k` the physical wavenumber).
    pub fn fourier_multiply(&self, m: impl Fn(f64) -> C64) -> Self {
        let mut spec = self.spectrum();
        for (z, k) in spec.iter_mut().zip(self.grid.wavenumbers()) {
            *z *= m(k);
        }
        Self::from_spectrum(self.grid, spec)
    }

    /// Spectral first derivative. The Nyquist coefficient is zeroed so that
    /// real fields have real derivatives.
    pub fn derivative(&self) -> Self {
        let mut spec = self.spectrum();
        let ks = self.grid.wavenumbers();
        for (z, k) in spec.iter_mut().zip(&ks) {
            *z *= C64::new(0.0, *k);
        }
        spec[self.grid.nyquist_index()] = C64::new(0.0, 0.0);
        self.keep_real(Self::from_spectrum(self.grid, spec))
    }

    /// Spectral second derivative, multiplier `-k²` on every mode.
    pub fn second_derivative(&self) -> Self {
        self.keep_real(self.fourier_multiply(|k| C64::new(-k * k, 0.0)))
    }

    /// Real input to a real multiplier gives real output; drop FFT roundoff.
    fn keep_real(&self, mut out: Self) -> Self {
        if self.values.iter().all(|z| z.im == 0.0) {
            out.values.iter_mut().for_each(|z| z.im = 0.0);
        }
        out
    }

    /// Translates the field by `shift` (periodic, exact for band-limited data).
    pub fn translate(&self, shift: f64) -> Self {
        self.fourier_multiply(|k| C64::from_polar(1.0, -k * shift))
    }

    /// Evaluates the trigonometric interpolant of the samples at arbitrary points.
    ///
    /// The Nyquist mode is split symmetrically into a cosine, so real samples
    /// interpolate to a real function. Cost is `O(N)` per point.
    pub fn interpolate_at(&self, points: &[f64]) -> Vec<C64> {
        let n = self.grid.n_points();
        let half = n / 2;
        let mut coef = self.spectrum();
        let inv_n = 1.0 / n as f64;
        coef.iter_mut().for_each(|z| *z *= inv_n);
        // Reorder to ascending modes -(N/2-1) ..= N/2-1.
        let ascending: Vec<C64> = ((half + 1)..n).chain(0..half).map(|j| coef[j]).collect();
        let nyquist = coef[half];
        let dk = 2.0 * PI / self.grid.domain_length();
        let x0 = self.grid.x_min();
        points
            .iter()
            .map(|&y| {
                let theta = dk * (y - x0);
                let step = C64::from_polar(1.0, theta);
                let mut z = C64::from_polar(1.0, -theta * (half as f64 - 1.0));
                let mut acc = C64::new(0.0, 0.0);
                for c in &ascending {
                    acc += c * z;
                    z *= step;
                }
                acc + nyquist * (theta * half as f64).cos()
            })
            .collect()
    }

    /// Values of the trigonometric interpolant at `y_k = scale·x_k + offset`
    /// for every grid index `k`, via a chirp-z transform in `O(N log N)`.
    ///
    /// Agrees with [`WaveField::interpolate_at`] on the same points.
    pub fn resample_affine(&self, scale: f64, offset: f64) -> Vec<C64> {
        let n = self.grid.n_points();
        let half = n / 2;
        let m_max = half - 1;
        let x0 = self.grid.x_min();
        let dk = 2.0 * PI / self.grid.domain_length();
        // θ_k = dk (y_k − x0) = φ0 + α k
        let phi0 = dk * ((scale - 1.0) * x0 + offset);
        let alpha = 2.0 * PI * scale / n as f64;

        let mut coef = self.spectrum();
        let inv_n = 1.0 / n as f64;
        coef.iter_mut().for_each(|z| *z *= inv_n);
        let nyquist = coef[half];

        let terms = 2 * m_max + 1;
        let p = (terms + n - 1).next_power_of_two();
        let mut a = vec![C64::new(0.0, 0.0); p];
        for (j, slot) in a.iter_mut().enumerate().take(terms) {
            let m = j as i64 - m_max as i64;
            let c = coef[m.rem_euclid(n as i64) as usize];
            let jf = j as f64;
            *slot = c * C64::from_polar(1.0, m as f64 * phi0 + 0.5 * alpha * jf * jf);
        }
        let mut kern = vec![C64::new(0.0, 0.0); p];
        for d in -(terms as i64 - 1)..(n as i64) {
            let df = d as f64;
            kern[d.rem_euclid(p as i64) as usize] = C64::from_polar(1.0, -0.5 * alpha * df * df);
        }
        let (fwd, inv) = fft_pair(p);
        fwd.process(&mut a);
        fwd.process(&mut kern);
        a.iter_mut().zip(&kern).for_each(|(x, y)| *x *= y);
        inv.process(&mut a);
        let inv_p = 1.0 / p as f64;
        (0..n)
            .map(|k| {
                let kf = k as f64;
                let chirp = C64::from_polar(inv_p, alpha * (0.5 * kf * kf - m_max as f64 * kf));
                chirp * a[k] + nyquist * (half as f64 * (phi0 + alpha * kf)).cos()
            })
            .collect()
    }

    /// Writes `x,re,im` rows with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["x", "re", "im"])?;
        for (k, z) in self.values.iter().enumerate() {
            wtr.write_record([self.grid.x(k).to_string(), z.re.to_string(), z.im.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the format written by [`WaveField::write_csv`]; lines starting with
    /// `#` are ignored. The box length is inferred from the first abscissa, `-L/2`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidField(format!("bad number in column {i}")))
            };
            xs.push(parse(0)?);
            values.push(C64::new(parse(1)?, parse(2)?));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidField("need at least two rows".into()));
        }
        let grid = Grid::new(xs.len(), -2.0 * xs[0])?;
        if (xs[1] - xs[0] - grid.spacing()).abs() > 1e-9 * grid.spacing() {
            return Err(Error::InvalidField("abscissae are not a periodic grid on [-L/2, L/2)".into()));
        }
        Self::new(grid, values)
    }
}

impl Add for &WaveField {
    type Output = WaveField;
    fn add(self, rhs: &WaveField) -> WaveField {
        assert!(self.grid.same_as(&rhs.grid), "grid mismatch");
        let values = self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect();
        WaveField::from_raw(self.grid, values)
    }
}

impl Sub for &WaveField {
    type Output = WaveField;
    fn sub(self, rhs: &WaveField) -> WaveField {
        assert!(self.grid.same_as(&rhs.grid), "grid mismatch");
        let values = self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect();
        WaveField::from_raw(self.grid, values)
    }
}

impl Mul<f64> for &WaveField {
    type Output = WaveField;
    fn mul(self, rhs: f64) -> WaveField {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Mul<C64> for &WaveField {
    type Output = WaveField;
    fn mul(self, rhs: C64) -> WaveField {
        self.scale(rhs)
    }
}

/// `sech x`, written to stay finite for large `|x|`.
pub fn sech(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}
