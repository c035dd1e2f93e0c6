//! Complex fields sampled on a [`Grid`].

use super::{spectral, Grid};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;

/// Values of a field at the grid nodes (row-major, axes in declared order).
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridField {
    /// Wraps node values; the length must match the grid.
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    /// The zero field.
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.position(k))).collect();
        Self { grid: grid.clone(), values }
    }

    /// Field with the given orthonormal momentum coefficients.
    pub fn from_spectrum(grid: &Grid, coeffs: &[Complex64]) -> Self {
        Self { grid: grid.clone(), values: spectral::from_spectrum(grid, coeffs) }
    }

    /// Random band-limited field: independent Gaussian coefficients on the
    /// momenta with `|p_a| ≤ band · p_Nyquist` on every axis, zero elsewhere.
    pub fn random_band_limited<R: Rng>(grid: &Grid, band: f64, rng: &mut R) -> Self {
        let coeffs: Vec<Complex64> = (0..grid.len())
            .map(|f| {
                let idx = grid.unflatten(f);
                let inside = idx.iter().enumerate().all(|(a, &k)| {
                    let n = grid.points()[a];
                    k != n / 2 && (Grid::signed_index(k, n).unsigned_abs() as f64) <= band * (n / 2) as f64
                });
                let (u, v): (f64, f64) = (rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                if inside {
                    Complex64::new(u, v)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self::from_spectrum(grid, &coeffs)
    }

    /// Orthonormal momentum coefficients (FFT order).
    pub fn spectrum(&self) -> Vec<Complex64> {
        spectral::to_spectrum(&self.grid, &self.values)
    }

    /// The grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Node values.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Mutable node values.
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Consumes the field, returning its values.
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `⟨self, other⟩ = Π h_a Σ conj(self)·other`.
    pub fn inner(&self, other: &GridField) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.grid.cell_volume()
    }

    /// `L²` norm by the trapezoidal rule.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// `self − other`.
    pub fn sub(&self, other: &GridField) -> GridField {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: Complex64, other: &GridField) -> GridField {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// `a·self`.
    pub fn scaled(&self, a: Complex64) -> GridField {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| a * v).collect() }
    }

    /// Value of the band-limited interpolant at an arbitrary point.
    pub fn interpolate(&self, x: &[f64]) -> Complex64 {
        spectral::evaluate_at(&self.grid, &self.spectrum(), x)
    }
}
