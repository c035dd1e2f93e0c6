//! Periodic-box discretization of `L²(ℝ^d)`: grids, fields, FFT-based
//! spectral operators, shifted solves, norm estimation and eigenvalues.
//!
//! Fields live on a centred box `[−L/2, L/2)^d` with `N_a` points on axis
//! `a` (powers of two). Their momentum-space *coefficients*
//! `c_p = L^{−d/2} ∫ψ(x)e^{−ip·x}dx` (trapezoidal rule, exact for
//! band-limited fields) are orthonormally normalized: `Σ|c_p|² = ‖ψ‖²`.
//! Coefficients are stored in FFT order.

mod eigen;
mod field;
mod hamiltonian;
mod io;
mod norm;
mod solve;
pub mod spectral;

pub use eigen::{
    extrapolated_ground_state, lowest_eigenvalue, lowest_eigenvalues, relative_sector_ground_state, EigenOptions,
    EigenPair,
};
pub use field::GridField;
pub use hamiltonian::{
    apply_free_hamiltonian, apply_h_eps, free_multiplier, HamiltonianEps, SchrodingerOperator, SpectralOperator,
};
pub use io::{read_field, write_field, write_slice_csv};
pub use norm::{hermitian_norm, operator_norm, FnMap, LinearMap, NormEstimate};
pub use solve::{
    solve_shifted, solve_shifted_spectrum, DenseResolvent, SolveOptions, SolveStats, DENSE_FALLBACK_POINTS,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A periodic box `[−L/2, L/2)^d` with `N_a` points along axis `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<usize>,
    box_length: f64,
}

impl Grid {
    /// Grid with per-axis point counts (each a power of two ≥ 2) and box length `L`.
    pub fn new(points: Vec<usize>, box_length: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if let Some(n) = points.iter().find(|n| !(n.is_power_of_two() && **n >= 2)) {
            return Err(Error::InvalidGrid(format!("{n} points per axis is not a power of two ≥ 2")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {box_length} must be positive")));
        }
        Ok(Self { points, box_length })
    }

    /// `N` points on each of `dim` axes.
    pub fn cubic(dim: usize, box_length: f64, n: usize) -> Result<Self> {
        Self::new(vec![n; dim], box_length)
    }

    /// Spatial dimension `d`.
    pub fn dim(&self) -> usize {
        self.points.len()
    }

    /// Points per axis.
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    /// Box length `L` (same on every axis).
    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    /// Always false: a grid has at least two points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spacing `h_a = L/N_a` along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.box_length / self.points[axis] as f64
    }

    /// Volume element `Π h_a` of the trapezoidal rule.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Position of node `j` on `axis`: `−L/2 + j h_a`.
    pub fn coordinate(&self, axis: usize, j: usize) -> f64 {
        -0.5 * self.box_length + j as f64 * self.spacing(axis)
    }

    /// Node positions on `axis`.
    pub fn coordinates(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|j| self.coordinate(axis, j)).collect()
    }

    /// Signed wavenumber index of FFT slot `k` on an axis with `n` points.
    pub fn signed_index(k: usize, n: usize) -> i64 {
        if k < n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// FFT slot of a signed wavenumber index (must be in range).
    pub fn slot_of(signed: i64, n: usize) -> usize {
        signed.rem_euclid(n as i64) as usize
    }

    /// Momentum `2πk/L` of FFT slot `k` on `axis`.
    pub fn momentum(&self, axis: usize, k: usize) -> f64 {
        2.0 * PI * Self::signed_index(k, self.points[axis]) as f64 / self.box_length
    }

    /// Momenta of `axis` in FFT order.
    pub fn momenta(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|k| self.momentum(axis, k)).collect()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for a in (0..self.dim() - 1).rev() {
            s[a] = s[a + 1] * self.points[a + 1];
        }
        s
    }

    /// Multi-index of a flat (row-major) position.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.points[a];
            flat /= self.points[a];
        }
        idx
    }

    /// Flat position of a multi-index.
    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.points).fold(0, |acc, (i, n)| acc * n + i)
    }

    /// Node position of a flat index.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat).iter().enumerate().map(|(a, &j)| self.coordinate(a, j)).collect()
    }

    /// Array `Σ_a f_a[idx_a]` over the grid for per-axis tables `f_a`.
    pub fn separable_sum(&self, tables: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; 1];
        for (a, t) in tables.iter().enumerate() {
            assert_eq!(t.len(), self.points[a]);
            let mut next = Vec::with_capacity(out.len() * t.len());
            for base in &out {
                next.extend(t.iter().map(|v| base + v));
            }
            out = next;
        }
        out
    }

    /// Largest absolute momentum resolved on `axis` (the Nyquist value).
    pub fn nyquist(&self, axis: usize) -> f64 {
        PI * self.points[axis] as f64 / self.box_length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = Grid::cubic(2, 8.0, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert!((g.spacing(0) * 16.0 - 8.0).abs() == 0.0);
        assert_eq!(g.coordinate(0, 8), 0.0);
        assert_eq!(g.unflatten(g.flatten(&[3, 11])), vec![3, 11]);
        let p = g.momenta(0);
        assert!((p[1] + p[15]).abs() < 1e-15);
        assert!(Grid::cubic(2, 8.0, 12).is_err());
        assert!(Grid::cubic(2, -1.0, 16).is_err());
    }

    #[test]
    fn separable_sum_matches_direct() {
        let g = Grid::new(vec![2, 4], 1.0).unwrap();
        let s = g.separable_sum(&[vec![1.0, 2.0], vec![0.0, 10.0, 20.0, 30.0]]);
        assert_eq!(s[g.flatten(&[1, 2])], 22.0);
    }
}
