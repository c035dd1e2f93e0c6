//! N-dimensional FFTs and the normalized grid-value ↔ coefficient maps.

use super::Grid;
use crate::par;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

/// Cached FFT plans keyed by (length, inverse).
type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(HashMap::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        p.borrow_mut()
            .entry((len, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// Runs batched 1D FFTs over `lines` (concatenated lines of length `len`).
fn fft_lines(lines: &mut [Complex64], len: usize, inverse: bool) {
    // Batches of lines are independent, which is where the parallelism lives.
    let batch = (len * 64).max(len).min(lines.len()).max(1);
    par::for_each_chunk_mut(lines, batch, |_, chunk| {
        let fft = plan(len, inverse);
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut scratch);
    });
}

/// Unnormalized in-place FFT over every axis of a row-major array.
pub fn fft_nd(values: &mut [Complex64], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(values.len(), total, "array length does not match dims");
    for axis in 0..dims.len() {
        let n = dims[axis];
        let inner: usize = dims[axis + 1..].iter().product();
        if inner == 1 {
            fft_lines(values, n, inverse);
            continue;
        }
        let block = n * inner;
        let mut buf = vec![Complex64::new(0.0, 0.0); block];
        for chunk in values.chunks_mut(block) {
            // Transpose the (n × inner) block into `inner` contiguous lines.
            for j in 0..n {
                for i in 0..inner {
                    buf[i * n + j] = chunk[j * inner + i];
                }
            }
            fft_lines(&mut buf, n, inverse);
            for j in 0..n {
                for i in 0..inner {
                    chunk[j * inner + i] = buf[i * n + j];
                }
            }
        }
    }
}

/// Multiplies by `scale·(−1)^{Σ k_a}`, the phase `e^{−ip·x₀}` of the centred box origin.
fn apply_parity(grid: &Grid, values: &mut [Complex64], scale: f64) {
    let strides = grid.strides();
    let points = grid.points().to_vec();
    par::for_each_chunk_mut(values, 4096, |c, chunk| {
        let base = c * 4096;
        for (o, v) in chunk.iter_mut().enumerate() {
            let flat = base + o;
            let parity: usize = strides.iter().zip(&points).map(|(s, n)| (flat / s) % n).sum();
            *v *= if parity.is_multiple_of(2) { scale } else { -scale };
        }
    });
}

/// Grid values → orthonormal momentum coefficients (FFT order).
pub fn to_spectrum(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
    let mut c = values.to_vec();
    fft_nd(&mut c, grid.points(), false);
    let scale = grid.cell_volume() / grid.box_length().powf(grid.dim() as f64 / 2.0);
    apply_parity(grid, &mut c, scale);
    c
}

/// Orthonormal momentum coefficients → grid values.
pub fn from_spectrum(grid: &Grid, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut v = coeffs.to_vec();
    apply_parity(grid, &mut v, grid.box_length().powf(-(grid.dim() as f64) / 2.0));
    fft_nd(&mut v, grid.points(), true);
    v
}

/// Evaluates the band-limited interpolant of `coeffs` at an arbitrary point.
pub fn evaluate_at(grid: &Grid, coeffs: &[Complex64], x: &[f64]) -> Complex64 {
    let tables: Vec<Vec<Complex64>> = (0..grid.dim())
        .map(|a| grid.momenta(a).iter().map(|p| Complex64::from_polar(1.0, p * x[a])).collect())
        .collect();
    let norm = grid.box_length().powf(-(grid.dim() as f64) / 2.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (flat, c) in coeffs.iter().enumerate() {
        let idx = grid.unflatten(flat);
        let phase = idx.iter().enumerate().fold(Complex64::new(1.0, 0.0), |p, (a, &k)| p * tables[a][k]);
        acc += c * phase;
    }
    acc * norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_wave_has_single_coefficient() {
        let g = Grid::new(vec![8, 16], 4.0).unwrap();
        let (k0, k1) = (2usize, 13usize);
        let vals: Vec<Complex64> = (0..g.len())
            .map(|f| {
                let x = g.position(f);
                Complex64::from_polar(1.0, g.momentum(0, k0) * x[0] + g.momentum(1, k1) * x[1])
            })
            .collect();
        let c = to_spectrum(&g, &vals);
        let target = g.flatten(&[k0, k1]);
        for (f, v) in c.iter().enumerate() {
            if f == target {
                // ‖e^{ipx}‖ = L^{d/2} = 4.
                assert!((v - Complex64::new(4.0, 0.0)).norm() < 1e-12);
            } else {
                assert!(v.norm() < 1e-12);
            }
        }
        let back = from_spectrum(&g, &c);
        assert!(back.iter().zip(&vals).all(|(a, b)| (a - b).norm() < 1e-12));
        let x = [0.3, -1.1];
        let direct = Complex64::from_polar(1.0, g.momentum(0, k0) * x[0] + g.momentum(1, k1) * x[1]);
        assert!((evaluate_at(&g, &c, &x) - direct).norm() < 1e-12);
    }
}
