//! Lowest eigenvalues: shift-invert Lanczos with full reorthogonalization for
//! grid operators, and the two-body relative-coordinate ground state with its
//! `ε → 0` extrapolation.

use super::solve::{solve_shifted_spectrum, SolveOptions};
use super::{Grid, SchrodingerOperator, SpectralOperator};
use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::model::SystemSpec;
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Controls for [`lowest_eigenvalue`].
#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Initial shift; must lie below the lowest eigenvalue. Lowered
    /// automatically when the Ritz values show it does not.
    pub shift: f64,
    /// Lanczos steps per attempt.
    pub krylov: usize,
    /// Target relative residual `‖Hx − λx‖/|λ|`.
    pub tol: f64,
    /// Number of shift corrections before giving up.
    pub max_attempts: usize,
    /// Seed of the random start vector.
    pub seed: u64,
}

impl EigenOptions {
    /// Shift below the deepest possible bound state of `spec`:
    /// `−1.2 · (max μ g²/2) · (pair count)² − 0.05`.
    pub fn for_spec(spec: &SystemSpec) -> Self {
        let mu = spec.pairs().iter().map(|p| p.mu).fold(0.0, f64::max);
        let pc = spec.pair_count() as f64;
        let shift = -1.2 * 0.5 * mu * spec.g() * spec.g() * pc * pc - 0.05;
        Self { shift, krylov: 24, tol: 1e-9, max_attempts: 6, seed: 17 }
    }
}

/// An approximate eigenpair.
#[derive(Clone, Debug)]
pub struct EigenPair {
    /// Eigenvalue.
    pub value: f64,
    /// Normalized eigenvector coefficients.
    pub vector: Vec<Complex64>,
    /// `‖Hx − λx‖`.
    pub residual: f64,
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Lowest eigenpair of `op` by Lanczos on `(H − s)⁻¹`.
pub fn lowest_eigenvalue(op: &dyn SpectralOperator, opts: &EigenOptions) -> Result<EigenPair> {
    Ok(lowest_eigenvalues(op, 1, opts)?.remove(0))
}

/// The `k` lowest eigenpairs of `op`, ascending, by Lanczos with full
/// reorthogonalization on the shift-inverted operator `(H − s)⁻¹`.
pub fn lowest_eigenvalues(op: &dyn SpectralOperator, k: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    let n = op.grid().len();
    let k = k.max(1).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let mut shift = opts.shift;
    let mut steps = opts.krylov.max(2 * k + 8);
    let solve_opts = SolveOptions::with_tol((opts.tol * 1e-2).max(1e-13));
    for _ in 0..opts.max_attempts.max(1) {
        let s = Complex64::new(shift, 0.0);
        let m_max = steps.min(n);
        let nrm = vnorm(&start);
        let mut basis = vec![start.iter().map(|v| v / nrm).collect::<Vec<_>>()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        for j in 0..m_max {
            let (mut w, _) = solve_shifted_spectrum(op, s, &basis[j], &solve_opts)?;
            alpha.push(dot(&basis[j], &w).re);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(w, v)| *w -= c * v);
                }
            }
            let b = vnorm(&w);
            if j + 1 == m_max || b < 1e-14 {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let m = alpha.len();
        let t = Mat::<f64>::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i == j + 1 {
                beta[j]
            } else if j == i + 1 {
                beta[i]
            } else {
                0.0
            }
        });
        let evd = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::NoConvergence { iterations: m, residual: f64::NAN })?;
        let min_theta = (0..m).map(|i| evd.S()[i]).fold(f64::INFINITY, f64::min);
        if min_theta < 0.0 {
            // A negative Ritz value of (H − s)⁻¹ means s is above part of the spectrum.
            let lowest = shift + 1.0 / min_theta;
            shift = lowest - 1.0 - 0.5 * lowest.abs();
            continue;
        }
        // Largest θ of (H − s)⁻¹ ↔ lowest eigenvalues of H.
        let mut pairs = Vec::with_capacity(k);
        for col in (m.saturating_sub(k)..m).rev() {
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            for (i, v) in basis.iter().enumerate().take(m) {
                let c = evd.U()[(i, col)];
                x.iter_mut().zip(v).for_each(|(x, v)| *x += c * v);
            }
            let xn = vnorm(&x);
            x.iter_mut().for_each(|v| *v /= xn);
            let hx = op.apply(&x);
            let value = dot(&x, &hx).re;
            let residual = hx.iter().zip(&x).map(|(h, x)| (h - value * x).norm_sqr()).sum::<f64>().sqrt();
            pairs.push(EigenPair { value, vector: x, residual });
        }
        if pairs.len() == k && pairs.iter().all(|p| p.residual <= opts.tol * p.value.abs().max(1.0)) {
            pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
            return Ok(pairs);
        }
        // Restart from the Ritz block with a longer recurrence and a shift
        // just below the current lowest estimate.
        let lowest = pairs.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        start = vec![Complex64::new(0.0, 0.0); n];
        for p in &pairs {
            start.iter_mut().zip(&p.vector).for_each(|(s, v)| *s += v);
        }
        steps = (steps * 3 / 2).min(n);
        shift = lowest - 0.5 * (lowest - shift).clamp(1e-3, 1.0);
    }
    Err(Error::NoConvergence { iterations: steps, residual: f64::NAN })
}

/// Ground-state energy of two particles in the zero-total-momentum sector:
/// `p²/2μ − g V_ε(r)` on the periodic relative coordinate, by shift-invert
/// Lanczos.
pub fn relative_sector_ground_state(spec: &SystemSpec, eps: f64, bump: &BumpProfile, grid: &Grid) -> Result<f64> {
    if spec.n() != 2 {
        return Err(Error::InvalidSpec(format!("relative sector needs n = 2, got {}", spec.n())));
    }
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: grid.dim() });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec(format!("epsilon must be positive, got {eps}")));
    }
    let support = eps * bump.support_radius();
    if support >= 0.5 * grid.box_length() {
        return Err(Error::PotentialOverflowsBox { support, half_box: 0.5 * grid.box_length() });
    }
    let points = 2.0 * support / grid.spacing(0);
    if points < super::hamiltonian::MIN_POINTS_ACROSS_SUPPORT as f64 {
        return Err(Error::UnresolvedBump { points, required: super::hamiltonian::MIN_POINTS_ACROSS_SUPPORT });
    }
    let mu = spec.pairs()[0].mu;
    let scaled = bump.scaled(eps);
    let g = spec.g();
    let potential = (0..grid.len()).map(|j| -g * scaled.value(grid.coordinate(0, j))).collect();
    let op = SchrodingerOperator::new(grid, &[mu], potential)?;
    Ok(lowest_eigenvalue(&op, &EigenOptions::for_spec(spec))?.value)
}

/// Two-body ground energies over `eps_list` and their polynomial
/// extrapolation to `ε = 0` (returned as `(rows, extrapolated)`).
pub fn extrapolated_ground_state(
    spec: &SystemSpec,
    eps_list: &[f64],
    bump: &BumpProfile,
    grid: &Grid,
) -> Result<(Vec<(f64, f64)>, f64)> {
    if eps_list.is_empty() {
        return Err(Error::InvalidSpec("extrapolation needs at least one epsilon".into()));
    }
    let rows = eps_list
        .iter()
        .map(|&e| relative_sector_ground_state(spec, e, bump, grid).map(|v| (e, v)))
        .collect::<Result<Vec<_>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
    Ok((rows, crate::quad::extrapolate_to_zero(&xs, &ys)))
}
