//! Shifted solves `(H − z)φ = b`: restarted GMRES right-preconditioned by the
//! free resolvent `(H₀ − z)⁻¹`, with a dense LU fallback on small grids.

use super::{GridField, SpectralOperator};
use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;

/// Grids with at most this many points may fall back to dense LU.
pub const DENSE_FALLBACK_POINTS: usize = 4096;

/// Solver controls.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Relative residual target `‖(H−z)φ − b‖ ≤ tol‖b‖`.
    pub tol: f64,
    /// Krylov dimension before restart.
    pub restart: usize,
    /// Cap on the total number of Krylov steps.
    pub max_iterations: usize,
    /// Allow the dense fallback when the Krylov iteration stalls.
    pub dense_fallback: bool,
}

impl SolveOptions {
    /// Defaults with the given tolerance.
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, restart: 60, max_iterations: 3000, dense_fallback: true }
    }
}

/// Diagnostics of a solve.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveStats {
    /// Krylov steps taken.
    pub iterations: usize,
    /// Final relative residual (recomputed from scratch).
    pub residual: f64,
    /// Whether the dense fallback produced the answer.
    pub dense: bool,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn shifted_apply(op: &dyn SpectralOperator, z: Complex64, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = op.apply(x);
    y.iter_mut().zip(x).for_each(|(y, x)| *y -= z * x);
    y
}

/// Solves `(H − z)φ = b` for coefficient vectors.
pub fn solve_shifted_spectrum(
    op: &dyn SpectralOperator,
    z: Complex64,
    rhs: &[Complex64],
    opts: &SolveOptions,
) -> Result<(Vec<Complex64>, SolveStats)> {
    match gmres(op, z, rhs, opts) {
        Ok(r) => Ok(r),
        Err(e @ (Error::NoConvergence { .. } | Error::ShiftTooCloseToSpectrum { .. }))
            if opts.dense_fallback && rhs.len() <= DENSE_FALLBACK_POINTS =>
        {
            let dense = DenseResolvent::new(op, z).map_err(|_| e)?;
            let x = dense.solve(rhs);
            let res = norm(&sub(&shifted_apply(op, z, &x), rhs)) / norm(rhs).max(f64::MIN_POSITIVE);
            Ok((x, SolveStats { iterations: 0, residual: res, dense: true }))
        }
        Err(e) => Err(e),
    }
}

fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Solves `(H − z)φ = rhs` on node values.
pub fn solve_shifted(op: &dyn SpectralOperator, z: Complex64, rhs: &GridField, tol: f64) -> Result<GridField> {
    let (x, _) = solve_shifted_spectrum(op, z, &rhs.spectrum(), &SolveOptions::with_tol(tol))?;
    Ok(GridField::from_spectrum(op.grid(), &x))
}

fn gmres(
    op: &dyn SpectralOperator,
    z: Complex64,
    b: &[Complex64],
    opts: &SolveOptions,
) -> Result<(Vec<Complex64>, SolveStats)> {
    let n = b.len();
    let bnorm = norm(b);
    let zero = Complex64::new(0.0, 0.0);
    if bnorm == 0.0 {
        return Ok((vec![zero; n], SolveStats::default()));
    }
    let precond: Vec<Complex64> = op.kinetic().iter().map(|k| 1.0 / (Complex64::new(*k, 0.0) - z)).collect();
    if precond.iter().any(|p| !p.is_finite()) {
        return Err(Error::ShiftTooCloseToSpectrum { re: z.re, im: z.im });
    }
    let m = opts.restart.max(2);
    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    let mut total = 0;
    let mut last_cycle_start = rnorm;
    while total < opts.max_iterations {
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / rnorm).collect()];
        let mut h = vec![vec![zero; m]; m + 1];
        let (mut cs, mut sn) = (vec![zero; m], vec![zero; m]);
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(rnorm, 0.0);
        let mut k_used = 0;
        for j in 0..m {
            let pv: Vec<Complex64> = basis[j].iter().zip(&precond).map(|(v, p)| v * p).collect();
            let mut w = shifted_apply(op, z, &pv);
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[i][j] += c;
                    w.iter_mut().zip(v).for_each(|(w, v)| *w -= c * v);
                }
            }
            let wn = norm(&w);
            h[j + 1][j] = Complex64::new(wn, 0.0);
            for i in 0..j {
                let t = cs[i].conj() * h[i][j] + sn[i].conj() * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (a, bb) = (h[j][j], h[j + 1][j]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if den == 0.0 {
                return Err(Error::ShiftTooCloseToSpectrum { re: z.re, im: z.im });
            }
            cs[j] = a / den;
            sn[j] = bb / den;
            h[j][j] = Complex64::new(den, 0.0);
            h[j + 1][j] = zero;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j].conj() * g[j];
            k_used = j + 1;
            total += 1;
            if g[j + 1].norm() <= 0.5 * opts.tol * bnorm || wn <= 1e-300 || total >= opts.max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![zero; k_used];
        for i in (0..k_used).rev() {
            let s: Complex64 = (i + 1..k_used).map(|l| h[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut dx = vec![zero; n];
        for (i, yi) in y.iter().enumerate() {
            dx.iter_mut().zip(&basis[i]).for_each(|(d, v)| *d += yi * v);
        }
        x.iter_mut().zip(dx.iter().zip(&precond)).for_each(|(x, (d, p))| *x += d * p);
        r = sub(b, &shifted_apply(op, z, &x));
        rnorm = norm(&r);
        if rnorm <= opts.tol * bnorm {
            return Ok((x, SolveStats { iterations: total, residual: rnorm / bnorm, dense: false }));
        }
        if rnorm > 0.99 * last_cycle_start {
            break;
        }
        last_cycle_start = rnorm;
    }
    let scale = z.norm().max(1.0);
    if z.im.abs() < opts.tol * scale && norm(&x) * scale > 1e6 * bnorm {
        return Err(Error::ShiftTooCloseToSpectrum { re: z.re, im: z.im });
    }
    Err(Error::NoConvergence { iterations: total, residual: rnorm / bnorm })
}

/// Dense LU factorization of `H − z` in the coefficient basis.
pub struct DenseResolvent {
    lu: faer::linalg::solvers::PartialPivLu<Complex64>,
    dim: usize,
}

impl DenseResolvent {
    /// Assembles `H − z` column by column and factorizes it.
    pub fn new(op: &dyn SpectralOperator, z: Complex64) -> Result<Self> {
        let n = op.grid().len();
        let zero = Complex64::new(0.0, 0.0);
        let columns: Vec<Vec<Complex64>> = crate::par::map_range(n, |j| {
            let mut e = vec![zero; n];
            e[j] = Complex64::new(1.0, 0.0);
            shifted_apply(op, z, &e)
        });
        let a = Mat::<Complex64>::from_fn(n, n, |i, j| columns[j][i]);
        drop(columns);
        let lu = a.partial_piv_lu();
        Ok(Self { lu, dim: n })
    }

    /// `(H − z)⁻¹ b` for a coefficient vector.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let rhs = Mat::<Complex64>::from_fn(self.dim, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.dim).map(|i| x[(i, 0)]).collect()
    }

    /// `(H − z)⁻¹ ψ` on node values.
    pub fn solve_field(&self, psi: &GridField) -> GridField {
        GridField::from_spectrum(psi.grid(), &self.solve(&psi.spectrum()))
    }
}
