//! Operator-norm estimation by power iteration on `T*T`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A linear map between finite-dimensional coefficient spaces with its adjoint.
pub trait LinearMap: Sync {
    /// Input dimension.
    fn dim_in(&self) -> usize;
    /// Output dimension.
    fn dim_out(&self) -> usize;
    /// `T x`.
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    /// `T* y`.
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;
}

/// A [`LinearMap`] built from a pair of closures.
pub struct FnMap<F, G> {
    dim_in: usize,
    dim_out: usize,
    forward: F,
    adjoint: G,
}

impl<F, G> FnMap<F, G>
where
    F: Fn(&[Complex64]) -> Vec<Complex64> + Sync,
    G: Fn(&[Complex64]) -> Vec<Complex64> + Sync,
{
    /// Wraps `forward` (`dim_in → dim_out`) and its adjoint.
    pub fn new(dim_in: usize, dim_out: usize, forward: F, adjoint: G) -> Self {
        Self { dim_in, dim_out, forward, adjoint }
    }
}

impl<F, G> LinearMap for FnMap<F, G>
where
    F: Fn(&[Complex64]) -> Vec<Complex64> + Sync,
    G: Fn(&[Complex64]) -> Vec<Complex64> + Sync,
{
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (self.forward)(x)
    }
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        (self.adjoint)(y)
    }
}

/// Result of a norm estimate.
#[derive(Clone, Copy, Debug)]
pub struct NormEstimate {
    /// Best lower estimate of `‖T‖`.
    pub norm: f64,
    /// Relative change of the estimate over the final iteration.
    pub delta: f64,
    /// Iterations used (summed over restarts).
    pub iterations: usize,
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration on `T*T` from `restarts` random seeds; returns the largest
/// estimate. Stops a run once the relative change falls below `tol`.
pub fn operator_norm(
    map: &dyn LinearMap,
    tol: f64,
    max_iterations: usize,
    restarts: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = NormEstimate { norm: 0.0, delta: f64::INFINITY, iterations: 0 };
    let mut total = 0;
    for _ in 0..restarts.max(1) {
        let mut x: Vec<Complex64> =
            (0..map.dim_in()).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let n0 = vnorm(&x);
        x.iter_mut().for_each(|v| *v /= n0);
        let mut est = 0.0;
        let mut delta = f64::INFINITY;
        for _ in 0..max_iterations {
            total += 1;
            let y = map.apply(&x);
            let new_est = vnorm(&y);
            let w = map.apply_adjoint(&y);
            let wn = vnorm(&w);
            delta = if new_est > 0.0 { (new_est - est).abs() / new_est } else { 0.0 };
            est = new_est;
            if wn == 0.0 {
                break;
            }
            x = w.into_iter().map(|v| v / wn).collect();
            if delta < tol {
                break;
            }
        }
        if !est.is_finite() {
            return Err(Error::NoConvergence { iterations: total, residual: f64::NAN });
        }
        if est > best.norm {
            best = NormEstimate { norm: est, delta, iterations: 0 };
        }
    }
    best.iterations = total;
    if best.delta > tol.max(1e-3) {
        return Err(Error::NoConvergence { iterations: total, residual: best.delta });
    }
    Ok(best)
}

/// Norm of a self-adjoint map (`T* = T`, `apply_adjoint` unused) as the
/// largest `|θ|` among the Ritz values of `steps` Lanczos iterations with full
/// reorthogonalization. `delta` is the relative change of that value over the
/// last five steps.
pub fn hermitian_norm(map: &dyn LinearMap, steps: usize, seed: u64) -> Result<NormEstimate> {
    let n = map.dim_in();
    if map.dim_out() != n {
        return Err(Error::DimensionMismatch { expected: n, found: map.dim_out() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let n0 = vnorm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut basis = vec![v];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut history = Vec::new();
    for j in 0..steps.min(n).max(1) {
        let mut w = map.apply(&basis[j]);
        alpha.push(basis[j].iter().zip(&w).map(|(a, b)| a.conj() * b).sum::<Complex64>().re);
        for _ in 0..2 {
            for b in &basis {
                let c: Complex64 = b.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                w.iter_mut().zip(b).for_each(|(w, b)| *w -= c * b);
            }
        }
        history.push(tridiagonal_extreme(&alpha, &beta)?);
        let bn = vnorm(&w);
        if bn < 1e-13 * history.last().copied().unwrap_or(1.0).max(1e-300) {
            break;
        }
        beta.push(bn);
        basis.push(w.into_iter().map(|x| x / bn).collect());
    }
    let norm = *history.last().expect("at least one step");
    let back = history.len().saturating_sub(6);
    let delta = if norm > 0.0 { (norm - history[back]).abs() / norm } else { 0.0 };
    Ok(NormEstimate { norm, delta, iterations: history.len() })
}

fn tridiagonal_extreme(alpha: &[f64], beta: &[f64]) -> Result<f64> {
    let m = alpha.len();
    let t = faer::Mat::<f64>::from_fn(m, m, |i, j| {
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
    let ev = t
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence { iterations: m, residual: f64::NAN })?;
    Ok(ev.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_map_norm() {
        let d = [0.5, 3.0, 1.0, 2.9];
        let f = |x: &[Complex64]| x.iter().zip(&d).map(|(x, d)| x * d).collect::<Vec<_>>();
        let m = FnMap::new(4, 4, f, f);
        let e = operator_norm(&m, 1e-12, 5000, 2, 7).unwrap();
        assert!((e.norm - 3.0).abs() < 1e-6);
        let h = hermitian_norm(&m, 4, 3).unwrap();
        assert!((h.norm - 3.0).abs() < 1e-12);
    }
}
