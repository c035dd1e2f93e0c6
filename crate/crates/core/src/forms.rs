//! Trace operators onto collision hyperplanes `x_i = x_j` and the quadratic
//! form `t(φ,ψ) = Σ_j a_j⟨∂_jφ, ∂_jψ⟩ − g Σ_σ ⟨τ_σφ, τ_σψ⟩` with `a_j = 1/2m_j`.
//!
//! A pair `σ = (i, j)` has relative coordinate `r = x_i − x_j` and centre of
//! mass `R`; the change of variables has unit Jacobian, so `τ_σψ(R, y) =
//! ψ(x_i = x_j = R, y)` where `y` are the spectator coordinates. On a cubic
//! periodic grid with `N` points per axis the trace of a band-limited field is
//! band-limited with total momenta `P = p_i + p_j ∈ (2π/L)[−N, N − 2]`, so it
//! lives exactly on the reduced grid with `2N` points along `R` and `N` along
//! every spectator axis.

use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::grid::{self, Grid, GridField, HamiltonianEps, SpectralOperator};
use crate::model::{PairIndex, SystemSpec};
use crate::par;
use crate::quad::extrapolate_to_zero;
use num_complex::Complex64;
use serde::Serialize;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The trace `τ_σ` from a lab grid onto the reduced grid of pair `σ`.
#[derive(Clone, Debug)]
pub struct TraceOperator {
    sigma: PairIndex,
    lab: Grid,
    reduced: Grid,
    target: Vec<u32>,
}

impl TraceOperator {
    /// Trace of pair `sigma` on the cubic `lab` grid.
    pub fn new(lab: &Grid, sigma: &PairIndex) -> Result<Self> {
        let n = lab.dim();
        if sigma.j >= n || sigma.i >= sigma.j {
            return Err(Error::DimensionMismatch { expected: sigma.j + 1, found: n });
        }
        let pts = lab.points();
        if pts.iter().any(|&p| p != pts[0]) {
            return Err(Error::InvalidGrid("traces need the same point count on every axis".into()));
        }
        let m = pts[0];
        let spect = sigma.spectators(n);
        let mut red_points = vec![2 * m];
        red_points.extend(spect.iter().map(|_| m));
        let reduced = Grid::new(red_points, lab.box_length())?;
        let target = (0..lab.len())
            .map(|f| {
                let idx = lab.unflatten(f);
                let p = Grid::signed_index(idx[sigma.i], m) + Grid::signed_index(idx[sigma.j], m);
                let mut t = Grid::slot_of(p, 2 * m);
                for &k in &spect {
                    t = t * m + idx[k];
                }
                t as u32
            })
            .collect();
        Ok(Self { sigma: *sigma, lab: lab.clone(), reduced, target })
    }

    /// The pair.
    pub fn sigma(&self) -> &PairIndex {
        &self.sigma
    }

    /// The lab grid.
    pub fn lab_grid(&self) -> &Grid {
        &self.lab
    }

    /// The reduced grid `(R, spectators)`.
    pub fn reduced_grid(&self) -> &Grid {
        &self.reduced
    }

    /// `τ` on coefficients: reduced coefficient `(P, p_y)` is
    /// `L^{−1/2} Σ_{p_i + p_j = P} c_{p_i p_j p_y}`.
    pub fn apply_spectrum(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let norm = self.lab.box_length().powf(-0.5);
        let mut out = vec![ZERO; self.reduced.len()];
        for (c, &t) in coeffs.iter().zip(&self.target) {
            out[t as usize] += c * norm;
        }
        out
    }

    /// `τ*` on coefficients.
    pub fn adjoint_spectrum(&self, reduced: &[Complex64]) -> Vec<Complex64> {
        let norm = self.lab.box_length().powf(-0.5);
        self.target.iter().map(|&t| reduced[t as usize] * norm).collect()
    }

    /// `τψ` as a field on the reduced grid.
    pub fn apply(&self, psi: &GridField) -> Result<GridField> {
        if psi.grid() != &self.lab {
            return Err(Error::DimensionMismatch { expected: self.lab.len(), found: psi.grid().len() });
        }
        Ok(GridField::from_spectrum(&self.reduced, &self.apply_spectrum(&psi.spectrum())))
    }

    /// `τψ` at the reduced nodes by direct evaluation of the band-limited
    /// interpolant of `ψ` at `x_i = x_j = R`.
    pub fn evaluate_on_nodes(&self, psi: &GridField) -> Vec<Complex64> {
        let coeffs = psi.spectrum();
        let spect = self.sigma.spectators(self.lab.dim());
        par::map_range(self.reduced.len(), |t| {
            let idx = self.reduced.unflatten(t);
            let mut x = vec![0.0; self.lab.dim()];
            let r = self.reduced.coordinate(0, idx[0]);
            x[self.sigma.i] = r;
            x[self.sigma.j] = r;
            for (a, &k) in spect.iter().enumerate() {
                x[k] = self.lab.coordinate(k, idx[a + 1]);
            }
            grid::spectral::evaluate_at(&self.lab, &coeffs, &x)
        })
    }
}

/// `τ_σψ` on the reduced grid of `sigma`.
pub fn apply_trace(psi: &GridField, sigma: &PairIndex) -> Result<GridField> {
    TraceOperator::new(psi.grid(), sigma)?.apply(psi)
}

/// `‖ψ‖²_{H¹} = Σ_p (1 + |p|²)|ψ̂_p|²`.
pub fn h1_norm_sq(psi: &GridField) -> f64 {
    let g = psi.grid();
    let p2 = g.separable_sum(&(0..g.dim()).map(|a| g.momenta(a).iter().map(|p| p * p).collect()).collect::<Vec<_>>());
    psi.spectrum().iter().zip(p2).map(|(c, p2)| (1.0 + p2) * c.norm_sqr()).sum()
}

/// `‖ψ‖² + ‖∂_rψ‖²` for the relative coordinate of `sigma`, with
/// `p_r = (m_j p_i − m_i p_j)/(m_i + m_j)`.
pub fn relative_h1_norm_sq(psi: &GridField, sigma: &PairIndex) -> f64 {
    let g = psi.grid();
    let (pi, pj) = (g.momenta(sigma.i), g.momenta(sigma.j));
    psi.spectrum()
        .iter()
        .enumerate()
        .map(|(f, c)| {
            let idx = g.unflatten(f);
            let pr = (sigma.mj * pi[idx[sigma.i]] - sigma.mi * pj[idx[sigma.j]]) / sigma.total_mass;
            (1.0 + pr * pr) * c.norm_sqr()
        })
        .sum()
}

/// The two sides of the trace bound for one field.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceBound {
    /// `‖τψ‖²`.
    pub trace_sq: f64,
    /// `‖ψ‖² + ‖∂_rψ‖²`.
    pub relative_h1_sq: f64,
    /// `‖ψ‖²_{H¹}`.
    pub h1_sq: f64,
}

impl TraceBound {
    /// Whether `‖τψ‖² ≤ ‖ψ‖² + ‖∂_rψ‖² ≤ ‖ψ‖²_{H¹}` (with relative slack `tol`).
    pub fn holds(&self, tol: f64) -> bool {
        self.trace_sq <= self.relative_h1_sq * (1.0 + tol) && self.relative_h1_sq <= self.h1_sq * (1.0 + tol)
    }
}

/// Measures both sides of the trace bound.
pub fn trace_bound(psi: &GridField, sigma: &PairIndex) -> Result<TraceBound> {
    let t = apply_trace(psi, sigma)?;
    Ok(TraceBound {
        trace_sq: t.norm().powi(2),
        relative_h1_sq: relative_h1_norm_sq(psi, sigma),
        h1_sq: h1_norm_sq(psi),
    })
}

/// Relative residuals of the three Fourier-trace identities.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceIdentities {
    /// `𝔉τ₀ψ` against `τ₀(1⊗𝔉)ψ`: transform of the hyperplane values versus
    /// the spectator transform taken first, then restriction and a DFT in `R`.
    pub transform_commutes: f64,
    /// `𝔉τ₀ψ` against `τ̂₀𝔉ψ`, the momentum sums of the full spectrum.
    pub fourier_trace: f64,
    /// `τ₀ψ` against `τ̂₀` applied after the relative-coordinate transform,
    /// synthesized on the hyperplane nodes.
    pub momentum_sum: f64,
}

impl TraceIdentities {
    /// The largest residual.
    pub fn max(&self) -> f64 {
        self.transform_commutes.max(self.fourier_trace).max(self.momentum_sum)
    }
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        d
    } else {
        d / n
    }
}

/// Residuals of the three Fourier-trace identities for pair `sigma`.
pub fn fourier_trace_identities(psi: &GridField, sigma: &PairIndex) -> Result<TraceIdentities> {
    let tr = TraceOperator::new(psi.grid(), sigma)?;
    let lab = psi.grid();
    let red = tr.reduced_grid();
    let m = lab.points()[0];
    let l = lab.box_length();
    let coeffs = psi.spectrum();

    let nodes = tr.evaluate_on_nodes(psi);
    let f_trace = grid::spectral::to_spectrum(red, &nodes);
    let sums = tr.apply_spectrum(&coeffs);

    // Mixed representation: pair axes evaluated on the diagonal, spectators in
    // momentum space; then a direct DFT along R.
    let spect = sigma.spectators(lab.dim());
    let n_spect = m.pow(spect.len() as u32);
    let rn = 2 * m;
    let r_nodes: Vec<f64> = (0..rn).map(|k| red.coordinate(0, k)).collect();
    let mut mixed = vec![ZERO; rn * n_spect];
    for (f, c) in coeffs.iter().enumerate() {
        let idx = lab.unflatten(f);
        let p = lab.momentum(sigma.i, idx[sigma.i]) + lab.momentum(sigma.j, idx[sigma.j]);
        let y = spect.iter().fold(0, |acc, &k| acc * m + idx[k]);
        for (k, r) in r_nodes.iter().enumerate() {
            mixed[k * n_spect + y] += c * Complex64::from_polar(1.0 / l, p * r);
        }
    }
    let mut commuted = vec![ZERO; red.len()];
    for ps in 0..rn {
        let big_p = red.momentum(0, ps);
        for y in 0..n_spect {
            let s: Complex64 =
                (0..rn).map(|k| mixed[k * n_spect + y] * Complex64::from_polar(1.0, -big_p * r_nodes[k])).sum();
            commuted[ps * n_spect + y] = s * (l.sqrt() / rn as f64);
        }
    }

    let synthesized = grid::spectral::from_spectrum(red, &sums);
    Ok(TraceIdentities {
        transform_commutes: rel_diff(&f_trace, &commuted),
        fourier_trace: rel_diff(&f_trace, &sums),
        momentum_sum: rel_diff(&nodes, &synthesized),
    })
}

/// The form `t(φ, ψ)` of `spec`, from momentum-space derivatives and traces.
pub fn evaluate_form(phi: &GridField, psi: &GridField, spec: &SystemSpec) -> Result<Complex64> {
    let grid = psi.grid();
    if phi.grid() != grid {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: phi.grid().len() });
    }
    if grid.dim() != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), found: grid.dim() });
    }
    let (a, b) = (phi.spectrum(), psi.spectrum());
    let kin = grid::free_multiplier(grid, spec.masses());
    let mut value: Complex64 = a.iter().zip(&b).zip(&kin).map(|((a, b), k)| a.conj() * b * k).sum();
    for sigma in spec.pairs().iter() {
        let tr = TraceOperator::new(grid, sigma)?;
        let (ta, tb) = (tr.apply_spectrum(&a), tr.apply_spectrum(&b));
        value -= spec.g() * ta.iter().zip(&tb).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    }
    Ok(value)
}

/// `q_t(ψ) = t(ψ, ψ)` (real).
pub fn quadratic_form(psi: &GridField, spec: &SystemSpec) -> Result<f64> {
    Ok(evaluate_form(psi, psi, spec)?.re)
}

/// `⟨ψ, H_ε ψ⟩` with the node-sampled regularized Hamiltonian.
pub fn regularized_energy(psi: &GridField, spec: &SystemSpec, eps: f64, profile: &BumpProfile) -> Result<f64> {
    let h = HamiltonianEps::new(spec, eps, psi.grid(), profile)?;
    let c = psi.spectrum();
    let hc = h.apply(&c);
    Ok(c.iter().zip(&hc).map(|(a, b)| a.conj() * b).sum::<Complex64>().re)
}

/// Form value against the `ε → 0` extrapolation of `⟨ψ, H_εψ⟩`.
#[derive(Clone, Debug, Serialize)]
pub struct FormConsistency {
    /// `q_t(ψ)`.
    pub form: f64,
    /// `(ε, ⟨ψ, H_εψ⟩)` pairs.
    pub energies: Vec<(f64, f64)>,
    /// Polynomial extrapolation in `ε²` to `ε = 0`.
    pub extrapolated: f64,
    /// `|form − extrapolated| / |form|`.
    pub relative: f64,
}

/// Compares `q_t(ψ)` with `lim_{ε→0}⟨ψ, H_εψ⟩`, extrapolated from `eps_list`
/// in the variable `ε²` (the even bump makes the leading error quadratic).
pub fn form_consistency(
    psi: &GridField,
    spec: &SystemSpec,
    eps_list: &[f64],
    profile: &BumpProfile,
) -> Result<FormConsistency> {
    if eps_list.is_empty() {
        return Err(Error::InvalidSpec("form consistency needs at least one epsilon".into()));
    }
    let form = quadratic_form(psi, spec)?;
    let energies = eps_list
        .iter()
        .map(|&e| regularized_energy(psi, spec, e, profile).map(|v| (e, v)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = energies.iter().map(|(e, _)| e * e).collect();
    let ys: Vec<f64> = energies.iter().map(|(_, v)| *v).collect();
    let extrapolated = extrapolate_to_zero(&xs, &ys);
    let relative = (form - extrapolated).abs() / form.abs().max(f64::MIN_POSITIVE);
    Ok(FormConsistency { form, energies, extrapolated, relative })
}
