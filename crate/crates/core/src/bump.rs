//! The interaction profile `v`, its scalings, the dilation `u_ε`, and the
//! factorizations `V_ε^σ = A_ε^{σ*} A_ε^σ` of the pair potentials.
//!
//! Two discrete factorizations are provided:
//!
//! * [`CollocationFactor`] samples `v_ε(x_i − x_j) = ε^{−1/2} v((x_i − x_j)/ε)`
//!   at the grid nodes, so `A*A` is *exactly* the node multiplication used by
//!   [`HamiltonianEps`](crate::grid::HamiltonianEps).
//! * [`PairFactor`] realizes `χ_σ` as Gauss–Legendre nodes `r_k` of the
//!   relative coordinate times reduced-momentum slices `s = (P, p_spectators)`:
//!   `(Aψ)_{s,k} = u_k L^{−1/2} Σ_{p∈s} c_p e^{i p_r ε r_k}` with
//!   `u_k = √w_k v(r_k)` and `p_r = (m_j p_i − m_i p_j)/M`. At `ε = 0` it is
//!   `u ⊗ τ_σ` with the trace `τ_σ`, which makes every limit block exact.

use crate::error::{Error, Result};
use crate::grid::{free_multiplier, spectral, Grid, GridField, SpectralOperator};
use crate::model::{PairIndex, SystemSpec};
use crate::par;
use crate::quad;
use num_complex::Complex64;
use std::sync::Arc;

/// Default number of Gauss–Legendre nodes in the relative coordinate.
pub const DEFAULT_RELATIVE_NODES: usize = 40;

/// Slices handled per parallel work item.
const SLICE_BATCH: usize = 64;

/// `v(x) = c·exp(−1/(1 − (x/a)²))` on `|x| < a`, zero outside, with `∫v² = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpProfile {
    radius: f64,
    normalization: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self::new(1.0).expect("unit bump normalizes")
    }
}

fn raw_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

impl BumpProfile {
    /// Profile with support radius `a`; the constant `c` is fixed by adaptive
    /// quadrature of `∫v² = 1` to `1e−12`.
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidSpec(format!("bump radius {radius} must be positive")));
        }
        let i = quad::integrate(|x| raw_bump(x / radius).powi(2), -radius, radius, 1e-15, 1e-13)?;
        Ok(Self { radius, normalization: 1.0 / i.value.sqrt() })
    }

    /// Support radius `a`.
    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    /// Normalization constant `c`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `v(x)`.
    pub fn value(&self, x: f64) -> f64 {
        self.normalization * raw_bump(x / self.radius)
    }

    /// `V(x) = v(x)²`.
    pub fn potential(&self, x: f64) -> f64 {
        self.value(x).powi(2)
    }

    /// The scaling `V_ε(x) = V(x/ε)/ε`.
    pub fn scaled(&self, eps: f64) -> ScaledPotential {
        ScaledPotential { profile: self.clone(), eps }
    }

    /// Gauss–Legendre nodes `r_k` on `[−a, a]` and amplitudes `u_k = √w_k v(r_k)`,
    /// renormalized so that `Σ u_k² = 1` exactly.
    pub fn relative_nodes(&self, q: usize) -> (Vec<f64>, Vec<f64>) {
        let (r, w) = quad::gauss_legendre_on(q, -self.radius, self.radius);
        let mut u: Vec<f64> = r.iter().zip(&w).map(|(r, w)| w.sqrt() * self.value(*r)).collect();
        let s = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= s);
        (r, u)
    }
}

/// `V_ε(x) = V(x/ε)/ε` and its square root `v_ε(x) = v(x/ε)/√ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledPotential {
    profile: BumpProfile,
    eps: f64,
}

impl ScaledPotential {
    /// Scale `ε`.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `V_ε(x)`.
    pub fn value(&self, x: f64) -> f64 {
        self.profile.potential(x / self.eps) / self.eps
    }

    /// `v_ε(x)`, with `v_ε² = V_ε`.
    pub fn amplitude(&self, x: f64) -> f64 {
        self.profile.value(x / self.eps) / self.eps.sqrt()
    }

    /// Support radius `εa`.
    pub fn support_radius(&self) -> f64 {
        self.eps * self.profile.support_radius()
    }

    /// `sup V_ε = V(0)/ε`.
    pub fn sup(&self) -> f64 {
        self.profile.potential(0.0) / self.eps
    }
}

/// Unitary dilation `(u_ε φ)(r) = √ε φ(εr)` of a compactly supported 1D
/// field, evaluated by band-limited interpolation (zero outside the box).
pub fn dilate(phi: &GridField, eps: f64) -> Result<GridField> {
    let grid = phi.grid();
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: grid.dim() });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec(format!("dilation scale {eps} must be positive")));
    }
    let peak = phi.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let radius = (0..grid.len())
        .filter(|&j| phi.values()[j].norm() > 1e-13 * peak)
        .map(|j| grid.coordinate(0, j).abs())
        .fold(0.0, f64::max);
    let half_box = 0.5 * grid.box_length();
    if radius / eps >= half_box {
        return Err(Error::SupportEscapesBox { radius: radius / eps, half_box });
    }
    let coeffs = phi.spectrum();
    let s = eps.sqrt();
    // Points mapped outside the box see the zero extension, not a periodic image.
    let values = par::map_range(grid.len(), |j| {
        let x = eps * grid.coordinate(0, j);
        if x.abs() >= half_box {
            Complex64::new(0.0, 0.0)
        } else {
            s * spectral::evaluate_at(grid, &coeffs, &[x])
        }
    });
    GridField::new(grid.clone(), values)
}

/// A factorization `A: coefficients → χ` of one pair interaction.
pub trait Factorization: Sync {
    /// Length of lab coefficient vectors.
    fn lab_len(&self) -> usize;
    /// Length of `χ` vectors.
    fn chi_len(&self) -> usize;
    /// `A c`.
    fn forward(&self, coeffs: &[Complex64]) -> Vec<Complex64>;
    /// `out += A* a`.
    fn adjoint_add(&self, chi: &[Complex64], out: &mut [Complex64]);
    /// `A* a`.
    fn adjoint(&self, chi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.lab_len()];
        self.adjoint_add(chi, &mut out);
        out
    }
}

/// Node-collocated factor: `χ` holds `√(Πh) v_ε(x_i − x_j) ψ(x)` on the nodes
/// where the sampled profile is nonzero.
#[derive(Clone, Debug)]
pub struct CollocationFactor {
    grid: Grid,
    support: Vec<usize>,
    weights: Vec<f64>,
}

impl CollocationFactor {
    /// Factor of `V_ε(x_i − x_j)` (periodically wrapped) on `grid`.
    pub fn new(grid: &Grid, sigma: &PairIndex, eps: f64, profile: &BumpProfile) -> Result<Self> {
        if sigma.j >= grid.dim() {
            return Err(Error::DimensionMismatch { expected: sigma.j + 1, found: grid.dim() });
        }
        let scaled = profile.scaled(eps);
        let l = grid.box_length();
        let sqrt_cell = grid.cell_volume().sqrt();
        let (mut support, mut weights) = (Vec::new(), Vec::new());
        for f in 0..grid.len() {
            let x = grid.position(f);
            let d = x[sigma.i] - x[sigma.j];
            let w = scaled.amplitude(d - l * (d / l).round());
            if w != 0.0 {
                support.push(f);
                weights.push(sqrt_cell * w);
            }
        }
        Ok(Self { grid: grid.clone(), support, weights })
    }
}

impl Factorization for CollocationFactor {
    fn lab_len(&self) -> usize {
        self.grid.len()
    }

    fn chi_len(&self) -> usize {
        self.support.len()
    }

    fn forward(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let vals = spectral::from_spectrum(&self.grid, coeffs);
        self.support.iter().zip(&self.weights).map(|(&f, w)| vals[f] * w).collect()
    }

    fn adjoint_add(&self, chi: &[Complex64], out: &mut [Complex64]) {
        let mut vals = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        let inv_cell = 1.0 / self.grid.cell_volume();
        for ((&f, w), a) in self.support.iter().zip(&self.weights).zip(chi) {
            vals[f] = a * (w * inv_cell);
        }
        let c = spectral::to_spectrum(&self.grid, &vals);
        out.iter_mut().zip(c).for_each(|(o, c)| *o += c);
    }
}

/// Reduced-momentum bookkeeping of a pair on a lab grid: which slice
/// `s = (P = p_i + p_j, spectator momenta)` each lab momentum belongs to, its
/// relative momentum `p_r`, and the slice energies `Q_s`.
#[derive(Clone, Debug)]
pub struct PairLayout {
    sigma: PairIndex,
    grid: Grid,
    slice_of: Vec<u32>,
    offsets: Vec<usize>,
    members: Vec<u32>,
    p_rel: Vec<f64>,
    q: Vec<f64>,
    kinetic: Vec<f64>,
}

impl PairLayout {
    /// Layout of pair `sigma` of `spec` on the lab `grid` (cubic, `n` axes).
    pub fn new(spec: &SystemSpec, sigma: &PairIndex, grid: &Grid) -> Result<Self> {
        if grid.dim() != spec.n() {
            return Err(Error::DimensionMismatch { expected: spec.n(), found: grid.dim() });
        }
        let pts = grid.points();
        if pts.iter().any(|&p| p != pts[0]) {
            return Err(Error::InvalidGrid("pair layouts need the same point count on every axis".into()));
        }
        let n = pts[0];
        let spect = sigma.spectators(spec.n());
        let slices = (2 * n - 1) * n.pow(spect.len() as u32);
        let masses = spec.masses();
        let mut slice_of = vec![0u32; grid.len()];
        let mut p_rel = vec![0.0; grid.len()];
        let mut q = vec![0.0; slices];
        let two_pi_l = 2.0 * std::f64::consts::PI / grid.box_length();
        for f in 0..grid.len() {
            let idx = grid.unflatten(f);
            let (ki, kj) = (Grid::signed_index(idx[sigma.i], n), Grid::signed_index(idx[sigma.j], n));
            let mut s = (ki + kj + n as i64) as usize;
            for &k in &spect {
                s = s * n + idx[k];
            }
            slice_of[f] = s as u32;
            let (pi, pj) = (two_pi_l * ki as f64, two_pi_l * kj as f64);
            p_rel[f] = (sigma.mj * pi - sigma.mi * pj) / sigma.total_mass;
        }
        for (s, qs) in q.iter_mut().enumerate() {
            let mut rest = s;
            let mut acc = 0.0;
            for &k in spect.iter().rev() {
                acc += grid.momentum(k, rest % n).powi(2) / (2.0 * masses[k]);
                rest /= n;
            }
            let p = two_pi_l * (rest as i64 - n as i64) as f64;
            *qs = acc + p * p / (2.0 * sigma.total_mass);
        }
        let mut counts = vec![0usize; slices + 1];
        for &s in &slice_of {
            counts[s as usize + 1] += 1;
        }
        for s in 0..slices {
            counts[s + 1] += counts[s];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut members = vec![0u32; grid.len()];
        for (f, &s) in slice_of.iter().enumerate() {
            members[fill[s as usize]] = f as u32;
            fill[s as usize] += 1;
        }
        let kinetic = free_multiplier(grid, masses);
        Ok(Self { sigma: *sigma, grid: grid.clone(), slice_of, offsets, members, p_rel, q, kinetic })
    }

    /// The pair.
    pub fn sigma(&self) -> &PairIndex {
        &self.sigma
    }

    /// The lab grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of reduced-momentum slices.
    pub fn slices(&self) -> usize {
        self.q.len()
    }

    /// Slice of lab coefficient `f`.
    pub fn slice_of(&self, f: usize) -> usize {
        self.slice_of[f] as usize
    }

    /// Lab coefficients of slice `s`.
    pub fn members(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.members[self.offsets[s]..self.offsets[s + 1]].iter().map(|&f| f as usize)
    }

    /// Relative momentum `p_r` of lab coefficient `f`.
    pub fn relative_momentum(&self, f: usize) -> f64 {
        self.p_rel[f]
    }

    /// `Q_s = P²/2M + Σ_spectators p²/2m` per slice.
    pub fn slice_energies(&self) -> &[f64] {
        &self.q
    }

    /// Lab kinetic multiplier.
    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    /// Lattice multiplier `D_s(z) = L^{−1} Σ_{p∈s} (E_p − z)^{−1}`, the discrete
    /// counterpart of `√(μ/2)(Q_s − z)^{−1/2}`.
    pub fn lattice_multiplier(&self, z: f64) -> Vec<f64> {
        let l = self.grid.box_length();
        par::map_range(self.slices(), |s| self.members(s).map(|f| 1.0 / (self.kinetic[f] - z)).sum::<f64>() / l)
    }

    /// Continuum multiplier `√(μ/2)(Q_s − z)^{−1/2}`.
    pub fn continuum_multiplier(&self, z: f64) -> Vec<f64> {
        let c = (0.5 * self.sigma.mu).sqrt();
        self.q.iter().map(|q| c / (q - z).sqrt()).collect()
    }

    /// Trace `τ_σ c`: `(τc)_s = L^{−1/2} Σ_{p∈s} c_p`.
    pub fn trace(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let norm = self.grid.box_length().powf(-0.5);
        par::map_range(self.slices(), |s| self.members(s).map(|f| coeffs[f]).sum::<Complex64>() * norm)
    }

    /// `τ_σ* t`: lab coefficient `p` receives `L^{−1/2} t_{s(p)}`.
    pub fn trace_adjoint(&self, t: &[Complex64]) -> Vec<Complex64> {
        let norm = self.grid.box_length().powf(-0.5);
        self.slice_of.iter().map(|&s| t[s as usize] * norm).collect()
    }
}

/// Pair-frame factor `A_ε^σ` on `χ_σ = (relative nodes) × (slices)`, stored
/// slice-major: entry `s·Q + k`.
#[derive(Clone, Debug)]
pub struct PairFactor {
    layout: Arc<PairLayout>,
    eps: f64,
    nodes: Vec<f64>,
    amplitudes: Vec<f64>,
    phases: Option<Vec<Complex64>>,
}

impl PairFactor {
    /// Factor at scale `eps ≥ 0` with `q` relative nodes (`eps = 0` gives `u ⊗ τ_σ`).
    pub fn new(layout: Arc<PairLayout>, eps: f64, profile: &BumpProfile, q: usize) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidSpec(format!("epsilon must be non-negative, got {eps}")));
        }
        let (nodes, amplitudes) = profile.relative_nodes(q);
        let norm = layout.grid.box_length().powf(-0.5);
        let phases = (eps > 0.0).then(|| {
            let mut t = vec![Complex64::new(0.0, 0.0); layout.grid.len() * q];
            par::for_each_chunk_mut(&mut t, q, |f, row| {
                let pr = layout.p_rel[f];
                for (k, slot) in row.iter_mut().enumerate() {
                    *slot = Complex64::from_polar(norm * amplitudes[k], pr * eps * nodes[k]);
                }
            });
            t
        });
        Ok(Self { layout, eps, nodes, amplitudes, phases })
    }

    /// The layout.
    pub fn layout(&self) -> &Arc<PairLayout> {
        &self.layout
    }

    /// Scale `ε`.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Number of relative nodes `Q`.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Relative nodes `r_k`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Amplitudes `u_k` (unit ℓ² norm).
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Row `w_{f,k} = u_k L^{−1/2} e^{i p_r ε r_k}` of lab coefficient `f`.
    pub fn row(&self, f: usize) -> Vec<Complex64> {
        (0..self.nodes.len()).map(|k| self.weight(f, k)).collect()
    }

    fn weight(&self, f: usize, k: usize) -> Complex64 {
        match &self.phases {
            Some(t) => t[f * self.nodes.len() + k],
            None => Complex64::new(self.amplitudes[k] * self.layout.grid.box_length().powf(-0.5), 0.0),
        }
    }
}

impl Factorization for PairFactor {
    fn lab_len(&self) -> usize {
        self.layout.grid.len()
    }

    fn chi_len(&self) -> usize {
        self.layout.slices() * self.nodes.len()
    }

    fn forward(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let q = self.nodes.len();
        let mut out = vec![Complex64::new(0.0, 0.0); self.chi_len()];
        if self.phases.is_none() {
            let t = self.layout.trace(coeffs);
            out.chunks_mut(q).zip(t).for_each(|(row, t)| {
                row.iter_mut().zip(&self.amplitudes).for_each(|(o, u)| *o = t * u);
            });
            return out;
        }
        par::for_each_chunk_mut(&mut out, q * SLICE_BATCH, |c, chunk| {
            for (b, row) in chunk.chunks_mut(q).enumerate() {
                let s = c * SLICE_BATCH + b;
                for f in self.layout.members(s) {
                    let cf = coeffs[f];
                    if cf == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    row.iter_mut().enumerate().for_each(|(k, o)| *o += cf * self.weight(f, k));
                }
            }
        });
        out
    }

    fn adjoint_add(&self, chi: &[Complex64], out: &mut [Complex64]) {
        let q = self.nodes.len();
        if self.phases.is_none() {
            let t: Vec<Complex64> =
                chi.chunks(q).map(|row| row.iter().zip(&self.amplitudes).map(|(a, u)| a * u).sum()).collect();
            out.iter_mut().zip(self.layout.trace_adjoint(&t)).for_each(|(o, v)| *o += v);
            return;
        }
        par::for_each_chunk_mut(out, 1024, |c, chunk| {
            for (o, slot) in chunk.iter_mut().enumerate() {
                let f = c * 1024 + o;
                let s = self.layout.slice_of(f);
                let row = &chi[s * q..(s + 1) * q];
                *slot += row.iter().enumerate().map(|(k, a)| self.weight(f, k).conj() * a).sum::<Complex64>();
            }
        });
    }
}

/// `A_ε^σ ψ` in the pair-frame layout (slice-major, [`DEFAULT_RELATIVE_NODES`]
/// relative nodes), for a field on the full `n`-dimensional grid of `spec`.
pub fn apply_a_eps(
    psi: &GridField,
    spec: &SystemSpec,
    sigma: &PairIndex,
    eps: f64,
    profile: &BumpProfile,
) -> Result<Vec<Complex64>> {
    let layout = Arc::new(PairLayout::new(spec, sigma, psi.grid())?);
    let a = PairFactor::new(layout, eps, profile, DEFAULT_RELATIVE_NODES)?;
    Ok(a.forward(&psi.spectrum()))
}

/// `H₀ − g Σ_σ A_σ* A_σ` for a set of factors, as a [`SpectralOperator`].
pub struct FactorizedHamiltonian<'a> {
    grid: Grid,
    kinetic: Vec<f64>,
    g: f64,
    factors: Vec<&'a dyn Factorization>,
}

impl<'a> FactorizedHamiltonian<'a> {
    /// Assembles the operator from one factor per pair.
    pub fn new(spec: &SystemSpec, grid: &Grid, factors: Vec<&'a dyn Factorization>) -> Result<Self> {
        if let Some(f) = factors.iter().find(|f| f.lab_len() != grid.len()) {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: f.lab_len() });
        }
        Ok(Self { grid: grid.clone(), kinetic: free_multiplier(grid, spec.masses()), g: spec.g(), factors })
    }
}

impl SpectralOperator for FactorizedHamiltonian<'_> {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    fn apply(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); coeffs.len()];
        for a in &self.factors {
            a.adjoint_add(&a.forward(coeffs), &mut acc);
        }
        acc.iter_mut().zip(coeffs).zip(&self.kinetic).for_each(|((o, c), k)| *o = c * k - self.g * *o);
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_normalized_and_even() {
        let b = BumpProfile::default();
        let i = quad::integrate(|x| b.potential(x), -1.0, 1.0, 1e-15, 1e-13).unwrap();
        assert!((i.value - 1.0).abs() < 1e-10);
        assert_eq!(b.value(0.3), b.value(-0.3));
        assert_eq!(b.value(1.0), 0.0);
        for eps in [1.0, 0.5, 0.25, 0.125] {
            let s = b.scaled(eps);
            let i = quad::integrate(|x| s.value(x), -eps, eps, 1e-15, 1e-13).unwrap();
            assert!((i.value - 1.0).abs() < 1e-10, "eps {eps}: {}", i.value);
            assert!((s.sup() - b.potential(0.0) / eps).abs() < 1e-12);
        }
    }

    #[test]
    fn relative_amplitudes_have_unit_norm() {
        let (_, u) = BumpProfile::default().relative_nodes(32);
        assert!((u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
