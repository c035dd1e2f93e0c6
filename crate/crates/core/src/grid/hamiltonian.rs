//! The free Hamiltonian `H₀ = Σ p_i²/2m_i` and the regularized Hamiltonian
//! `H_ε = H₀ − g Σ_σ V_ε(x_i − x_j)` with the potential sampled at the nodes.

use super::{spectral, Grid, GridField};
use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::model::SystemSpec;
use crate::par;
use num_complex::Complex64;

/// Minimum number of nodes across the scaled bump support `[−εa, εa]`.
pub const MIN_POINTS_ACROSS_SUPPORT: usize = 8;

/// A self-adjoint operator `H = H₀ + W` on a grid, acting on orthonormal
/// momentum coefficients. `H₀` is the kinetic multiplier used to
/// precondition shifted solves.
pub trait SpectralOperator: Sync {
    /// The grid the coefficients refer to.
    fn grid(&self) -> &Grid;
    /// Kinetic multiplier `Σ p_a²/2m_a` in FFT order.
    fn kinetic(&self) -> &[f64];
    /// `H c`.
    fn apply(&self, coeffs: &[Complex64]) -> Vec<Complex64>;
}

/// Kinetic multiplier `Σ_a p_a²/(2 m_a)` on `grid`.
pub fn free_multiplier(grid: &Grid, masses: &[f64]) -> Vec<f64> {
    let tables: Vec<Vec<f64>> =
        (0..grid.dim()).map(|a| grid.momenta(a).iter().map(|p| p * p / (2.0 * masses[a])).collect()).collect();
    grid.separable_sum(&tables)
}

/// `H₀ + V(x)` with a real potential sampled at the nodes.
#[derive(Clone, Debug)]
pub struct SchrodingerOperator {
    grid: Grid,
    kinetic: Vec<f64>,
    potential: Vec<f64>,
}

impl SchrodingerOperator {
    /// `Σ p_a²/2m_a + potential`; one mass per axis.
    pub fn new(grid: &Grid, masses: &[f64], potential: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: masses.len() });
        }
        if potential.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: potential.len() });
        }
        Ok(Self { grid: grid.clone(), kinetic: free_multiplier(grid, masses), potential })
    }

    /// The sampled potential.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `Hψ` on node values (one forward and one inverse FFT).
    pub fn apply_field(&self, psi: &GridField) -> GridField {
        let mut c = psi.spectrum();
        c.iter_mut().zip(&self.kinetic).for_each(|(c, k)| *c *= k);
        let mut out = spectral::from_spectrum(&self.grid, &c);
        out.iter_mut().zip(psi.values()).zip(&self.potential).for_each(|((o, p), v)| *o += p * v);
        GridField::new(self.grid.clone(), out).expect("same grid")
    }
}

impl SpectralOperator for SchrodingerOperator {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    fn apply(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut vals = spectral::from_spectrum(&self.grid, coeffs);
        let pot = &self.potential;
        par::for_each_chunk_mut(&mut vals, 8192, |c, chunk| {
            let base = c * 8192;
            chunk.iter_mut().enumerate().for_each(|(o, v)| *v *= pot[base + o]);
        });
        let mut out = spectral::to_spectrum(&self.grid, &vals);
        out.iter_mut().zip(coeffs).zip(&self.kinetic).for_each(|((o, c), k)| *o += c * k);
        out
    }
}

/// Shortest periodic representative of a separation on a box of length `l`.
pub(crate) fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// `H_ε = H₀ − g Σ_σ V_ε(x_i − x_j)` sampled on an `n`-dimensional grid.
#[derive(Clone, Debug)]
pub struct HamiltonianEps {
    spec: SystemSpec,
    eps: f64,
    bump: BumpProfile,
    op: SchrodingerOperator,
}

impl HamiltonianEps {
    /// Samples the pair potentials; refuses boxes that cannot hold the scaled
    /// support and grids with fewer than [`MIN_POINTS_ACROSS_SUPPORT`] nodes across it.
    pub fn new(spec: &SystemSpec, eps: f64, grid: &Grid, bump: &BumpProfile) -> Result<Self> {
        if grid.dim() != spec.n() {
            return Err(Error::DimensionMismatch { expected: spec.n(), found: grid.dim() });
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidSpec(format!("epsilon must be positive, got {eps}")));
        }
        let support = eps * bump.support_radius();
        if support >= 0.5 * grid.box_length() {
            return Err(Error::PotentialOverflowsBox { support, half_box: 0.5 * grid.box_length() });
        }
        let h = (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
        let points = 2.0 * support / h;
        if points < MIN_POINTS_ACROSS_SUPPORT as f64 {
            return Err(Error::UnresolvedBump { points, required: MIN_POINTS_ACROSS_SUPPORT });
        }
        let scaled = bump.scaled(eps);
        let pairs = spec.pairs();
        let l = grid.box_length();
        let g = spec.g();
        let potential = par::map_range(grid.len(), |f| {
            let x = grid.position(f);
            -g * pairs.iter().map(|p| scaled.value(wrap(x[p.i] - x[p.j], l))).sum::<f64>()
        });
        let op = SchrodingerOperator::new(grid, spec.masses(), potential)?;
        Ok(Self { spec: spec.clone(), eps, bump: bump.clone(), op })
    }

    /// The system.
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    /// Regularization scale `ε`.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The bump profile.
    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }

    /// The underlying sampled operator.
    pub fn operator(&self) -> &SchrodingerOperator {
        &self.op
    }
}

impl SpectralOperator for HamiltonianEps {
    fn grid(&self) -> &Grid {
        self.op.grid()
    }

    fn kinetic(&self) -> &[f64] {
        self.op.kinetic()
    }

    fn apply(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        self.op.apply(coeffs)
    }
}

/// `H₀ψ` by Fourier diagonalization.
pub fn apply_free_hamiltonian(psi: &GridField, spec: &SystemSpec) -> Result<GridField> {
    if psi.grid().dim() != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), found: psi.grid().dim() });
    }
    let k = free_multiplier(psi.grid(), spec.masses());
    let c: Vec<Complex64> = psi.spectrum().iter().zip(&k).map(|(c, k)| c * k).collect();
    Ok(GridField::from_spectrum(psi.grid(), &c))
}

/// `H_εψ = H₀ψ − g Σ_σ V_ε(x_i − x_j) ψ`.
pub fn apply_h_eps(psi: &GridField, h: &HamiltonianEps) -> Result<GridField> {
    if psi.grid() != h.grid() {
        return Err(Error::DimensionMismatch { expected: h.grid().len(), found: psi.grid().len() });
    }
    Ok(h.op.apply_field(psi))
}
