//! The block operator `Λ(z) = 1 − g A R₀(z) A*` over interacting pairs: its
//! diagonal blocks `φ^σ(z)`, off-diagonal blocks `−g A^σ R₀(z) A^{ν*}`, their
//! `ε → 0` limits, inversion by Neumann series below the threshold `z₀`, and
//! block-convergence reports.

use crate::bump::{BumpProfile, Factorization, PairFactor, PairLayout};
use crate::error::{Error, Result};
use crate::greens::greens_closed;
use crate::grid::{operator_norm, Grid, LinearMap};
use crate::model::{from_pair_frame, PairCoordinates, PairIndex, SystemSpec};
use crate::par;
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

/// Cap on the number of Neumann terms.
pub const NEUMANN_CAP: usize = 200;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Number of terms `K` with `r^K/(1 − r) < tol`.
pub fn neumann_terms(ratio: f64, tol: f64) -> Result<usize> {
    if !(ratio < 1.0) {
        return Err(Error::SeriesDiverging { ratio });
    }
    if ratio <= 0.0 {
        return Ok(1);
    }
    let k = ((tol * (1.0 - ratio)).ln() / ratio.ln()).ceil().max(1.0) as usize;
    if k > NEUMANN_CAP {
        return Err(Error::NoConvergence {
            iterations: NEUMANN_CAP,
            residual: ratio.powi(NEUMANN_CAP as i32) / (1.0 - ratio),
        });
    }
    Ok(k)
}

/// `Σ_{k<K} λ^k`, the truncated geometric series.
fn truncated_geometric(lambda: f64, terms: usize) -> f64 {
    if (1.0 - lambda).abs() < 1e-300 {
        terms as f64
    } else {
        (1.0 - lambda.powi(terms as i32)) / (1.0 - lambda)
    }
}

/// Which limit multiplier a rank-one diagonal block uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LimitMultiplier {
    /// `D_s = L^{−1} Σ_{p∈s}(E_p − z)^{−1}`, consistent with the lattice `ε`-blocks.
    Lattice,
    /// `D_s = √(μ/2)(Q_s − z)^{−1/2}`, the whole-line value.
    Continuum,
}

/// ε-regularized or limit form of a block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BlockForm {
    /// Regularization scale `ε > 0`.
    Epsilon(f64),
    /// The `ε → 0` limit.
    Limit,
}

impl BlockForm {
    /// `ε`, with `0` for the limit.
    pub fn eps(&self) -> f64 {
        match self {
            BlockForm::Epsilon(e) => *e,
            BlockForm::Limit => 0.0,
        }
    }
}

#[derive(Clone, Debug)]
enum DiagRepr {
    /// Per-slice Hermitian eigendecompositions `M_s = V_s diag(λ_s) V_s*`
    /// (eigenvector columns stored column-major per slice).
    Spectral { values: Vec<f64>, vectors: Vec<Complex64> },
    /// `g D_s |u⟩⟨u|` per slice.
    RankOne { u: Vec<f64>, gd: Vec<f64> },
}

/// The diagonal block `φ^σ(z) = g A^σ R₀(z) A^{σ*}` acting on `χ_σ`
/// (slice-major, `Q` relative nodes per slice). It is block diagonal in the
/// reduced momentum slices.
#[derive(Clone, Debug)]
pub struct DiagonalBlock {
    sigma: PairIndex,
    z: f64,
    form: BlockForm,
    q: usize,
    slices: usize,
    repr: DiagRepr,
}

fn check_z(z: f64) -> Result<()> {
    if !(z < 0.0 && z.is_finite()) {
        return Err(Error::InvalidSpec(format!("spectral parameter must be real and negative, got {z}")));
    }
    Ok(())
}

fn eigen_slices(mats: Vec<Vec<Complex64>>, q: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let parts: Vec<Result<(Vec<f64>, Vec<Complex64>)>> = par::map_range(mats.len(), |s| {
        let m = &mats[s];
        let a = Mat::<Complex64>::from_fn(q, q, |i, j| 0.5 * (m[i * q + j] + m[j * q + i].conj()));
        let e = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
        let vals = (0..q).map(|i| e.S()[i].re).collect();
        let mut vecs = Vec::with_capacity(q * q);
        for c in 0..q {
            for r in 0..q {
                vecs.push(e.U()[(r, c)]);
            }
        }
        Ok((vals, vecs))
    });
    let mut values = Vec::with_capacity(mats.len() * q);
    let mut vectors = Vec::with_capacity(mats.len() * q * q);
    for p in parts {
        let (v, u) = p?;
        values.extend(v);
        vectors.extend(u);
    }
    Ok((values, vectors))
}

impl DiagonalBlock {
    /// Lattice block of a pair factor: `M_s[k,k'] = g Σ_{p∈s} w_{pk} conj(w_{pk'})/(E_p − z)`
    /// with `w_{pk} = u_k L^{−1/2} e^{i p_r ε r_k}`.
    pub fn from_factor(factor: &PairFactor, g: f64, z: f64) -> Result<Self> {
        check_z(z)?;
        let layout = factor.layout();
        let q = factor.node_count();
        let slices = layout.slices();
        let kin = layout.kinetic();
        let mats: Vec<Vec<Complex64>> = par::map_range(slices, |s| {
            let mut m = vec![ZERO; q * q];
            for f in layout.members(s) {
                let row = factor.row(f);
                let wgt = g / (kin[f] - z);
                for i in 0..q {
                    let a = row[i] * wgt;
                    for j in 0..q {
                        m[i * q + j] += a * row[j].conj();
                    }
                }
            }
            m
        });
        let (values, vectors) = eigen_slices(mats, q)?;
        let form = if factor.eps() > 0.0 { BlockForm::Epsilon(factor.eps()) } else { BlockForm::Limit };
        Ok(Self { sigma: *layout.sigma(), z, form, q, slices, repr: DiagRepr::Spectral { values, vectors } })
    }

    /// Factorized limit `g D_s(z) |u⟩⟨u|` with `u_k` the relative amplitudes.
    pub fn limit(
        layout: &PairLayout,
        profile: &BumpProfile,
        q: usize,
        g: f64,
        z: f64,
        m: LimitMultiplier,
    ) -> Result<Self> {
        check_z(z)?;
        let (_, u) = profile.relative_nodes(q);
        let d = match m {
            LimitMultiplier::Lattice => layout.lattice_multiplier(z),
            LimitMultiplier::Continuum => layout.continuum_multiplier(z),
        };
        let gd = d.iter().map(|d| g * d).collect();
        Ok(Self {
            sigma: *layout.sigma(),
            z,
            form: BlockForm::Limit,
            q,
            slices: layout.slices(),
            repr: DiagRepr::RankOne { u, gd },
        })
    }

    /// Whole-line block from its Green's-function kernel: per slice energy
    /// `Q_s`, `M_s[k,k'] = 2μ g u_k u_k' G¹_{2μ(z−Q_s)}(ε(r_k − r_k'))`
    /// (for `ε = 0` this is the kernel form of the limit block).
    pub fn continuum(
        sigma: &PairIndex,
        g: f64,
        z: f64,
        eps: f64,
        slice_energies: &[f64],
        profile: &BumpProfile,
        q: usize,
    ) -> Result<Self> {
        check_z(z)?;
        let (r, u) = profile.relative_nodes(q);
        let mu = sigma.mu;
        let mats: Vec<Result<Vec<Complex64>>> = par::map_range(slice_energies.len(), |s| {
            let zz = 2.0 * mu * (z - slice_energies[s]);
            let mut m = vec![ZERO; q * q];
            for i in 0..q {
                for j in 0..q {
                    let gr = greens_closed(1, zz, eps * (r[i] - r[j]))?;
                    m[i * q + j] = Complex64::new(2.0 * mu * g * u[i] * u[j] * gr, 0.0);
                }
            }
            Ok(m)
        });
        let mats = mats.into_iter().collect::<Result<Vec<_>>>()?;
        let (values, vectors) = eigen_slices(mats, q)?;
        let form = if eps > 0.0 { BlockForm::Epsilon(eps) } else { BlockForm::Limit };
        Ok(Self {
            sigma: *sigma,
            z,
            form,
            q,
            slices: slice_energies.len(),
            repr: DiagRepr::Spectral { values, vectors },
        })
    }

    /// The pair.
    pub fn sigma(&self) -> &PairIndex {
        &self.sigma
    }

    /// Spectral parameter.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Form of the block.
    pub fn form(&self) -> BlockForm {
        self.form
    }

    /// Length of `χ_σ` vectors.
    pub fn len(&self) -> usize {
        self.q * self.slices
    }

    /// Whether the block acts on an empty space.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Relative nodes per slice.
    pub fn node_count(&self) -> usize {
        self.q
    }

    fn map_spectrum(&self, x: &[Complex64], f: impl Fn(f64) -> f64 + Sync) -> Vec<Complex64> {
        let q = self.q;
        let mut out = vec![ZERO; x.len()];
        match &self.repr {
            DiagRepr::Spectral { values, vectors } => {
                par::for_each_chunk_mut(&mut out, q, |s, row| {
                    let v = &vectors[s * q * q..(s + 1) * q * q];
                    let xs = &x[s * q..(s + 1) * q];
                    for c in 0..q {
                        let col = &v[c * q..(c + 1) * q];
                        let coef: Complex64 =
                            col.iter().zip(xs).map(|(a, b)| a.conj() * b).sum::<Complex64>() * f(values[s * q + c]);
                        row.iter_mut().zip(col).for_each(|(o, a)| *o += coef * a);
                    }
                });
            }
            DiagRepr::RankOne { u, gd } => {
                par::for_each_chunk_mut(&mut out, q, |s, row| {
                    let xs = &x[s * q..(s + 1) * q];
                    let proj: Complex64 = u.iter().zip(xs).map(|(u, x)| x * u).sum();
                    // Identity on u⊥ maps to f(0)·x; the u direction to f(gD).
                    let f0 = f(0.0);
                    let coef = proj * (f(gd[s]) - f0);
                    row.iter_mut().zip(xs).zip(u).for_each(|((o, x), u)| *o = f0 * x + coef * u);
                });
            }
        }
        out
    }

    /// `φ x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.map_spectrum(x, |l| l)
    }

    /// Exact operator norm `max_s ‖M_s‖`.
    pub fn norm(&self) -> f64 {
        match &self.repr {
            DiagRepr::Spectral { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            DiagRepr::RankOne { gd, .. } => gd.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// `‖(1 − φ)⁻¹‖ = max 1/|1 − λ|` (only meaningful when `‖φ‖ < 1`).
    pub fn inverse_complement_norm(&self) -> f64 {
        let f = |l: f64| 1.0 / (1.0 - l).abs();
        match &self.repr {
            DiagRepr::Spectral { values, .. } => values.iter().fold(0.0, |m, v| m.max(f(*v))),
            DiagRepr::RankOne { gd, .. } => gd.iter().fold(1.0, |m, v| m.max(f(*v))),
        }
    }

    /// `(1 − φ)⁻¹ x` by the Neumann series truncated once its geometric tail
    /// is below `tol` (summed exactly in the eigenbasis of each slice).
    pub fn apply_inverse_complement(&self, x: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
        let terms = neumann_terms(self.norm(), tol)?;
        Ok(self.map_spectrum(x, |l| truncated_geometric(l, terms)))
    }

    /// Exact norm of `self − other` (both spectral, same layout).
    pub fn distance(&self, other: &DiagonalBlock) -> Result<f64> {
        if self.len() != other.len() || self.q != other.q {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        let q = self.q;
        let norms: Vec<Result<f64>> = par::map_range(self.slices, |s| {
            let mut m = vec![ZERO; q * q];
            for (sign, blk) in [(1.0, self), (-1.0, other)] {
                for i in 0..q {
                    let mut e = vec![ZERO; q];
                    e[i] = Complex64::new(1.0, 0.0);
                    let col = blk.slice_apply(s, &e);
                    for (r, v) in col.iter().enumerate() {
                        m[r * q + i] += sign * v;
                    }
                }
            }
            let a = Mat::<Complex64>::from_fn(q, q, |i, j| 0.5 * (m[i * q + j] + m[j * q + i].conj()));
            let ev = a
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|_| Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
            Ok(ev.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())))
        });
        norms.into_iter().try_fold(0.0f64, |acc, n| Ok(acc.max(n?)))
    }

    fn slice_apply(&self, s: usize, xs: &[Complex64]) -> Vec<Complex64> {
        let q = self.q;
        match &self.repr {
            DiagRepr::Spectral { values, vectors } => {
                let v = &vectors[s * q * q..(s + 1) * q * q];
                let mut out = vec![ZERO; q];
                for c in 0..q {
                    let col = &v[c * q..(c + 1) * q];
                    let coef: Complex64 =
                        col.iter().zip(xs).map(|(a, b)| a.conj() * b).sum::<Complex64>() * values[s * q + c];
                    out.iter_mut().zip(col).for_each(|(o, a)| *o += coef * a);
                }
                out
            }
            DiagRepr::RankOne { u, gd } => {
                let proj: Complex64 = u.iter().zip(xs).map(|(u, x)| x * u).sum();
                u.iter().map(|u| proj * gd[s] * u).collect()
            }
        }
    }
}

/// Geometry class of an off-diagonal block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OverlapClass {
    /// The pairs share one particle (three-dimensional kernel).
    SharedParticle,
    /// The pairs are disjoint (four-dimensional kernel).
    Disjoint,
}

/// Classifies `(σ, ν)`; errors when `σ = ν`.
pub fn overlap_class(sigma: &PairIndex, nu: &PairIndex) -> Result<OverlapClass> {
    match sigma.shared_with(nu) {
        2 => Err(Error::SameBlockRequested),
        1 => Ok(OverlapClass::SharedParticle),
        _ => Ok(OverlapClass::Disjoint),
    }
}

/// The off-diagonal block `−g A^σ R₀(z) A^{ν*}: χ_ν → χ_σ`, applied through
/// the lab grid.
pub struct OffDiagonalBlock {
    sigma: Arc<dyn Factorization + Send + Sync>,
    nu: Arc<dyn Factorization + Send + Sync>,
    class: OverlapClass,
    inv_kinetic: Vec<f64>,
    g: f64,
    z: f64,
}

impl OffDiagonalBlock {
    /// Block between the pairs `sigma_pair ≠ nu_pair` with factors `sigma`, `nu`.
    pub fn new(
        spec: &SystemSpec,
        grid: &Grid,
        sigma_pair: &PairIndex,
        nu_pair: &PairIndex,
        sigma: Arc<dyn Factorization + Send + Sync>,
        nu: Arc<dyn Factorization + Send + Sync>,
        z: f64,
    ) -> Result<Self> {
        check_z(z)?;
        let class = overlap_class(sigma_pair, nu_pair)?;
        let inv_kinetic = crate::grid::free_multiplier(grid, spec.masses()).iter().map(|k| 1.0 / (k - z)).collect();
        Ok(Self { sigma, nu, class, inv_kinetic, g: spec.g(), z })
    }

    /// Geometry class.
    pub fn class(&self) -> OverlapClass {
        self.class
    }

    /// Spectral parameter.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Operator norm by power iteration.
    pub fn norm(&self, seed: u64) -> Result<f64> {
        Ok(operator_norm(self, 1e-6, 300, 3, seed)?.norm)
    }
}

impl LinearMap for OffDiagonalBlock {
    fn dim_in(&self) -> usize {
        self.nu.chi_len()
    }

    fn dim_out(&self) -> usize {
        self.sigma.chi_len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut w = self.nu.adjoint(x);
        w.iter_mut().zip(&self.inv_kinetic).for_each(|(w, k)| *w *= -self.g * k);
        self.sigma.forward(&w)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut w = self.sigma.adjoint(y);
        w.iter_mut().zip(&self.inv_kinetic).for_each(|(w, k)| *w *= -self.g * k);
        self.nu.forward(&w)
    }
}

/// The limit off-diagonal kernel in position space on the collision planes:
/// `(Θ_off f)(y) = ∫ C · G^{(d)}_z(|X|) f(y') dy'`, with `X_k = √(2m_k)(x_k − x'_k)`,
/// `x` on the plane of `σ` and `x'` on the plane of `ν`.
#[derive(Clone, Debug)]
pub struct ExplicitKernel {
    sigma: PairIndex,
    nu: PairIndex,
    masses: Vec<f64>,
    class: OverlapClass,
    constant: f64,
    z: f64,
}

impl ExplicitKernel {
    /// Kernel for `n = 3` shared-particle or `n = 4` disjoint pairs.
    pub fn new(spec: &SystemSpec, sigma: &PairIndex, nu: &PairIndex, z: f64) -> Result<Self> {
        check_z(z)?;
        let class = overlap_class(sigma, nu)?;
        let m = spec.masses();
        let constant = match (spec.n(), class) {
            (3, OverlapClass::SharedParticle) => -(2f64.powf(1.5)) * spec.g() * (m[0] * m[1] * m[2]).sqrt(),
            (4, OverlapClass::Disjoint) => -4.0 * spec.g() * (m[0] * m[1] * m[2] * m[3]).sqrt(),
            (n, c) => return Err(Error::UnsupportedGeometry(format!("{c:?} pairs with n = {n}"))),
        };
        Ok(Self { sigma: *sigma, nu: *nu, masses: m.to_vec(), class, constant, z })
    }

    /// The constant `C`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Geometry class.
    pub fn class(&self) -> OverlapClass {
        self.class
    }

    /// Kernel value between `(R_σ, spectators)` and `(R'_ν, spectators')`.
    pub fn eval(&self, out: &[f64], inp: &[f64]) -> Result<f64> {
        let x =
            from_pair_frame(&PairCoordinates { r: 0.0, center: out[0], spectators: out[1..].to_vec() }, &self.sigma);
        let xp = from_pair_frame(&PairCoordinates { r: 0.0, center: inp[0], spectators: inp[1..].to_vec() }, &self.nu);
        let d2: f64 = x.iter().zip(&xp).zip(&self.masses).map(|((a, b), m)| 2.0 * m * (a - b).powi(2)).sum();
        Ok(self.constant * greens_closed(self.masses.len(), self.z, d2.sqrt())?)
    }
}

/// Pair layouts and Gauss–Legendre factors of every pair on one lab grid.
#[derive(Clone, Debug)]
pub struct PairFrames {
    spec: SystemSpec,
    grid: Grid,
    layouts: Vec<Arc<PairLayout>>,
}

impl PairFrames {
    /// Builds the layout of every pair of `spec` on `grid`.
    pub fn new(spec: &SystemSpec, grid: &Grid) -> Result<Self> {
        let layouts =
            spec.pairs().iter().map(|p| PairLayout::new(spec, p, grid).map(Arc::new)).collect::<Result<Vec<_>>>()?;
        Ok(Self { spec: spec.clone(), grid: grid.clone(), layouts })
    }

    /// The system.
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    /// The lab grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Layouts in pair order.
    pub fn layouts(&self) -> &[Arc<PairLayout>] {
        &self.layouts
    }

    /// Factors `A_ε^σ` for every pair (`eps = 0` gives `u ⊗ τ_σ`).
    pub fn factors(&self, eps: f64, profile: &BumpProfile, q: usize) -> Result<Vec<Arc<PairFactor>>> {
        self.layouts.iter().map(|l| PairFactor::new(l.clone(), eps, profile, q).map(Arc::new)).collect()
    }
}

enum DiagonalPart {
    Blocks(Vec<DiagonalBlock>),
    LabRoute,
}

/// `Λ(z) = Λ_diag + Λ_off` on `⊕_σ χ_σ`, with `Λ_diag = 1 − φ^σ` and
/// `Λ_off = −g A^σ R₀ A^{ν*}` for `σ ≠ ν`.
pub struct LambdaMatrix {
    g: f64,
    z: f64,
    z0: f64,
    pairs: Vec<PairIndex>,
    factors: Vec<Arc<dyn Factorization + Send + Sync>>,
    offsets: Vec<usize>,
    inv_kinetic: Vec<f64>,
    diag: DiagonalPart,
}

impl LambdaMatrix {
    /// Λ built from pair-frame factors (diagonal blocks exact per slice).
    pub fn from_pair_factors(spec: &SystemSpec, grid: &Grid, factors: &[Arc<PairFactor>], z: f64) -> Result<Self> {
        let blocks = factors.iter().map(|f| DiagonalBlock::from_factor(f, spec.g(), z)).collect::<Result<Vec<_>>>()?;
        let dyn_factors = factors.iter().map(|f| f.clone() as Arc<dyn Factorization + Send + Sync>).collect();
        Self::assemble(spec, grid, dyn_factors, DiagonalPart::Blocks(blocks), z)
    }

    /// Λ built from arbitrary factors; diagonal blocks go through the lab grid.
    pub fn from_factors(
        spec: &SystemSpec,
        grid: &Grid,
        factors: Vec<Arc<dyn Factorization + Send + Sync>>,
        z: f64,
    ) -> Result<Self> {
        Self::assemble(spec, grid, factors, DiagonalPart::LabRoute, z)
    }

    fn assemble(
        spec: &SystemSpec,
        grid: &Grid,
        factors: Vec<Arc<dyn Factorization + Send + Sync>>,
        diag: DiagonalPart,
        z: f64,
    ) -> Result<Self> {
        check_z(z)?;
        if factors.len() != spec.pair_count() {
            return Err(Error::DimensionMismatch { expected: spec.pair_count(), found: factors.len() });
        }
        let mut offsets = vec![0];
        for f in &factors {
            offsets.push(offsets.last().unwrap() + f.chi_len());
        }
        let inv_kinetic = crate::grid::free_multiplier(grid, spec.masses()).iter().map(|k| 1.0 / (k - z)).collect();
        Ok(Self {
            g: spec.g(),
            z,
            z0: spec.bounds().z0,
            pairs: spec.pairs().iter().copied().collect(),
            factors,
            offsets,
            inv_kinetic,
            diag,
        })
    }

    /// Spectral parameter.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Threshold `z₀` of the system.
    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// Total length of block vectors.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Whether the block space is empty.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range of block `σ`.
    pub fn block_range(&self, sigma: usize) -> std::ops::Range<usize> {
        self.offsets[sigma]..self.offsets[sigma + 1]
    }

    /// The pairs in block order.
    pub fn pairs(&self) -> &[PairIndex] {
        &self.pairs
    }

    /// Diagonal blocks, when assembled per slice.
    pub fn diagonal_blocks(&self) -> Option<&[DiagonalBlock]> {
        match &self.diag {
            DiagonalPart::Blocks(b) => Some(b),
            DiagonalPart::LabRoute => None,
        }
    }

    /// `A_σ` factors in block order.
    pub fn factors(&self) -> &[Arc<dyn Factorization + Send + Sync>] {
        &self.factors
    }

    /// `1/(E_p − z)` on the lab grid.
    pub fn free_resolvent_multiplier(&self) -> &[f64] {
        &self.inv_kinetic
    }

    fn phi(&self, sigma: usize, x: &[Complex64]) -> Vec<Complex64> {
        match &self.diag {
            DiagonalPart::Blocks(b) => b[sigma].apply(x),
            DiagonalPart::LabRoute => {
                let a = &self.factors[sigma];
                let mut w = a.adjoint(x);
                w.iter_mut().zip(&self.inv_kinetic).for_each(|(w, k)| *w *= self.g * k);
                a.forward(&w)
            }
        }
    }

    /// `φ^σ x_σ` for block `sigma`.
    pub fn apply_phi(&self, sigma: usize, x: &[Complex64]) -> Vec<Complex64> {
        self.phi(sigma, x)
    }

    /// `Λ_diag x`.
    pub fn apply_diag(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = x.to_vec();
        for s in 0..self.pairs.len() {
            let r = self.block_range(s);
            let p = self.phi(s, &x[r.clone()]);
            out[r].iter_mut().zip(p).for_each(|(o, p)| *o -= p);
        }
        out
    }

    /// `Λ_off x`, using `Λ_off,σ = −g A^σ R₀ Σ_ν A^{ν*} x_ν + φ^σ x_σ`.
    pub fn apply_off(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut w = vec![ZERO; self.inv_kinetic.len()];
        for (s, a) in self.factors.iter().enumerate() {
            a.adjoint_add(&x[self.block_range(s)], &mut w);
        }
        w.iter_mut().zip(&self.inv_kinetic).for_each(|(w, k)| *w *= -self.g * k);
        let mut out = vec![ZERO; self.len()];
        for (s, a) in self.factors.iter().enumerate() {
            let r = self.block_range(s);
            let y = a.forward(&w);
            let p = self.phi(s, &x[r.clone()]);
            out[r].iter_mut().zip(y.iter().zip(p)).for_each(|(o, (y, p))| *o = y + p);
        }
        out
    }

    /// `Λ x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.apply_diag(x);
        if self.pairs.len() > 1 {
            out.iter_mut().zip(self.apply_off(x)).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// `Λ_diag⁻¹ x` by truncated Neumann series (tail below `tol`).
    pub fn apply_diag_inverse(&self, x: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; x.len()];
        for s in 0..self.pairs.len() {
            let r = self.block_range(s);
            let y = match &self.diag {
                DiagonalPart::Blocks(b) => b[s].apply_inverse_complement(&x[r.clone()], tol)?,
                DiagonalPart::LabRoute => {
                    let ratio = self.lab_phi_norm(s)?;
                    let terms = neumann_terms(ratio, tol)?;
                    let mut term = x[r.clone()].to_vec();
                    let mut acc = term.clone();
                    for _ in 1..terms {
                        term = self.phi(s, &term);
                        acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
                    }
                    acc
                }
            };
            out[r].copy_from_slice(&y);
        }
        Ok(out)
    }

    fn lab_phi_norm(&self, sigma: usize) -> Result<f64> {
        let d = self.factors[sigma].chi_len();
        let map =
            crate::grid::FnMap::new(d, d, |x: &[Complex64]| self.phi(sigma, x), |x: &[Complex64]| self.phi(sigma, x));
        // Power-iteration estimates approach the norm from below; a 2% margin
        // keeps the truncation rule conservative.
        Ok(1.02 * operator_norm(&map, 1e-8, 500, 2, 11)?.norm)
    }

    /// Norms `‖φ^σ‖` per block.
    pub fn diagonal_norms(&self) -> Result<Vec<f64>> {
        match &self.diag {
            DiagonalPart::Blocks(b) => Ok(b.iter().map(|b| b.norm()).collect()),
            DiagonalPart::LabRoute => (0..self.pairs.len()).map(|s| self.lab_phi_norm(s).map(|n| n / 1.02)).collect(),
        }
    }
}

/// `{1 + D⁻¹O}⁻¹ D⁻¹ b = Σ_k (−D⁻¹O)^k D⁻¹ b`, truncated once the geometric
/// tail `‖term‖·r/(1 − r)` falls below `tol·‖result‖`, where `r` is the larger
/// of the supplied contraction `ratio` and the observed term ratio.
pub fn block_neumann(
    dinv: &dyn Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    off: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    ratio: f64,
    tol: f64,
) -> Result<Vec<Complex64>> {
    let mut term = dinv(b)?;
    let mut acc = term.clone();
    let scale = vnorm(&acc).max(f64::MIN_POSITIVE);
    let mut prev = vnorm(&term);
    if ratio == 0.0 || prev == 0.0 {
        return Ok(acc);
    }
    for k in 1..=NEUMANN_CAP {
        term = dinv(&off(&term))?;
        term.iter_mut().for_each(|t| *t = -*t);
        acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
        let tn = vnorm(&term);
        let observed = if prev > 0.0 { tn / prev } else { 0.0 };
        prev = tn;
        let r = ratio.max(if k > 2 { observed } else { 0.0 });
        if r >= 1.0 {
            return Err(Error::SeriesDiverging { ratio: r });
        }
        if tn * r / (1.0 - r) < tol * scale {
            return Ok(acc);
        }
    }
    Err(Error::NoConvergence { iterations: NEUMANN_CAP, residual: prev / scale })
}

/// Measured `‖D⁻¹O‖` for self-adjoint `D⁻¹` and `O` (so the adjoint of the
/// composition is `O D⁻¹`), by power iteration.
pub fn measure_ratio(
    dim: usize,
    dinv: &(dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync),
    off: &(dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync),
    seed: u64,
) -> Result<f64> {
    let map = crate::grid::FnMap::new(dim, dim, |x: &[Complex64]| dinv(&off(x)), |x: &[Complex64]| off(&dinv(x)));
    Ok(operator_norm(&map, 1e-3, 60, 1, seed)?.norm)
}

/// Inflates a power-iteration estimate (which approaches from below) by 5%,
/// without pushing a convergent estimate to or past 1.
pub(crate) fn safe_ratio(measured: f64) -> f64 {
    if measured >= 1.0 {
        measured
    } else {
        (1.05 * measured).min(0.5 * (1.0 + measured))
    }
}

/// Measured `‖Λ_diag⁻¹ Λ_off‖`.
pub fn measure_contraction(m: &LambdaMatrix, tol: f64, seed: u64) -> Result<f64> {
    if m.pairs.len() < 2 {
        return Ok(0.0);
    }
    m.apply_diag_inverse(&vec![ZERO; m.len()], tol)?;
    let dinv = |x: &[Complex64]| m.apply_diag_inverse(x, tol).expect("diagonal inverse exists");
    let off = |x: &[Complex64]| m.apply_off(x);
    measure_ratio(m.len(), &dinv, &off, seed)
}

/// An applicable `Λ(z)⁻¹ = {1 + Λ_diag⁻¹Λ_off}⁻¹ Λ_diag⁻¹`.
pub struct LambdaInverse<'a> {
    m: &'a LambdaMatrix,
    ratio: f64,
    tol: f64,
    forced: bool,
}

/// Prepares `Λ⁻¹` below `z₀`. With `force`, `z ≥ z₀` is accepted (the series
/// may still diverge, which is then reported).
pub fn invert_lambda(m: &LambdaMatrix, tol: f64, force: bool) -> Result<LambdaInverse<'_>> {
    let ratio = m.prepare_inverse(tol, force)?;
    Ok(LambdaInverse { m, ratio, tol, forced: m.z >= m.z0 })
}

impl LambdaMatrix {
    /// Checks the threshold and measures the outer contraction; returns the
    /// ratio used to truncate the outer series.
    pub fn prepare_inverse(&self, tol: f64, force: bool) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidSpec(format!("tolerance must be positive, got {tol}")));
        }
        if self.z >= self.z0 && !force {
            return Err(Error::AboveThreshold { z: self.z, z0: self.z0 });
        }
        for n in self.diagonal_norms()? {
            if n >= 1.0 {
                return Err(Error::SeriesDiverging { ratio: n });
            }
        }
        let ratio = safe_ratio(measure_contraction(self, tol, 23)?);
        if ratio >= 1.0 {
            return Err(Error::SeriesDiverging { ratio });
        }
        Ok(ratio)
    }

    /// `Λ⁻¹ b` with a ratio from [`prepare_inverse`](Self::prepare_inverse).
    pub fn apply_inverse(&self, b: &[Complex64], ratio: f64, tol: f64) -> Result<Vec<Complex64>> {
        let inner = 0.1 * tol;
        let dinv = |x: &[Complex64]| self.apply_diag_inverse(x, inner);
        let off = |x: &[Complex64]| self.apply_off(x);
        let r = if self.pairs.len() < 2 { 0.0 } else { ratio };
        block_neumann(&dinv, &off, b, r, tol)
    }
}

impl LambdaInverse<'_> {
    /// Ratio used to truncate the outer series.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Whether the inverse was forced beyond the threshold.
    pub fn forced(&self) -> bool {
        self.forced
    }

    /// `Λ⁻¹ b`.
    pub fn apply(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        self.m.apply_inverse(b, self.ratio, self.tol)
    }
}

/// One row of a block-convergence report.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    /// Regularization scale.
    pub eps: f64,
    /// `‖block_ε − block_limit‖` (diagonal) or `‖block_ε‖` (off-diagonal uniformity).
    pub norm: f64,
    /// Distance of the off-diagonal block to its limit (off-diagonal reports only).
    pub distance: Option<f64>,
    /// Reference bound (`𝔅|g|/√|z|` or `K|g|/√|z|`).
    pub bound: f64,
    /// `norm(ε)/norm(previous ε)`.
    pub ratio: Option<f64>,
}

/// Block-convergence report.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// Pair `σ` (one-based label).
    pub sigma: String,
    /// Pair `ν` for off-diagonal reports.
    pub nu: Option<String>,
    /// Spectral parameter.
    pub z: f64,
    /// Rows per `ε`.
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log(norm)` against `log ε` (at least two rows).
    pub fitted_order: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_order(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Convergence of `φ_ε^σ → φ₀^σ` (when `nu` is `None`) or of the off-diagonal
/// block `(σ, ν)` over `eps_list`, on the lattice of `frames`.
pub fn verify_block_convergence(
    frames: &PairFrames,
    sigma: usize,
    nu: Option<usize>,
    z: f64,
    eps_list: &[f64],
    profile: &BumpProfile,
    q: usize,
) -> Result<ConvergenceReport> {
    check_z(z)?;
    let spec = frames.spec();
    let g = spec.g();
    let bounds = spec.bounds();
    let layouts = frames.layouts();
    let pair = |s: usize| -> PairIndex { *layouts[s].sigma() };
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    match nu {
        None => {
            let limit_factor = PairFactor::new(layouts[sigma].clone(), 0.0, profile, q)?;
            let limit = DiagonalBlock::from_factor(&limit_factor, g, z)?;
            for &eps in eps_list {
                let f = PairFactor::new(layouts[sigma].clone(), eps, profile, q)?;
                let d = DiagonalBlock::from_factor(&f, g, z)?.distance(&limit)?;
                let ratio = rows.last().map(|r| d / r.norm);
                rows.push(ConvergenceRow { eps, norm: d, distance: None, bound: bounds.diagonal_bound(g, z), ratio });
            }
        }
        Some(nu) => {
            if nu == sigma {
                return Err(Error::SameBlockRequested);
            }
            let grid = frames.grid();
            let lim_s = Arc::new(PairFactor::new(layouts[sigma].clone(), 0.0, profile, q)?);
            let lim_n = Arc::new(PairFactor::new(layouts[nu].clone(), 0.0, profile, q)?);
            let limit = OffDiagonalBlock::new(spec, grid, &pair(sigma), &pair(nu), lim_s, lim_n, z)?;
            for &eps in eps_list {
                let fs = Arc::new(PairFactor::new(layouts[sigma].clone(), eps, profile, q)?);
                let fnu = Arc::new(PairFactor::new(layouts[nu].clone(), eps, profile, q)?);
                let block = OffDiagonalBlock::new(spec, grid, &pair(sigma), &pair(nu), fs, fnu, z)?;
                let norm = block.norm(5)?;
                let diff = crate::grid::FnMap::new(
                    block.dim_in(),
                    block.dim_out(),
                    |x: &[Complex64]| {
                        let a = block.apply(x);
                        let b = limit.apply(x);
                        a.iter().zip(&b).map(|(a, b)| a - b).collect()
                    },
                    |y: &[Complex64]| {
                        let a = block.apply_adjoint(y);
                        let b = limit.apply_adjoint(y);
                        a.iter().zip(&b).map(|(a, b)| a - b).collect()
                    },
                );
                let distance = operator_norm(&diff, 1e-4, 200, 2, 9)?.norm;
                let ratio = rows.last().and_then(|r| r.distance.map(|d| distance / d));
                rows.push(ConvergenceRow {
                    eps,
                    norm,
                    distance: Some(distance),
                    bound: bounds.offdiagonal_bound(g, z),
                    ratio,
                });
            }
        }
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.distance.unwrap_or(r.norm)).collect();
    Ok(ConvergenceReport {
        sigma: pair(sigma).label(),
        nu: nu.map(|n| pair(n).label()),
        z,
        fitted_order: fit_order(&eps, &ys),
        rows,
    })
}
