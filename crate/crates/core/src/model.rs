//! Particle system specification, pair combinatorics, Jacobi-pair coordinates
//! and the closed-form bound constants `𝔅`, `K` and `z₀`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `n` distinguishable particles on a line with masses `m_i` and a common
/// pair coupling `g` (units with ħ = 1, kinetic term `p²/2m`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    masses: Vec<f64>,
    g: f64,
}

impl SystemSpec {
    /// Builds an interacting system; requires `n ≥ 2`, all `m_i > 0` and `g ≠ 0`.
    pub fn new(masses: Vec<f64>, g: f64) -> Result<Self> {
        let spec = Self::validated(masses, g)?;
        if spec.g == 0.0 {
            return Err(Error::InvalidSpec("coupling g must be nonzero".into()));
        }
        Ok(spec)
    }

    /// Builds a system and checks that `masses` has exactly `n` entries.
    pub fn with_count(n: usize, masses: Vec<f64>, g: f64) -> Result<Self> {
        if masses.len() != n {
            return Err(Error::InvalidSpec(format!("n = {n} but {} masses were given", masses.len())));
        }
        Self::new(masses, g)
    }

    /// `n` particles of unit mass.
    pub fn equal_masses(n: usize, g: f64) -> Result<Self> {
        Self::new(vec![1.0; n], g)
    }

    /// The non-interacting reference system (`g = 0`), used only as a
    /// comparison baseline by the free-resolvent paths.
    pub fn non_interacting(masses: Vec<f64>) -> Result<Self> {
        Self::validated(masses, 0.0)
    }

    /// Same masses with a different coupling (zero allowed, see [`Self::non_interacting`]).
    pub fn with_coupling(&self, g: f64) -> Self {
        Self { masses: self.masses.clone(), g }
    }

    fn validated(masses: Vec<f64>, g: f64) -> Result<Self> {
        if masses.len() < 2 {
            return Err(Error::InvalidSpec(format!("need at least two particles, got {}", masses.len())));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidSpec(format!("mass {m} is not a positive finite number")));
        }
        if !g.is_finite() {
            return Err(Error::InvalidSpec(format!("coupling {g} is not finite")));
        }
        Ok(Self { masses, g })
    }

    /// Particle count `n`.
    pub fn n(&self) -> usize {
        self.masses.len()
    }

    /// Masses `m_1..m_n`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Coupling `g` (positive is attractive).
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Number of interacting pairs `n(n−1)/2`.
    pub fn pair_count(&self) -> usize {
        self.n() * (self.n() - 1) / 2
    }

    /// All interacting pairs in lexicographic order.
    pub fn pairs(&self) -> PairSet {
        enumerate_pairs(self)
    }

    /// The closed-form bound constants.
    pub fn bounds(&self) -> BoundConstants {
        bound_constants(self)
    }
}

/// An interacting pair `σ = (i, j)`, `i < j`, with zero-based particle indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairIndex {
    /// First particle (zero-based).
    pub i: usize,
    /// Second particle (zero-based), `j > i`.
    pub j: usize,
    /// Mass of particle `i`.
    pub mi: f64,
    /// Mass of particle `j`.
    pub mj: f64,
    /// Reduced mass `μ = m_i m_j/(m_i + m_j)`.
    pub mu: f64,
    /// Total mass `M = m_i + m_j`.
    pub total_mass: f64,
}

impl PairIndex {
    /// Pair `(i, j)` (zero-based, any order) of `spec`.
    pub fn new(spec: &SystemSpec, i: usize, j: usize) -> Result<Self> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if i == j || j >= spec.n() {
            return Err(Error::InvalidSpec(format!("({i}, {j}) is not a pair of {} particles", spec.n())));
        }
        let (mi, mj) = (spec.masses[i], spec.masses[j]);
        Ok(Self { i, j, mi, mj, mu: mi * mj / (mi + mj), total_mass: mi + mj })
    }

    /// Whether particle `k` belongs to the pair.
    pub fn contains(&self, k: usize) -> bool {
        k == self.i || k == self.j
    }

    /// Number of particles shared with `other` (0, 1 or 2).
    pub fn shared_with(&self, other: &PairIndex) -> usize {
        usize::from(other.contains(self.i)) + usize::from(other.contains(self.j))
    }

    /// Spectator indices `k ∉ {i, j}` in increasing order.
    pub fn spectators(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&k| !self.contains(k)).collect()
    }

    /// One-based label such as `(1,2)`.
    pub fn label(&self) -> String {
        format!("({},{})", self.i + 1, self.j + 1)
    }
}

/// The index set `ℐ` of interacting pairs in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet(Vec<PairIndex>);

impl PairSet {
    /// Pairs as a slice.
    pub fn as_slice(&self) -> &[PairIndex] {
        &self.0
    }

    /// Number of pairs.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false for a valid system.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Block position of pair `(i, j)` (zero-based).
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.0.iter().position(|p| p.i == i && p.j == j)
    }

    /// Iterator over the pairs.
    pub fn iter(&self) -> std::slice::Iter<'_, PairIndex> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for PairSet {
    type Output = PairIndex;
    fn index(&self, k: usize) -> &PairIndex {
        &self.0[k]
    }
}

/// Lexicographically ordered list of all pairs with `μ_σ`, `M_σ` filled in.
pub fn enumerate_pairs(spec: &SystemSpec) -> PairSet {
    let n = spec.n();
    let mut pairs = Vec::with_capacity(spec.pair_count());
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(PairIndex::new(spec, i, j).expect("indices in range"));
        }
    }
    PairSet(pairs)
}

/// Jacobi-pair coordinates of a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCoordinates {
    /// Relative coordinate `r = x_i − x_j`.
    pub r: f64,
    /// Centre of mass `R = (m_i x_i + m_j x_j)/M`.
    pub center: f64,
    /// Spectator positions in increasing particle order.
    pub spectators: Vec<f64>,
}

/// Maps lab positions to the pair frame of `sigma` (volume preserving).
pub fn to_pair_frame(x: &[f64], sigma: &PairIndex) -> PairCoordinates {
    let (xi, xj) = (x[sigma.i], x[sigma.j]);
    PairCoordinates {
        r: xi - xj,
        center: (sigma.mi * xi + sigma.mj * xj) / sigma.total_mass,
        spectators: x.iter().enumerate().filter(|(k, _)| !sigma.contains(*k)).map(|(_, v)| *v).collect(),
    }
}

/// Inverse of [`to_pair_frame`]: `x_i = R + (m_j/M) r`, `x_j = R − (m_i/M) r`.
pub fn from_pair_frame(c: &PairCoordinates, sigma: &PairIndex) -> Vec<f64> {
    let n = c.spectators.len() + 2;
    let mut out = Vec::with_capacity(n);
    let mut spect = c.spectators.iter();
    for k in 0..n {
        if k == sigma.i {
            out.push(c.center + sigma.mj / sigma.total_mass * c.r);
        } else if k == sigma.j {
            out.push(c.center - sigma.mi / sigma.total_mass * c.r);
        } else {
            out.push(*spect.next().expect("spectator count"));
        }
    }
    out
}

/// The explicit constants of the norm estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `𝔅 = √(max_σ μ_σ / 2)`: diagonal blocks satisfy `‖φ_ε‖ ≤ 𝔅|g|/√|z|`.
    pub c_frak: f64,
    /// `K = max(max m^{3/2}, max m²)`: off-diagonal blocks satisfy `‖·‖ ≤ K|g|/√|z|`.
    pub k_const: f64,
    /// `z₀ = −g²[n(n−1)K/2 + 𝔅]²`, sufficient for Neumann invertibility of `Λ`.
    pub z0: f64,
}

impl BoundConstants {
    /// Diagonal-block bound `𝔅|g|/√|z|`.
    pub fn diagonal_bound(&self, g: f64, z: f64) -> f64 {
        self.c_frak * g.abs() / z.abs().sqrt()
    }

    /// Off-diagonal-block bound `K|g|/√|z|`.
    pub fn offdiagonal_bound(&self, g: f64, z: f64) -> f64 {
        self.k_const * g.abs() / z.abs().sqrt()
    }
}

/// Evaluates `𝔅`, `K` and `z₀` for `spec`.
pub fn bound_constants(spec: &SystemSpec) -> BoundConstants {
    let max_mu = enumerate_pairs(spec).iter().map(|p| p.mu).fold(0.0, f64::max);
    let max_m = spec.masses().iter().copied().fold(0.0, f64::max);
    let c_frak = (max_mu / 2.0).sqrt();
    let k_const = max_m.powf(1.5).max(max_m * max_m);
    let n = spec.n() as f64;
    let z0 = -spec.g() * spec.g() * (n * (n - 1.0) * k_const / 2.0 + c_frak).powi(2);
    BoundConstants { c_frak, k_const, z0 }
}
