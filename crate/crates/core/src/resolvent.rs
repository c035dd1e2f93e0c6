//! Resolvent assemblies at real `z`: direct grid solves of `H_ε`, the block
//! formula `R₀ + g Σ (A^σR₀)*[Λ⁻¹]_{σν}(A^νR₀)`, its `ε → 0` limit, the
//! reduced-space form `R₀ + g G*Θ⁻¹G` with `G_σ = τ_σR₀`, and the sweep of
//! operator-norm distances `‖R_ε(z) − R(z)‖`.

use crate::bump::{BumpProfile, CollocationFactor, Factorization, PairLayout, DEFAULT_RELATIVE_NODES};
use crate::error::{Error, Result};
use crate::grid::{
    free_multiplier, hermitian_norm, solve_shifted_spectrum, DenseResolvent, FnMap, Grid, GridField, HamiltonianEps,
    SolveOptions, DENSE_FALLBACK_POINTS,
};
use crate::lambda::{block_neumann, fit_order, measure_ratio, safe_ratio, LambdaMatrix, PairFrames};
use crate::model::SystemSpec;
use crate::par;
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;
use std::time::Instant;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which assembly of the resolvent to use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Direct solve of `(H_ε − z)φ = ψ` on the grid.
    DirectGrid(f64),
    /// Block formula with the `ε`-regularized factors.
    KonnoKuroda(f64),
    /// Block formula with the `ε = 0` factors.
    Limit,
    /// Reduced-space formula with `Θ(z)`.
    ThetaLimit,
}

impl Mode {
    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Mode::DirectGrid(_) => "direct-grid",
            Mode::KonnoKuroda(_) => "konno-kuroda",
            Mode::Limit => "limit",
            Mode::ThetaLimit => "theta-limit",
        }
    }
}

/// How the `ε > 0` factor `A_ε` is discretized in [`Mode::KonnoKuroda`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// Node-sampled `v_ε`; `A*A` equals the sampled potential exactly, so the
    /// assembly reproduces the grid operator `H_ε`.
    Collocation,
    /// Pair-frame factor with Gauss–Legendre relative nodes; shares its
    /// discretization with the limit and is used for `ε`-sweeps.
    PairQuadrature,
}

/// Tunables of a [`ResolventAssembly`].
#[derive(Clone, Debug)]
pub struct ResolventOptions {
    /// Relative tolerance of inner solves and Neumann truncations.
    pub tol: f64,
    /// Relative quadrature nodes per slice for pair-frame factors.
    pub nodes: usize,
    /// Discretization of `A_ε` in the block mode.
    pub discretization: Discretization,
    /// Accept `z ≥ z₀` (unsupported; the series may diverge).
    pub force: bool,
    /// Bump profile.
    pub profile: BumpProfile,
}

impl ResolventOptions {
    /// Defaults at tolerance `tol`: pair quadrature with
    /// [`DEFAULT_RELATIVE_NODES`] nodes, no forcing, unit-radius bump.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            nodes: DEFAULT_RELATIVE_NODES,
            discretization: Discretization::PairQuadrature,
            force: false,
            profile: BumpProfile::default(),
        }
    }
}

enum Direct {
    Dense(DenseResolvent),
    Iterative(HamiltonianEps, SolveOptions),
}

enum Inner {
    Direct(Box<Direct>),
    Blocks { lambda: LambdaMatrix, ratio: f64 },
    Theta(ThetaMatrix),
}

/// An assembled resolvent `R(z)` acting on fields of a fixed grid.
pub struct ResolventAssembly {
    spec: SystemSpec,
    grid: Grid,
    z: f64,
    mode: Mode,
    tol: f64,
    inv_kinetic: Vec<f64>,
    inner: Inner,
}

fn check_threshold(spec: &SystemSpec, z: f64, force: bool) -> Result<()> {
    if !(z < 0.0 && z.is_finite()) {
        return Err(Error::InvalidSpec(format!("spectral parameter must be real and negative, got {z}")));
    }
    let z0 = spec.bounds().z0;
    if z >= z0 && !force {
        return Err(Error::AboveThreshold { z, z0 });
    }
    Ok(())
}

impl ResolventAssembly {
    /// Assembles `R(z)` for `spec` on `grid` in the given mode.
    pub fn new(spec: &SystemSpec, grid: &Grid, z: f64, mode: Mode, opts: &ResolventOptions) -> Result<Self> {
        if grid.dim() != spec.n() {
            return Err(Error::DimensionMismatch { expected: spec.n(), found: grid.dim() });
        }
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidSpec(format!("tolerance must be positive, got {}", opts.tol)));
        }
        let inner = match mode {
            Mode::DirectGrid(eps) => {
                if !(z.is_finite()) {
                    return Err(Error::InvalidSpec(format!("spectral parameter must be finite, got {z}")));
                }
                let h = HamiltonianEps::new(spec, eps, grid, &opts.profile)?;
                let direct = if grid.len() <= DENSE_FALLBACK_POINTS {
                    Direct::Dense(DenseResolvent::new(&h, Complex64::new(z, 0.0))?)
                } else {
                    Direct::Iterative(h, SolveOptions::with_tol(opts.tol))
                };
                Inner::Direct(Box::new(direct))
            }
            Mode::KonnoKuroda(eps) => {
                check_threshold(spec, z, opts.force)?;
                if !(eps > 0.0) {
                    return Err(Error::InvalidSpec(format!("epsilon must be positive, got {eps}")));
                }
                let lambda = match opts.discretization {
                    Discretization::Collocation => {
                        // Same resolution requirements as the grid operator.
                        HamiltonianEps::new(spec, eps, grid, &opts.profile)?;
                        let factors = spec
                            .pairs()
                            .iter()
                            .map(|p| {
                                CollocationFactor::new(grid, p, eps, &opts.profile)
                                    .map(|f| Arc::new(f) as Arc<dyn Factorization + Send + Sync>)
                            })
                            .collect::<Result<Vec<_>>>()?;
                        LambdaMatrix::from_factors(spec, grid, factors, z)?
                    }
                    Discretization::PairQuadrature => {
                        let frames = PairFrames::new(spec, grid)?;
                        let factors = frames.factors(eps, &opts.profile, opts.nodes)?;
                        LambdaMatrix::from_pair_factors(spec, grid, &factors, z)?
                    }
                };
                let ratio = lambda.prepare_inverse(opts.tol, opts.force)?;
                Inner::Blocks { lambda, ratio }
            }
            Mode::Limit => {
                check_threshold(spec, z, opts.force)?;
                let frames = PairFrames::new(spec, grid)?;
                let factors = frames.factors(0.0, &opts.profile, opts.nodes)?;
                let lambda = LambdaMatrix::from_pair_factors(spec, grid, &factors, z)?;
                let ratio = lambda.prepare_inverse(opts.tol, opts.force)?;
                Inner::Blocks { lambda, ratio }
            }
            Mode::ThetaLimit => {
                check_threshold(spec, z, opts.force)?;
                Inner::Theta(ThetaMatrix::new(spec, grid, z)?)
            }
        };
        let inv_kinetic = free_multiplier(grid, spec.masses()).iter().map(|k| 1.0 / (k - z)).collect();
        Ok(Self { spec: spec.clone(), grid: grid.clone(), z, mode, tol: opts.tol, inv_kinetic, inner })
    }

    /// The system.
    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    /// The grid.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Spectral parameter.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Assembly mode.
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Contraction ratio used by the outer Neumann series (0 for direct solves).
    pub fn ratio(&self) -> f64 {
        match &self.inner {
            Inner::Direct(_) => 0.0,
            Inner::Blocks { ratio, .. } => *ratio,
            Inner::Theta(t) => t.ratio,
        }
    }

    /// The reduced-space operator `Θ(z)`, in theta mode.
    pub fn theta(&self) -> Option<&ThetaMatrix> {
        match &self.inner {
            Inner::Theta(t) => Some(t),
            _ => None,
        }
    }

    /// `R(z)c` on Fourier coefficients.
    pub fn apply_spectrum(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        if c.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), found: c.len() });
        }
        let w: Vec<Complex64> = c.iter().zip(&self.inv_kinetic).map(|(c, k)| c * k).collect();
        let g = self.spec.g();
        let mut back = vec![ZERO; c.len()];
        match &self.inner {
            Inner::Direct(d) => {
                return match d.as_ref() {
                    Direct::Dense(lu) => Ok(lu.solve(c)),
                    Direct::Iterative(h, opts) => {
                        Ok(solve_shifted_spectrum(h, Complex64::new(self.z, 0.0), c, opts)?.0)
                    }
                };
            }
            Inner::Blocks { lambda, ratio } => {
                let mut b = vec![ZERO; lambda.len()];
                for (s, a) in lambda.factors().iter().enumerate() {
                    b[lambda.block_range(s)].copy_from_slice(&a.forward(&w));
                }
                let x = lambda.apply_inverse(&b, *ratio, self.tol)?;
                for (s, a) in lambda.factors().iter().enumerate() {
                    a.adjoint_add(&x[lambda.block_range(s)], &mut back);
                }
            }
            Inner::Theta(t) => {
                let b = t.gather(&w);
                let x = t.solve(&b, self.tol)?;
                t.scatter_add(&x, &mut back);
            }
        }
        Ok(w.iter().zip(back).zip(&self.inv_kinetic).map(|((w, b), k)| w + g * k * b).collect())
    }

    /// `R(z)ψ` on node values.
    pub fn apply(&self, psi: &GridField) -> Result<GridField> {
        if psi.grid() != &self.grid {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), found: psi.grid().len() });
        }
        let out = self.apply_spectrum(&psi.spectrum())?;
        Ok(GridField::from_spectrum(&self.grid, &out))
    }
}

/// `Θ(z)` on `⊕_σ ℓ²(slices of σ)`: `Θ_diag = 1 − g D_σ` (lattice multiplier)
/// and `Θ_off,σν = −g τ_σ R₀ τ_ν*`.
pub struct ThetaMatrix {
    g: f64,
    layouts: Vec<Arc<PairLayout>>,
    offsets: Vec<usize>,
    d: Vec<f64>,
    inv_kinetic: Vec<f64>,
    ratio: f64,
}

impl ThetaMatrix {
    /// Assembles `Θ(z)` and measures the contraction of its off-diagonal part.
    pub fn new(spec: &SystemSpec, grid: &Grid, z: f64) -> Result<Self> {
        let frames = PairFrames::new(spec, grid)?;
        let layouts = frames.layouts().to_vec();
        let mut offsets = vec![0];
        let mut d = Vec::new();
        for l in &layouts {
            offsets.push(offsets.last().unwrap() + l.slices());
            d.extend(l.lattice_multiplier(z));
        }
        let g = spec.g();
        if let Some(gd) = d.iter().map(|d| g * d).find(|gd| *gd >= 1.0) {
            return Err(Error::SeriesDiverging { ratio: gd });
        }
        let inv_kinetic = free_multiplier(grid, spec.masses()).iter().map(|k| 1.0 / (k - z)).collect();
        let mut theta = Self { g, layouts, offsets, d, inv_kinetic, ratio: 0.0 };
        if theta.layouts.len() > 1 {
            let r = {
                let dinv = |x: &[Complex64]| theta.apply_diag_inverse(x);
                let off = |x: &[Complex64]| theta.apply_off(x);
                safe_ratio(measure_ratio(theta.len(), &dinv, &off, 29)?)
            };
            if r >= 1.0 {
                return Err(Error::SeriesDiverging { ratio: r });
            }
            theta.ratio = r;
        }
        Ok(theta)
    }

    /// Total length of reduced vectors.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Whether the reduced space is empty.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range of block `σ`.
    pub fn block_range(&self, sigma: usize) -> std::ops::Range<usize> {
        self.offsets[sigma]..self.offsets[sigma + 1]
    }

    /// The multipliers `D_σ` per slice, concatenated in block order.
    pub fn multipliers(&self) -> &[f64] {
        &self.d
    }

    /// Measured `‖Θ_diag⁻¹ Θ_off‖` (inflated for safety).
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// `G c = (τ_σ c)_σ` for coefficients `c` already multiplied by `R₀`.
    fn gather(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.len()];
        for (s, l) in self.layouts.iter().enumerate() {
            out[self.block_range(s)].copy_from_slice(&l.trace(w));
        }
        out
    }

    /// `out += Σ_σ τ_σ* t_σ`.
    fn scatter_add(&self, t: &[Complex64], out: &mut [Complex64]) {
        for (s, l) in self.layouts.iter().enumerate() {
            out.iter_mut().zip(l.trace_adjoint(&t[self.block_range(s)])).for_each(|(o, v)| *o += v);
        }
    }

    /// `Θ_diag⁻¹ t = t/(1 − g D)`.
    pub fn apply_diag_inverse(&self, t: &[Complex64]) -> Vec<Complex64> {
        t.iter().zip(&self.d).map(|(t, d)| t / (1.0 - self.g * d)).collect()
    }

    /// `Θ_off t`, computed as `−g τ_σ R₀ Σ_ν τ_ν* t_ν + g D_σ t_σ`.
    pub fn apply_off(&self, t: &[Complex64]) -> Vec<Complex64> {
        let mut w = vec![ZERO; self.inv_kinetic.len()];
        self.scatter_add(t, &mut w);
        w.iter_mut().zip(&self.inv_kinetic).for_each(|(w, k)| *w *= k);
        let y = self.gather(&w);
        y.iter().zip(t).zip(&self.d).map(|((y, t), d)| -self.g * y + self.g * d * t).collect()
    }

    /// `Θ t`.
    pub fn apply(&self, t: &[Complex64]) -> Vec<Complex64> {
        let off = self.apply_off(t);
        t.iter().zip(&self.d).zip(off).map(|((t, d), o)| t * (1.0 - self.g * d) + o).collect()
    }

    /// `Θ⁻¹ b` by the block Neumann series with closed-form diagonal inverse.
    pub fn solve(&self, b: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
        let dinv = |x: &[Complex64]| Ok(self.apply_diag_inverse(x));
        let off = |x: &[Complex64]| self.apply_off(x);
        block_neumann(&dinv, &off, b, self.ratio, tol)
    }

    /// `max |⟨x, Θy⟩ − ⟨Θx, y⟩| / (‖x‖‖y‖)` over `probes` seeded random pairs.
    pub fn asymmetry(&self, probes: usize, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = self.len();
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let mut draw = || -> Vec<Complex64> {
                (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
            };
            let (x, y) = (draw(), draw());
            let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(a, b)| a.conj() * b).sum::<Complex64>();
            let nx = dot(&x, &x).re.sqrt();
            let ny = dot(&y, &y).re.sqrt();
            let d = (dot(&x, &self.apply(&y)) - dot(&self.apply(&x), &y)).norm() / (nx * ny);
            worst = worst.max(d);
        }
        worst
    }
}

/// `R_ε(z)ψ` from the block formula with node-sampled factors (so that it
/// equals the direct grid resolvent of `H_ε`), unit bump, tolerance `tol`.
pub fn apply_kk_resolvent(psi: &GridField, spec: &SystemSpec, z: f64, eps: f64, tol: f64) -> Result<GridField> {
    let opts = ResolventOptions { discretization: Discretization::Collocation, ..ResolventOptions::with_tol(tol) };
    ResolventAssembly::new(spec, psi.grid(), z, Mode::KonnoKuroda(eps), &opts)?.apply(psi)
}

/// `R(z)ψ` from the `ε = 0` block formula.
pub fn apply_limit_resolvent(psi: &GridField, spec: &SystemSpec, z: f64, tol: f64) -> Result<GridField> {
    ResolventAssembly::new(spec, psi.grid(), z, Mode::Limit, &ResolventOptions::with_tol(tol))?.apply(psi)
}

/// `R(z)ψ` from the reduced-space `Θ(z)` formula.
pub fn apply_theta_resolvent(psi: &GridField, spec: &SystemSpec, z: f64, tol: f64) -> Result<GridField> {
    ResolventAssembly::new(spec, psi.grid(), z, Mode::ThetaLimit, &ResolventOptions::with_tol(tol))?.apply(psi)
}

/// The zero of `1 − g D(z)` on the zero-total-momentum slice of a pair with
/// reduced mass `mu` on a periodic box: `D(z) = L^{−1} Σ_k (p_k²/2μ − z)^{−1}`
/// over `p_k = 2πk/L`, `|k| < N/2`. This is where the two-body limit resolvent
/// has its pole.
pub fn theta_zero(mu: f64, g: f64, box_length: f64, points: usize) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::InvalidSpec(format!("no bound state for coupling g = {g} ≤ 0")));
    }
    if !(mu > 0.0 && box_length > 0.0) || points < 2 {
        return Err(Error::InvalidSpec("theta zero needs mu > 0, L > 0 and at least two points".into()));
    }
    let half = (points / 2) as i64;
    let two_pi_l = 2.0 * std::f64::consts::PI / box_length;
    let energies: Vec<f64> = (1 - half..half).map(|k| (two_pi_l * k as f64).powi(2) / (2.0 * mu)).collect();
    let theta = |z: f64| 1.0 - g * energies.iter().map(|e| 1.0 / (e - z)).sum::<f64>() / box_length;
    // Θ increases from −∞ (z → 0⁻) to 1 (z → −∞); bisect in log|z|.
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    if theta(-lo.exp()) >= 0.0 || theta(-hi.exp()) <= 0.0 {
        return Err(Error::NoConvergence { iterations: 0, residual: f64::NAN });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if theta(-mid.exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(-(0.5 * (lo + hi)).exp())
}

/// Pole of the two-body limit resolvent (zero of the `P = 0` entry of
/// `Θ`), on a box of length `box_length` with `points` momenta.
pub fn two_body_pole(spec: &SystemSpec, box_length: f64, points: usize) -> Result<f64> {
    if spec.n() != 2 {
        return Err(Error::InvalidSpec(format!("two-body pole needs n = 2, got {}", spec.n())));
    }
    theta_zero(spec.pairs()[0].mu, spec.g(), box_length, points)
}

/// One level of a grid ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct GridLevel {
    /// Box length `L`.
    pub box_length: f64,
    /// Points per axis.
    pub points: usize,
}

/// Controls for [`convergence_sweep`].
#[derive(Clone, Debug)]
pub struct SweepOptions {
    /// Assembly tolerance.
    pub tol: f64,
    /// Lanczos steps per distance.
    pub steps: usize,
    /// Random seed of the Lanczos start vectors.
    pub seed: u64,
    /// Resolvent options (tolerance overridden by `tol`).
    pub resolvent: ResolventOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { tol: 1e-9, steps: 30, seed: 1, resolvent: ResolventOptions::with_tol(1e-9) }
    }
}

/// Spec summary used in reports.
#[derive(Clone, Debug, Serialize)]
pub struct SpecSummary {
    /// Particle count.
    pub n: usize,
    /// Masses.
    pub masses: Vec<f64>,
    /// Coupling.
    pub g: f64,
}

impl From<&SystemSpec> for SpecSummary {
    fn from(s: &SystemSpec) -> Self {
        Self { n: s.n(), masses: s.masses().to_vec(), g: s.g() }
    }
}

/// One measured distance between two assemblies.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceRecord {
    /// System.
    pub spec: SpecSummary,
    /// Grid level.
    pub grid: GridLevel,
    /// Spectral parameter.
    pub z: f64,
    /// Regularization scale.
    pub eps: f64,
    /// Compared modes, e.g. `konno-kuroda/limit`.
    pub mode_pair: String,
    /// Operator-norm distance.
    pub distance: f64,
    /// Lanczos steps used.
    pub iterations: usize,
    /// Wall-clock time of the measurement.
    pub wallclock_ms: u128,
}

/// Per-(grid, z) summary of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepSeries {
    /// Grid level.
    pub grid: GridLevel,
    /// Spectral parameter.
    pub z: f64,
    /// Whether the distance strictly decreases as `ε` decreases.
    pub monotone: bool,
    /// Fitted order of `distance ∝ ε^order`.
    pub fitted_order: Option<f64>,
}

/// Result of [`convergence_sweep`].
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    /// All measured distances.
    pub records: Vec<DistanceRecord>,
    /// Per-(grid, z) summaries.
    pub series: Vec<SweepSeries>,
}

impl SweepReport {
    /// Whether every series is monotone.
    pub fn monotone(&self) -> bool {
        self.series.iter().all(|s| s.monotone)
    }
}

/// `‖A − B‖` for two assemblies on the same grid at real `z`, where `A − B` is
/// self-adjoint; Lanczos with `steps` steps.
pub fn assembly_distance(
    a: &ResolventAssembly,
    b: &ResolventAssembly,
    steps: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let n = a.grid().len();
    let failure = std::sync::Mutex::new(None);
    let diff = |x: &[Complex64]| -> Vec<Complex64> {
        match (a.apply_spectrum(x), b.apply_spectrum(x)) {
            (Ok(u), Ok(v)) => u.iter().zip(&v).map(|(u, v)| u - v).collect(),
            (Err(e), _) | (_, Err(e)) => {
                failure.lock().expect("poisoned").get_or_insert(e);
                vec![ZERO; n]
            }
        }
    };
    let map = FnMap::new(n, n, diff, diff);
    let est = hermitian_norm(&map, steps, seed)?;
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok((est.norm, est.iterations))
}

/// Operator-norm distances `‖R_ε(z) − R(z)‖` between the pair-quadrature block
/// assembly and its limit, for every grid level, `z` and `ε`. All `z` must lie
/// below `z₀` (unless forced in `opts`). `ε` values are processed in the
/// given order; monotonicity is judged after sorting by decreasing `ε`.
pub fn convergence_sweep(
    spec: &SystemSpec,
    z_list: &[f64],
    eps_list: &[f64],
    grid_ladder: &[GridLevel],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if z_list.is_empty() || eps_list.is_empty() || grid_ladder.is_empty() {
        return Err(Error::InvalidSpec("sweep needs non-empty z, eps and grid lists".into()));
    }
    for &z in z_list {
        check_threshold(spec, z, opts.resolvent.force)?;
    }
    let ropts = ResolventOptions { tol: opts.tol, ..opts.resolvent.clone() };
    let mut records = Vec::new();
    let mut series = Vec::new();
    for level in grid_ladder {
        let grid = Grid::cubic(spec.n(), level.box_length, level.points)?;
        for &z in z_list {
            let limit = ResolventAssembly::new(spec, &grid, z, Mode::Limit, &ropts)?;
            let mut rows: Vec<(f64, f64)> = Vec::new();
            for &eps in eps_list {
                let start = Instant::now();
                let kk = ResolventAssembly::new(spec, &grid, z, Mode::KonnoKuroda(eps), &ropts)?;
                let (distance, iterations) = assembly_distance(&kk, &limit, opts.steps, opts.seed)?;
                rows.push((eps, distance));
                records.push(DistanceRecord {
                    spec: spec.into(),
                    grid: *level,
                    z,
                    eps,
                    mode_pair: "konno-kuroda/limit".into(),
                    distance,
                    iterations,
                    wallclock_ms: start.elapsed().as_millis(),
                });
            }
            rows.sort_by(|a, b| b.0.total_cmp(&a.0));
            let monotone = rows.windows(2).all(|w| w[1].1 < w[0].1);
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
            series.push(SweepSeries { grid: *level, z, monotone, fitted_order: fit_order(&xs, &ys) });
        }
    }
    Ok(SweepReport { records, series })
}

/// `R(z)ψ` for several fields at once (independent applications).
pub fn apply_many(assembly: &ResolventAssembly, fields: &[GridField]) -> Result<Vec<GridField>> {
    par::map_range(fields.len(), |i| assembly.apply(&fields[i])).into_iter().collect()
}
