//! Standalone numerical audits of the norm inequalities: Schur integrals of the
//! three- and four-dimensional Green's-function kernels, the diagonal-block
//! bound `𝔅|g|/√|z|` with its integral majorant, and the explicit constant of
//! the linear `ε`-convergence estimate.

use crate::bump::{BumpProfile, DEFAULT_RELATIVE_NODES};
use crate::error::{Error, Result};
use crate::greens::greens_closed;
use crate::lambda::DiagonalBlock;
use crate::model::{PairIndex, SystemSpec};
use crate::par;
use crate::quad::{integrate, integrate_to_infinity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Default Monte Carlo sample count.
pub const MC_SAMPLES: usize = 1_000_000;
/// Number of batches for batch-means confidence intervals.
pub const MC_BATCHES: usize = 100;
/// Absolute slack of a PASS when no Monte Carlo interval applies.
pub const AUDIT_SLACK: f64 = 1e-6;

/// Inputs of an audit.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditInputs {
    /// Masses, when the audited quantity depends on them.
    pub masses: Option<Vec<f64>>,
    /// Coupling.
    pub g: Option<f64>,
    /// Spectral parameter.
    pub z: f64,
    /// Regularization scale.
    pub eps: Option<f64>,
}

impl std::fmt::Display for AuditInputs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if let Some(m) = &self.masses {
            parts.push(format!("m={}", m.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(":")));
        }
        if let Some(g) = self.g {
            parts.push(format!("g={g}"));
        }
        parts.push(format!("z={}", self.z));
        if let Some(e) = self.eps {
            parts.push(format!("eps={e}"));
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// One audited inequality `measured ≤ claimed`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundAudit {
    /// Which inequality.
    pub name: String,
    /// Inputs.
    pub inputs: AuditInputs,
    /// The claimed bound.
    pub claimed: f64,
    /// The measured value.
    pub measured: f64,
    /// `claimed − measured`.
    pub margin: f64,
    /// Monte Carlo confidence half-width (95%), when sampling was used.
    pub mc_ci: Option<f64>,
    /// Seed of the sampling stream, when sampling was used.
    pub seed: Option<u64>,
}

impl BoundAudit {
    fn new(name: &str, inputs: AuditInputs, claimed: f64, measured: f64) -> Self {
        Self { name: name.into(), inputs, claimed, measured, margin: claimed - measured, mc_ci: None, seed: None }
    }

    /// PASS iff `measured ≤ claimed + max(2·ci, 1e−6)`.
    pub fn passed(&self) -> bool {
        self.measured <= self.claimed + (2.0 * self.mc_ci.unwrap_or(0.0)).max(AUDIT_SLACK)
    }

    /// `"PASS"` or `"FAIL"`.
    pub fn verdict(&self) -> &'static str {
        if self.passed() {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

fn check_z(z: f64) -> Result<()> {
    if !(z < 0.0 && z.is_finite()) {
        return Err(Error::InvalidSpec(format!("audits need real z < 0, got {z}")));
    }
    Ok(())
}

/// `(2√(2|z|))⁻¹`, the Schur bound of both kernel operators.
pub fn schur_bound(z: f64) -> f64 {
    1.0 / (2.0 * (2.0 * z.abs()).sqrt())
}

/// Row integral of the three-dimensional kernel after the reduction to the
/// offset `b = (y − x)/2`: `∫_{ℝ²} √2 G³_z(√2 √(ρ² + b²)) dx̄'dȳ'`, done in
/// polar coordinates by adaptive quadrature.
pub fn schur_row_3d(z: f64, b: f64) -> Result<f64> {
    check_z(z)?;
    let f = |rho: f64| {
        let s = (rho * rho + b * b).sqrt();
        if s == 0.0 {
            // ρ·G³(√2 s)·√2·2π → 1/2 as ρ → 0 with b = 0.
            return 0.5;
        }
        greens_closed(3, z, 2f64.sqrt() * s).map(|g| 2f64.sqrt() * g * 2.0 * PI * rho).unwrap_or(0.0)
    };
    Ok(integrate_to_infinity(f, 0.0, 1e-13, 1e-11)?.value)
}

/// Offsets `b` at which the reduced row integrals are evaluated; the
/// supremum is attained at `b = 0`.
pub const SCHUR_OFFSETS: [f64; 4] = [0.0, 0.05, 0.25, 1.0];

/// Schur audit of the three-dimensional kernel: the largest reduced row
/// integral against `1/(2√(2|z|))`.
pub fn audit_schur_3d(z: f64) -> Result<BoundAudit> {
    let measured = SCHUR_OFFSETS.iter().map(|&b| schur_row_3d(z, b)).collect::<Result<Vec<_>>>()?;
    let m = measured.into_iter().fold(0.0, f64::max);
    Ok(BoundAudit::new("schur-3d", AuditInputs { z, ..Default::default() }, schur_bound(z), m))
}

/// Monte Carlo estimate of a row integral with its 95% half-width.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    /// Estimate.
    pub value: f64,
    /// 95% confidence half-width from batch means.
    pub ci: f64,
    /// Smallest sampled integrand value.
    pub min_sample: f64,
}

/// Row integral of the four-dimensional kernel at offset `b`:
/// `∫_{ℝ³} 2 G⁴_z(√(2(|u|² + b²))) du`, by importance sampling with
/// `|u| ~ Exp(√(2|z|))` and a uniform direction. Batch `k` draws from stream
/// `k` of a ChaCha8 generator seeded with `seed`, so the result does not
/// depend on the thread count.
pub fn schur_row_4d(z: f64, b: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    check_z(z)?;
    if samples < MC_BATCHES {
        return Err(Error::InvalidSpec(format!("need at least {MC_BATCHES} samples, got {samples}")));
    }
    let c = (2.0 * z.abs()).sqrt();
    let per = samples / MC_BATCHES;
    let batches: Vec<(f64, f64)> = par::map_range(MC_BATCHES, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let (mut sum, mut min) = (0.0, f64::INFINITY);
        for _ in 0..per {
            let rho = -(1.0 - rng.gen::<f64>()).ln() / c;
            // Uniform direction; the integrand is isotropic but the sample is a genuine 3D point.
            let cos_t = 2.0 * rng.gen::<f64>() - 1.0;
            let phi = 2.0 * PI * rng.gen::<f64>();
            let sin_t = (1.0 - cos_t * cos_t).sqrt();
            let u = [rho * sin_t * phi.cos(), rho * sin_t * phi.sin(), rho * cos_t];
            let r2 = u.iter().map(|v| v * v).sum::<f64>();
            let x = (2.0 * (r2 + b * b)).sqrt();
            let f = if x > 0.0 { 2.0 * greens_closed(4, z, x).unwrap_or(f64::NAN) } else { f64::INFINITY };
            let density = c * (-c * rho).exp() / (4.0 * PI * rho * rho);
            let w = f / density;
            min = f64::min(min, f);
            sum += w;
        }
        (sum / per as f64, min)
    });
    let means: Vec<f64> = batches.iter().map(|b| b.0).collect();
    let n = means.len() as f64;
    let value = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (n - 1.0);
    let min_sample = batches.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    if !value.is_finite() {
        return Err(Error::QuadratureFailure("non-finite Monte Carlo estimate".into()));
    }
    Ok(McEstimate { value, ci: 1.96 * (var / n).sqrt(), min_sample })
}

/// Schur audit of the four-dimensional kernel at its supremum `b = 0`, with
/// `samples` Monte Carlo samples.
pub fn audit_schur_4d(z: f64, samples: usize, seed: u64) -> Result<BoundAudit> {
    let est = schur_row_4d(z, 0.0, samples, seed)?;
    if !(est.min_sample > 0.0) {
        return Err(Error::QuadratureFailure(format!("non-positive kernel sample {}", est.min_sample)));
    }
    let mut a = BoundAudit::new("schur-4d", AuditInputs { z, ..Default::default() }, schur_bound(z), est.value);
    a.mc_ci = Some(est.ci);
    a.seed = Some(seed);
    Ok(a)
}

/// `∫∫ V(r)V(r') e^{−κ|r − r'|} dr dr'` for the unscaled potential `V = v²`.
pub fn exponential_majorant(profile: &BumpProfile, kappa: f64) -> Result<f64> {
    let a = profile.support_radius();
    let inner = |r: f64| -> f64 {
        let f = |s: f64| profile.potential(s) * (-kappa * (r - s).abs()).exp();
        let left = integrate(f, -a, r, 1e-14, 1e-12).map(|i| i.value).unwrap_or(f64::NAN);
        let right = integrate(f, r, a, 1e-14, 1e-12).map(|i| i.value).unwrap_or(f64::NAN);
        left + right
    };
    let v = integrate(|r| profile.potential(r) * inner(r), -a, a, 1e-13, 1e-11)?.value;
    if !v.is_finite() {
        return Err(Error::QuadratureFailure("majorant integral failed".into()));
    }
    Ok(v)
}

fn spec_of(masses: &[f64], g: f64) -> Result<SystemSpec> {
    if g == 0.0 {
        SystemSpec::non_interacting(masses.to_vec())
    } else {
        SystemSpec::new(masses.to_vec(), g)
    }
}

/// The majorant step of the diagonal bound: `∫∫VV e^{−2ε√(2μ|z|)|r−r'|} ≤ 1`,
/// for the pair with the smallest reduced mass (the largest majorant).
pub fn audit_diagonal_majorant(masses: &[f64], z: f64, eps: f64, profile: &BumpProfile) -> Result<BoundAudit> {
    check_z(z)?;
    let spec = spec_of(masses, 1.0)?;
    let mu = spec.pairs().iter().map(|p| p.mu).fold(f64::INFINITY, f64::min);
    let m = exponential_majorant(profile, 2.0 * eps * (2.0 * mu * z.abs()).sqrt())?;
    let inputs = AuditInputs { masses: Some(masses.to_vec()), g: None, z, eps: Some(eps) };
    Ok(BoundAudit::new("diagonal-majorant", inputs, 1.0, m))
}

/// Whole-line diagonal block `φ_ε^σ(z)` on the zero-energy slice, where its
/// norm is largest (the kernel decreases pointwise in the slice energy).
pub fn continuum_block(
    sigma: &PairIndex,
    g: f64,
    z: f64,
    eps: f64,
    profile: &BumpProfile,
    q: usize,
) -> Result<DiagonalBlock> {
    DiagonalBlock::continuum(sigma, g, z, eps, &[0.0], profile, q)
}

/// End-to-end diagonal bound: `max_σ ‖φ_ε^σ(z)‖ ≤ 𝔅|g|/√|z|`.
pub fn audit_diagonal_bound(masses: &[f64], g: f64, z: f64, eps: f64) -> Result<BoundAudit> {
    check_z(z)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec(format!("epsilon must be positive, got {eps}")));
    }
    let spec = spec_of(masses, g)?;
    let profile = BumpProfile::default();
    let measured = spec
        .pairs()
        .iter()
        .map(|p| continuum_block(p, g, z, eps, &profile, DEFAULT_RELATIVE_NODES).map(|b| b.norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let claimed = spec.bounds().diagonal_bound(g, z);
    let inputs = AuditInputs { masses: Some(masses.to_vec()), g: Some(g), z, eps: Some(eps) };
    Ok(BoundAudit::new("diagonal-bound", inputs, claimed, measured))
}

/// `2∫∫V(r)V(r')(r² + r'²) dr dr' = 4∫V r²` (using `∫V = 1`).
pub fn second_moment_constant(profile: &BumpProfile) -> Result<f64> {
    let a = profile.support_radius();
    Ok(4.0 * integrate(|r| profile.potential(r) * r * r, -a, a, 1e-14, 1e-12)?.value)
}

/// The moment constant against its bound `4 sup_{supp v} r²`.
pub fn audit_moment_constant(profile: &BumpProfile) -> Result<BoundAudit> {
    let a = profile.support_radius();
    Ok(BoundAudit::new("moment-constant", AuditInputs::default(), 4.0 * a * a, second_moment_constant(profile)?))
}

/// Regularization scales of the convergence-constant audit.
pub const CONVERGENCE_EPS: [f64; 2] = [0.2, 0.1];
/// Slice energies probed by the convergence-constant audit.
pub const CONVERGENCE_SLICES: [f64; 3] = [0.0, 1.0, 4.0];

/// `‖φ_ε^σ − φ₀^σ‖ ≤ ε|g|μ√(2∫∫VV(r² + r'²))` at unit coupling for every
/// pair, `ε ∈ {0.2, 0.1}` and several slice energies; reports the case with
/// the smallest relative margin (both sides scale linearly in `g`).
pub fn audit_convergence_constant(masses: &[f64], z: f64) -> Result<BoundAudit> {
    check_z(z)?;
    let spec = spec_of(masses, 1.0)?;
    let profile = BumpProfile::default();
    let root = second_moment_constant(&profile)?.sqrt();
    let q = DEFAULT_RELATIVE_NODES;
    let mut worst: Option<(f64, f64, f64, f64)> = None;
    for p in spec.pairs().iter() {
        let limit = DiagonalBlock::continuum(p, 1.0, z, 0.0, &CONVERGENCE_SLICES, &profile, q)?;
        for &eps in &CONVERGENCE_EPS {
            let blk = DiagonalBlock::continuum(p, 1.0, z, eps, &CONVERGENCE_SLICES, &profile, q)?;
            let d = blk.distance(&limit)?;
            let claimed = eps * p.mu * root;
            if worst.is_none_or(|w| d / claimed > w.0 / w.1) {
                worst = Some((d, claimed, eps, p.mu));
            }
        }
    }
    let (measured, claimed, eps, _) = worst.expect("at least one pair");
    let inputs = AuditInputs { masses: Some(masses.to_vec()), g: Some(1.0), z, eps: Some(eps) };
    Ok(BoundAudit::new("convergence-constant", inputs, claimed, measured))
}

/// The default sweep: masses, couplings and spectral parameters.
#[derive(Clone, Debug, Serialize)]
pub struct SweepGrid {
    /// Mass configurations.
    pub masses: Vec<Vec<f64>>,
    /// Couplings.
    pub couplings: Vec<f64>,
    /// Spectral parameters.
    pub z: Vec<f64>,
    /// Regularization scale of the diagonal audits.
    pub eps: f64,
    /// Monte Carlo samples per four-dimensional audit.
    pub samples: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            masses: vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![0.5, 1.0, 2.0]],
            couplings: vec![0.5, 1.0, 2.0],
            z: vec![-1.0, -2.0, -8.0],
            eps: 0.1,
            samples: MC_SAMPLES,
        }
    }
}

/// Runs every audit over `sweep`. Monte Carlo audit `k` uses stream seed
/// `seed + k`, so results are reproducible bit for bit.
pub fn run_audits(sweep: &SweepGrid, seed: u64) -> Result<Vec<BoundAudit>> {
    let profile = BumpProfile::default();
    let mut out = vec![audit_moment_constant(&profile)?];
    for (k, &z) in sweep.z.iter().enumerate() {
        out.push(audit_schur_3d(z)?);
        out.push(audit_schur_4d(z, sweep.samples, seed.wrapping_add(k as u64))?);
    }
    for m in &sweep.masses {
        for &z in &sweep.z {
            out.push(audit_diagonal_majorant(m, z, sweep.eps, &profile)?);
            out.push(audit_convergence_constant(m, z)?);
            for &g in &sweep.couplings {
                out.push(audit_diagonal_bound(m, g, z, sweep.eps)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_radial_moment() {
        // ∫₀^∞ ρ² e^{−ρ²/2t} dρ = (√π/4)(2t)^{3/2}.
        for t in [0.3, 1.0, 2.5] {
            let q = integrate_to_infinity(|r: f64| r * r * (-r * r / (2.0 * t)).exp(), 0.0, 1e-13, 1e-12).unwrap();
            let closed = PI.sqrt() / 4.0 * (2.0 * t).powf(1.5);
            assert!((q.value - closed).abs() < 1e-10 * closed);
        }
    }

    #[test]
    fn schur_3d_row_matches_polar_closed_form() {
        // (1/2)∫ρ e^{−c s}/s dρ = e^{−cb}/(2c) with c = √(2|z|).
        for (z, b) in [(-2.0, 0.0), (-2.0, 0.3), (-8.0, 1.0)] {
            let c = (2.0f64 * -z).sqrt();
            let closed = (-c * b).exp() / (2.0 * c);
            assert!((schur_row_3d(z, b).unwrap() - closed).abs() < 1e-9);
        }
    }
}
