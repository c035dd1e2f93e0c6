//! Run configuration: a TOML document describing the particle system, grid
//! ladder, regularization scales, spectral parameters and per-command
//! options. Parsing is strict (unknown keys are rejected) and every value is
//! validated before any computation starts.
//!
//! ```toml
//! seed = 1
//! eps_list = [0.4, 0.2, 0.1, 0.05]
//! z_list = [-20.0]
//!
//! [system]
//! n = 2
//! masses = [1.0, 1.0]
//! g = 1.0
//!
//! [[grid]]
//! box_length = 8.0
//! points = 64
//!
//! [converge]
//! tol = 1e-8
//! ```

use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::SystemSpec;
use crate::resolvent::GridLevel;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// The particle system block `[system]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// Particle count; must equal the length of `masses`.
    pub n: usize,
    /// Masses `m_i > 0`.
    pub masses: Vec<f64>,
    /// Pair coupling `g ≠ 0`.
    pub g: f64,
    /// Support radius `a` of the bump profile.
    #[serde(default = "default_radius")]
    pub profile_radius: f64,
}

fn default_radius() -> f64 {
    1.0
}

impl Default for SystemSection {
    fn default() -> Self {
        Self { n: 2, masses: vec![1.0, 1.0], g: 1.0, profile_radius: 1.0 }
    }
}

/// Options of the `converge` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSection {
    /// Assembly tolerance.
    pub tol: f64,
    /// Lanczos steps per distance.
    pub steps: usize,
    /// Gauss–Legendre nodes across the relative support.
    pub nodes: usize,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self { tol: 1e-8, steps: 20, nodes: 24 }
    }
}

/// Options of the `spectrum` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Grid levels. For `n = 2` they describe the one-dimensional relative
    /// coordinate; otherwise the full `n`-dimensional configuration space.
    pub levels: Vec<GridLevel>,
    /// Regularization scales (defaults to the top-level `eps_list`).
    pub eps_list: Option<Vec<f64>>,
    /// Relative tolerance of the comparison with `−μg²/2` (two particles).
    pub tolerance: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            levels: vec![GridLevel { box_length: 20.0, points: 2048 }, GridLevel { box_length: 40.0, points: 4096 }],
            eps_list: None,
            tolerance: 0.02,
        }
    }
}

/// Options of the `bounds` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
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

impl Default for BoundsSection {
    fn default() -> Self {
        let s = crate::verify::SweepGrid::default();
        Self { masses: s.masses, couplings: s.couplings, z: s.z, eps: s.eps, samples: s.samples }
    }
}

impl BoundsSection {
    /// The equivalent audit sweep.
    pub fn sweep(&self) -> crate::verify::SweepGrid {
        crate::verify::SweepGrid {
            masses: self.masses.clone(),
            couplings: self.couplings.clone(),
            z: self.z.clone(),
            eps: self.eps,
            samples: self.samples,
        }
    }
}

/// Options of the `kernels` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelsSection {
    /// Dimensions to tabulate.
    pub dims: Vec<usize>,
    /// Spectral parameters.
    pub z: Vec<f64>,
    /// Distances `x > 0`.
    pub x: Vec<f64>,
}

impl Default for KernelsSection {
    fn default() -> Self {
        Self { dims: vec![1, 3, 4], z: vec![-1.0, -4.0], x: (1..=20).map(|k| 0.25 * k as f64).collect() }
    }
}

/// Options of the `kk-check` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KkCheckSection {
    /// Grid (points per axis must make `points^n ≤` the dense limit).
    pub grid: GridLevel,
    /// Spectral parameter.
    pub z: f64,
    /// Regularization scale.
    pub eps: f64,
    /// Random right-hand sides.
    pub rhs: usize,
    /// Neumann tolerance.
    pub tol: f64,
    /// Pass threshold on the relative deviation.
    pub threshold: f64,
}

impl Default for KkCheckSection {
    fn default() -> Self {
        Self {
            grid: GridLevel { box_length: 4.0, points: 64 },
            z: -16.0,
            eps: 0.25,
            rhs: 10,
            tol: 1e-12,
            threshold: 1e-6,
        }
    }
}

/// Options of the `forms` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormsSection {
    /// Grid of the random fields (dimension `n`).
    pub grid: GridLevel,
    /// Random fields per property.
    pub fields: usize,
    /// Band limit of the random fields (fraction of the Nyquist momentum).
    pub band: f64,
    /// Grid and scales of the form-vs-operator consistency check (`n = 2` only).
    pub consistency_grid: GridLevel,
    /// Scales of the consistency extrapolation.
    pub consistency_eps: Vec<f64>,
}

impl Default for FormsSection {
    fn default() -> Self {
        Self {
            grid: GridLevel { box_length: 8.0, points: 32 },
            fields: 100,
            band: 0.5,
            consistency_grid: GridLevel { box_length: 6.0, points: 512 },
            consistency_eps: vec![0.2, 0.1, 0.05],
        }
    }
}

/// A complete run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master random seed.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Regularization scales.
    #[serde(default = "default_eps")]
    pub eps_list: Vec<f64>,
    /// Spectral parameters.
    #[serde(default = "default_z")]
    pub z_list: Vec<f64>,
    /// The particle system.
    #[serde(default)]
    pub system: SystemSection,
    /// Grid ladder.
    #[serde(default = "default_ladder")]
    pub grid: Vec<GridLevel>,
    /// `converge` options.
    #[serde(default)]
    pub converge: ConvergeSection,
    /// `spectrum` options.
    #[serde(default)]
    pub spectrum: SpectrumSection,
    /// `bounds` options.
    #[serde(default)]
    pub bounds: BoundsSection,
    /// `kernels` options.
    #[serde(default)]
    pub kernels: KernelsSection,
    /// `kk-check` options.
    #[serde(default)]
    pub kk_check: KkCheckSection,
    /// `forms` options.
    #[serde(default)]
    pub forms: FormsSection,
}

fn default_seed() -> u64 {
    1
}

fn default_eps() -> Vec<f64> {
    vec![0.4, 0.2, 0.1, 0.05]
}

fn default_z() -> Vec<f64> {
    vec![-20.0]
}

fn default_ladder() -> Vec<GridLevel> {
    vec![GridLevel { box_length: 8.0, points: 64 }]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            output: None,
            eps_list: default_eps(),
            z_list: default_z(),
            system: SystemSection::default(),
            grid: default_ladder(),
            converge: ConvergeSection::default(),
            spectrum: SpectrumSection::default(),
            bounds: BoundsSection::default(),
            kernels: KernelsSection::default(),
            kk_check: KkCheckSection::default(),
            forms: FormsSection::default(),
        }
    }
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn check_level(field: &str, level: &GridLevel) -> Result<()> {
    Grid::new(vec![level.points], level.box_length).map(|_| ()).map_err(|e| config_err(field, e))
}

fn check_positive(field: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(config_err(field, "must not be empty"));
    }
    match values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(v) => Err(config_err(field, format!("{v} is not a positive number"))),
        None => Ok(()),
    }
}

fn check_negative(field: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(config_err(field, "must not be empty"));
    }
    match values.iter().find(|v| !(v.is_finite() && **v < 0.0)) {
        Some(v) => Err(config_err(field, format!("{v} is not a negative number"))),
        None => Ok(()),
    }
}

impl RunConfig {
    /// Parses and validates a TOML document. Syntax errors carry line and
    /// column; semantic errors name the offending field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Serializes back to TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural validation shared by every command.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.masses.len() != s.n {
            return Err(config_err("system.masses", format!("n = {} but {} masses were given", s.n, s.masses.len())));
        }
        self.spec().map_err(|e| config_err("system", e))?;
        self.profile()?;
        check_positive("eps_list", &self.eps_list)?;
        check_negative("z_list", &self.z_list)?;
        if self.grid.is_empty() {
            return Err(config_err("grid", "at least one level is required"));
        }
        for level in &self.grid {
            check_level("grid", level)?;
        }
        let c = &self.converge;
        if !(c.tol > 0.0 && c.tol < 1.0) {
            return Err(config_err("converge.tol", format!("{} is not in (0, 1)", c.tol)));
        }
        if c.steps == 0 || c.nodes == 0 {
            return Err(config_err("converge", "steps and nodes must be positive"));
        }
        if self.spectrum.levels.is_empty() {
            return Err(config_err("spectrum.levels", "at least one level is required"));
        }
        for level in &self.spectrum.levels {
            check_level("spectrum.levels", level)?;
        }
        if let Some(e) = &self.spectrum.eps_list {
            check_positive("spectrum.eps_list", e)?;
        }
        let b = &self.bounds;
        check_negative("bounds.z", &b.z)?;
        check_positive("bounds.eps", &[b.eps])?;
        if b.masses.is_empty() || b.couplings.is_empty() || b.samples < crate::verify::MC_BATCHES {
            return Err(config_err("bounds", "needs masses, couplings and at least 100 samples"));
        }
        if b.couplings.contains(&0.0) {
            return Err(config_err("bounds.couplings", "couplings must be nonzero"));
        }
        let k = &self.kernels;
        check_negative("kernels.z", &k.z)?;
        check_positive("kernels.x", &k.x)?;
        if let Some(d) = k.dims.iter().find(|d| !(1..=4).contains(*d)) {
            return Err(config_err("kernels.dims", format!("dimension {d} is not in 1..=4")));
        }
        let kk = &self.kk_check;
        check_level("kk_check.grid", &kk.grid)?;
        check_negative("kk_check.z", &[kk.z])?;
        check_positive("kk_check.eps", &[kk.eps, kk.tol, kk.threshold])?;
        let f = &self.forms;
        check_level("forms.grid", &f.grid)?;
        check_level("forms.consistency_grid", &f.consistency_grid)?;
        check_positive("forms.consistency_eps", &f.consistency_eps)?;
        if !(f.band > 0.0 && f.band <= 1.0) || f.fields == 0 {
            return Err(config_err("forms", "band must be in (0, 1] and fields positive"));
        }
        Ok(())
    }

    /// The particle system.
    pub fn spec(&self) -> Result<SystemSpec> {
        SystemSpec::with_count(self.system.n, self.system.masses.clone(), self.system.g)
    }

    /// The bump profile.
    pub fn profile(&self) -> Result<BumpProfile> {
        BumpProfile::new(self.system.profile_radius).map_err(|e| config_err("system.profile_radius", e))
    }

    /// Requires `z < z₀` for every listed spectral parameter unless `force`.
    pub fn check_thresholds(&self, z_values: &[f64], force: bool) -> Result<()> {
        if force {
            return Ok(());
        }
        let z0 = self.spec()?.bounds().z0;
        match z_values.iter().find(|z| !(**z < z0)) {
            Some(z) => Err(Error::Config(format!("z = {z} is not below the threshold z0 = {z0}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn mass_count_mismatch_is_rejected() {
        let err = RunConfig::from_toml("[system]\nn = 3\nmasses = [1.0, 1.0]\ng = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("system.masses"));
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let err = RunConfig::from_toml("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
