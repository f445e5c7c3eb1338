//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use plate_homog::fem::eig::EigOptions;
use plate_homog::fine::DEFAULT_BUDGET;
use plate_homog::geometry::{build_macro_mesh, Edge, InclusionShape, MacroMesh};
use plate_homog::limit::{LoadSpec, RegimeConfig};
use plate_homog::spectrum::SpectrumSettings;
use plate_homog::tensor::{MaterialInput, MaterialSpec};
use plate_homog::zhikov::SpectrumPath;

use crate::Failure;

/// Periodicity cell discretization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    /// Inclusion shape.
    pub shape: InclusionShape,
    /// Elements per cell side.
    pub n: usize,
    /// Elements across the thickness of three-dimensional cells.
    #[serde(default = "default_n_z")]
    pub n_z: usize,
}

fn default_n_z() -> usize {
    4
}

/// Rectangular mid-plane and its discretization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroConfig {
    /// Side lengths.
    pub lengths: [f64; 2],
    /// Elements per side.
    pub elements: [usize; 2],
    /// Clamped edges.
    pub clamped: Vec<Edge>,
}

/// Solver settings shared by all commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Eigensolver settings.
    #[serde(default)]
    pub eig: EigOptions,
    /// Largest number of fine-scale unknowns.
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { eig: EigOptions::default(), budget: DEFAULT_BUDGET }
    }
}

/// Inclusion modes, Zhikov function and limit-spectrum settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Inclusion modes computed and kept in the limit system.
    pub modes: usize,
    /// Modes entering the Zhikov function.
    pub truncation: usize,
    /// Macroscopic eigenvalues matched.
    pub macro_count: usize,
    /// Root-finding path.
    pub path: SpectrumPath,
    /// Grid points of the strip frequency scan.
    pub strip_points: usize,
    /// Largest strip frequency.
    pub strip_eta_max: f64,
    /// Samples of the dispersion curve.
    pub dispersion_points: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let s = SpectrumSettings::default();
        Self {
            modes: s.modes,
            truncation: s.truncation,
            macro_count: s.macro_count,
            path: s.path,
            strip_points: s.strip_points,
            strip_eta_max: s.strip_eta_max,
            dispersion_points: 400,
        }
    }
}

/// Initial data of an evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Macroscopic eigenmode used as initial displacement.
    pub mode: usize,
    /// Amplitude of the mode.
    pub amplitude: f64,
}

/// Evolution settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    /// Final time.
    pub t_end: f64,
    /// Step size, `t_end / 1000` when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Record the full state every this many steps.
    #[serde(default = "default_record")]
    pub record_every: usize,
    /// Initial data, zero when absent.
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    /// Body load.
    #[serde(default)]
    pub load: LoadSpec,
}

fn default_record() -> usize {
    10
}

/// Resolvent settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventConfig {
    /// Resolvent parameter.
    pub lambda: f64,
    /// Body load.
    pub load: LoadSpec,
}

/// Fine-scale comparison settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Periods of the fine runs.
    pub epsilons: Vec<f64>,
    /// Thickness per period; required when the thickness-to-period ratio is zero or infinite.
    #[serde(default)]
    pub thickness: Option<Vec<f64>>,
    /// Fine eigenvalues compared.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Element layers across the thickness.
    #[serde(default = "default_layers")]
    pub layers: usize,
    /// Distance above which a fine eigenvalue is flagged as a pollution candidate.
    #[serde(default = "default_pollution")]
    pub pollution_tol: f64,
}

fn default_count() -> usize {
    3
}

fn default_layers() -> usize {
    4
}

fn default_pollution() -> f64 {
    0.05
}

/// Complete run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Material file, relative to the configuration file.
    pub material: PathBuf,
    /// Cell discretization.
    pub cell: CellConfig,
    /// Regime row.
    pub regime: RegimeConfig,
    /// Mid-plane domain.
    #[serde(rename = "macro")]
    pub macro_domain: MacroConfig,
    /// Solver settings.
    #[serde(default)]
    pub solver: SolverConfig,
    /// Spectrum settings.
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    /// Evolution settings.
    #[serde(default)]
    pub evolve: Option<EvolveConfig>,
    /// Resolvent settings.
    #[serde(default)]
    pub resolvent: Option<ResolventConfig>,
    /// Fine-scale comparison settings.
    #[serde(default)]
    pub validate: Option<ValidateConfig>,
    /// Output directory, overridden by `--out`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Configuration together with the resolved material and the reproducibility hash.
#[derive(Debug)]
pub struct LoadedConfig {
    /// Parsed configuration.
    pub run: RunConfig,
    /// Material data.
    pub material: MaterialSpec,
    /// SHA-256 of the configuration and material file contents.
    pub hash: String,
}

impl LoadedConfig {
    /// Reads and validates a configuration file and its material file.
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let run: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("invalid configuration {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let material_path = base.join(&run.material);
        let material_text = std::fs::read_to_string(&material_path)
            .map_err(|e| Failure::Config(format!("cannot read material file {}: {e}", material_path.display())))?;
        let input: MaterialInput = serde_json::from_str(&material_text)
            .map_err(|e| Failure::Config(format!("invalid material file {}: {e}", material_path.display())))?;
        let material = MaterialSpec::from_input(&input)?;
        run.regime.validate()?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.update(material_text.as_bytes());
        let hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { run, material, hash })
    }

    /// Mid-plane mesh.
    pub fn macro_mesh(&self) -> Result<MacroMesh, Failure> {
        let m = &self.run.macro_domain;
        Ok(build_macro_mesh(m.lengths[0], m.lengths[1], m.elements[0], m.elements[1], &m.clamped)?)
    }

    /// Spectrum settings for the library pipeline.
    pub fn spectrum_settings(&self) -> SpectrumSettings {
        let s = &self.run.spectrum;
        SpectrumSettings {
            modes: s.modes,
            truncation: s.truncation,
            macro_count: s.macro_count,
            path: s.path,
            strip_points: s.strip_points,
            strip_eta_max: s.strip_eta_max,
            eig: self.run.solver.eig,
        }
    }
}
