//! End-to-end limit spectra: effective tensor, inclusion modes, Zhikov function and macroscopic operator of a regime.

use serde::{Deserialize, Serialize};

use crate::effective::{effective_delta, effective_delta0, effective_deltainf, EffectiveTensor, TensorRegime};
use crate::error::{Error, Result};
use crate::fem::eig::EigOptions;
use crate::geometry::{CellMesh, MacroMesh};
use crate::inclusion::{bloch_spectrum, eta_grid, strip_bottom_m0, BlochSpectrum, OperatorTag, StripCurve};
use crate::limit::{MuScaling, Regime, RegimeConfig, ScaleLimit};
use crate::macro_plate::{macro_eigs, MacroKind, MacroOperator};
use crate::tensor::MaterialSpec;
use crate::zhikov::{
    limit_spectrum, limit_spectrum_matrix, LimitSpectrum, PointKind, SpectrumOptions, SpectrumPath, SpectrumPoint,
    ZhikovFunction,
};

/// Spectral problem attached to a supported regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralProblem {
    /// `h⁻²` spectrum for `μ = ε`, `τ = 2`: eigenvalues of the homogenized bending plate.
    Plate {
        /// Thickness-to-period ratio.
        delta: f64,
    },
    /// Order-one spectrum on the membrane parity class for `μ = ε`, `τ = 0`.
    Membrane {
        /// Limit of `h / ε`.
        delta: ScaleLimit,
    },
    /// `h⁻²` spectrum with resonant inclusions for `μ = εh` (`δ > 0`) or `μ = ε²` (`δ = 0`), `τ = 2`.
    Bending {
        /// Limit of `h / ε`.
        delta: ScaleLimit,
    },
}

impl SpectralProblem {
    /// Spectral problem of a validated regime configuration.
    pub fn from_regime(cfg: &RegimeConfig) -> Result<Self> {
        Ok(match cfg.validate()? {
            Regime::BendingDelta { delta } => SpectralProblem::Plate { delta },
            Regime::RealTimeDelta { delta } => SpectralProblem::Membrane { delta: ScaleLimit::Finite(delta) },
            Regime::RealTimeZero { .. } => SpectralProblem::Membrane { delta: ScaleLimit::Zero },
            Regime::RealTimeInfinite => SpectralProblem::Membrane { delta: ScaleLimit::Infinite },
            Regime::StrongBendingDelta { delta } => SpectralProblem::Bending { delta: ScaleLimit::Finite(delta) },
            Regime::BendingZero => SpectralProblem::Bending { delta: ScaleLimit::Zero },
            Regime::StrongBendingInfinite => SpectralProblem::Bending { delta: ScaleLimit::Infinite },
        })
    }

    /// Regime configuration the problem belongs to; `δ = 0` membrane problems take `κ = ∞`.
    pub fn regime(&self) -> RegimeConfig {
        let cfg = |delta, mu_scaling, tau| RegimeConfig { delta, kappa: None, mu_scaling, tau };
        match *self {
            SpectralProblem::Plate { delta } => cfg(ScaleLimit::Finite(delta), MuScaling::Eps, 2),
            SpectralProblem::Membrane { delta } => RegimeConfig {
                kappa: (delta == ScaleLimit::Zero).then_some(ScaleLimit::Infinite),
                ..cfg(delta, MuScaling::Eps, 0)
            },
            SpectralProblem::Bending { delta: ScaleLimit::Zero } => cfg(ScaleLimit::Zero, MuScaling::Eps2, 2),
            SpectralProblem::Bending { delta } => cfg(delta, MuScaling::EpsH, 2),
        }
    }

    /// Label used in reports.
    pub fn label(&self) -> String {
        let d = |delta: &ScaleLimit| match delta {
            ScaleLimit::Zero => "0".to_string(),
            ScaleLimit::Finite(v) => format!("{v}"),
            ScaleLimit::Infinite => "inf".to_string(),
        };
        match self {
            SpectralProblem::Plate { delta } => format!("plate(delta={delta})"),
            SpectralProblem::Membrane { delta } => format!("membrane(delta={})", d(delta)),
            SpectralProblem::Bending { delta } => format!("bending(delta={})", d(delta)),
        }
    }

    /// Effective tensor regime.
    pub fn tensor_regime(&self) -> TensorRegime {
        match *self {
            SpectralProblem::Plate { delta }
            | SpectralProblem::Membrane { delta: ScaleLimit::Finite(delta) }
            | SpectralProblem::Bending { delta: ScaleLimit::Finite(delta) } => TensorRegime::DeltaFinite { delta },
            SpectralProblem::Membrane { delta: ScaleLimit::Zero } | SpectralProblem::Bending { delta: ScaleLimit::Zero } => {
                TensorRegime::DeltaZero
            }
            _ => TensorRegime::DeltaInfty,
        }
    }

    /// Dimension of the cell mesh.
    pub fn cell_dim(&self) -> usize {
        match self.tensor_regime() {
            TensorRegime::DeltaFinite { .. } => 3,
            _ => 2,
        }
    }

    /// Inclusion operator and the components entering the Zhikov function, if any.
    pub fn inclusion(&self) -> Option<(OperatorTag, Vec<usize>)> {
        match *self {
            SpectralProblem::Plate { .. } => None,
            SpectralProblem::Membrane { delta } => Some((
                match delta {
                    ScaleLimit::Finite(delta) => OperatorTag::MembDelta { delta },
                    ScaleLimit::Zero => OperatorTag::MembDelta0,
                    ScaleLimit::Infinite => OperatorTag::MembDeltaInf,
                },
                vec![0, 1],
            )),
            SpectralProblem::Bending { delta } => Some(match delta {
                ScaleLimit::Finite(delta) => (OperatorTag::BendDelta { delta }, vec![2]),
                ScaleLimit::Zero => (OperatorTag::BendDelta0, vec![0]),
                ScaleLimit::Infinite => (OperatorTag::FullDeltaInf, vec![2]),
            }),
        }
    }

    /// Macroscopic operator kind.
    pub fn macro_kind(&self) -> MacroKind {
        match self {
            SpectralProblem::Plate { .. } | SpectralProblem::Bending { delta: ScaleLimit::Finite(_) } => MacroKind::BendCoupled,
            SpectralProblem::Membrane { .. } => MacroKind::Memb,
            SpectralProblem::Bending { .. } => MacroKind::BendDecoupled,
        }
    }

    /// Whether the strip spectrum `[m0, ∞)` belongs to the limit set.
    pub fn has_strip(&self) -> bool {
        matches!(
            self,
            SpectralProblem::Membrane { delta: ScaleLimit::Infinite } | SpectralProblem::Bending { delta: ScaleLimit::Infinite }
        )
    }
}

/// Discretization and truncation settings of a limit-spectrum run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSettings {
    /// Inclusion modes computed.
    pub modes: usize,
    /// Modes entering the Zhikov function.
    pub truncation: usize,
    /// Macroscopic eigenvalues matched.
    pub macro_count: usize,
    /// Root-finding path; the matrix path is used whenever `β` is not scalar.
    pub path: SpectrumPath,
    /// Grid points of the strip frequency scan.
    pub strip_points: usize,
    /// Largest strip frequency.
    pub strip_eta_max: f64,
    /// Eigensolver settings.
    pub eig: EigOptions,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            modes: 20,
            truncation: 20,
            macro_count: 10,
            path: SpectrumPath::Scalar,
            strip_points: 41,
            strip_eta_max: 20.0,
            eig: EigOptions::default(),
        }
    }
}

/// All intermediate results of a limit-spectrum run.
#[derive(Debug)]
pub struct SpectrumRun {
    /// Spectral problem.
    pub problem: SpectralProblem,
    /// Effective tensor.
    pub tensor: EffectiveTensor,
    /// Inclusion modes, if the problem has resonant inclusions.
    pub bloch: Option<BlochSpectrum>,
    /// Zhikov function, if the problem has resonant inclusions.
    pub zhikov: Option<ZhikovFunction>,
    /// Macroscopic eigenvalues: unit-mass values when matched against `β`, `⟨ρ⟩`-mass values otherwise.
    pub macro_values: Vec<f64>,
    /// Strip curve when the strip spectrum is present.
    pub strip: Option<StripCurve>,
    /// Computed limit set.
    pub limit: LimitSpectrum,
}

/// Computes the limit spectrum of a spectral problem on the given cell and mid-plane meshes.
pub fn compute_limit_spectrum(
    problem: SpectralProblem,
    material: &MaterialSpec,
    cell: &CellMesh,
    macro_mesh: &MacroMesh,
    settings: &SpectrumSettings,
) -> Result<SpectrumRun> {
    if cell.dim != problem.cell_dim() {
        return Err(Error::Config(format!(
            "{} needs a {}-dimensional cell mesh, got {}",
            problem.label(),
            problem.cell_dim(),
            cell.dim
        )));
    }
    if settings.macro_count == 0 {
        return Err(Error::Config("at least one macroscopic eigenvalue is needed".into()));
    }
    let tensor = match problem.tensor_regime() {
        TensorRegime::DeltaFinite { delta } => effective_delta(material, cell, delta)?,
        TensorRegime::DeltaZero => effective_delta0(material, cell)?,
        TensorRegime::DeltaInfty => effective_deltainf(material, cell)?,
    };
    let soft = cell.soft_fraction();
    let rho_mean = material.rho0 * soft + material.rho1 * (1.0 - soft);
    let op = MacroOperator::new(problem.macro_kind(), macro_mesh, &tensor, rho_mean)?;
    let count = settings.macro_count.min(op.ndof());
    let macro_spec = macro_eigs(&op, count, &settings.eig)?;
    let Some((tag, components)) = problem.inclusion() else {
        let points = macro_spec
            .values
            .iter()
            .map(|&lambda| SpectrumPoint { lambda, kind: PointKind::Macro, matched_mu: None, pole_interval: None })
            .collect::<Vec<_>>();
        let top = macro_spec.values.last().copied().unwrap_or(0.0);
        let limit = LimitSpectrum {
            regime: problem.label(),
            path: SpectrumPath::Scalar,
            gaps: vec![(0.0, macro_spec.values[0])],
            points,
            intervals: Vec::new(),
            poles: Vec::new(),
            lambda_max: top,
            notes: vec![format!("lowest {count} eigenvalues of the homogenized bending plate")],
        };
        return Ok(SpectrumRun { problem, tensor, bloch: None, zhikov: None, macro_values: macro_spec.values, strip: None, limit });
    };
    let bloch = bloch_spectrum(material, cell, tag, settings.modes, &settings.eig)?;
    let zf = ZhikovFunction::new(&bloch, &components, settings.truncation.min(bloch.len()))?;
    let strip = if problem.has_strip() {
        Some(strip_bottom_m0(material, cell, &eta_grid(settings.strip_points, settings.strip_eta_max), &settings.eig)?)
    } else {
        None
    };
    let opts = SpectrumOptions { strip_bottom: strip.as_ref().map(|s| s.m0), ..SpectrumOptions::default() };
    let macro_values = macro_spec.unit_mass_values();
    let label = problem.label();
    let limit = if settings.path == SpectrumPath::Scalar && zf.is_scalar() {
        limit_spectrum(&label, &zf, &macro_values, &opts)?
    } else {
        let mut ls = limit_spectrum_matrix(&label, &zf, &op, count, &opts)?;
        if settings.path == SpectrumPath::Scalar {
            ls.notes.push("the Zhikov function is not scalar; inertia counting used instead".into());
        }
        ls
    };
    Ok(SpectrumRun { problem, tensor, bloch: Some(bloch), zhikov: Some(zf), macro_values, strip, limit })
}
