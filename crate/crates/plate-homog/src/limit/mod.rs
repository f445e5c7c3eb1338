//! Coupled macro–micro limit systems: regime table, load functionals, resolvent solves and evolutions.

mod evolve;
mod system;

pub use evolve::{
    evolve, evolve_memory_kernel, laplace_transform, EnergySample, EvolutionVariant, EvolveOptions, InitialData,
    Trajectory,
};
pub use system::{
    solve_limit_resolvent, Coupling, Family, FieldBlock, FieldRole, LimitInputs, LimitProblem, LimitState,
    TermLoad,
};

use serde::{Deserialize, Serialize};

use crate::effective::TensorRegime;
use crate::error::{Error, Result};
use crate::inclusion::OperatorTag;

/// Limit value of a scale ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ScaleLimit {
    /// The ratio tends to zero.
    Zero,
    /// The ratio tends to a positive finite value.
    Finite(f64),
    /// The ratio tends to infinity.
    Infinite,
}

impl ScaleLimit {
    fn check(&self, name: &str) -> Result<()> {
        match *self {
            ScaleLimit::Finite(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::Config(format!("{name} = {v} must be positive and finite")))
            }
            _ => Ok(()),
        }
    }
}

/// Scaling of the soft-phase stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuScaling {
    /// `μ_h = ε`.
    #[serde(rename = "eps")]
    Eps,
    /// `μ_h = ε h`.
    #[serde(rename = "eps_h")]
    EpsH,
    /// `μ_h = ε²`.
    #[serde(rename = "eps2")]
    Eps2,
}

/// Asymptotic regime as requested by the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    /// Limit of thickness over period.
    pub delta: ScaleLimit,
    /// Limit of thickness over squared period, used only when `delta` is zero.
    #[serde(default)]
    pub kappa: Option<ScaleLimit>,
    /// Soft-phase stiffness scaling.
    pub mu_scaling: MuScaling,
    /// Time scaling exponent, 0 or 2.
    pub tau: u32,
}

/// A supported row of the regime table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "row", rename_all = "snake_case")]
pub enum Regime {
    /// Finite `delta`, `μ = ε`, `τ = 2`: bending dynamics with quasistatic membrane and inclusion fields.
    BendingDelta {
        /// Thickness over period.
        delta: f64,
    },
    /// Finite `delta`, `μ = ε`, `τ = 0`: membrane dynamics with resonant three-dimensional inclusions.
    RealTimeDelta {
        /// Thickness over period.
        delta: f64,
    },
    /// Finite `delta`, `μ = εh`, `τ = 2`: bending dynamics with resonant inclusions.
    StrongBendingDelta {
        /// Thickness over period.
        delta: f64,
    },
    /// `delta = 0`, `μ = ε`, `τ = 0`: membrane dynamics with plate-like inclusions.
    RealTimeZero {
        /// Thickness over squared period.
        kappa: ScaleLimit,
    },
    /// `delta = 0`, `μ = ε²`, `τ = 2`: bending dynamics with resonant bending inclusions.
    BendingZero,
    /// `delta = ∞`, `μ = ε`, `τ = 0`: membrane dynamics with thin-film inclusions.
    RealTimeInfinite,
    /// `delta = ∞`, `μ = εh`, `τ = 2`: bending dynamics with thin-film inclusions.
    StrongBendingInfinite,
}

impl RegimeConfig {
    /// Checks the combination against the regime table.
    pub fn validate(&self) -> Result<Regime> {
        self.delta.check("delta")?;
        if let Some(k) = &self.kappa {
            k.check("kappa")?;
        }
        if self.tau != 0 && self.tau != 2 {
            return Err(Error::Config(format!("tau = {} must be 0 or 2", self.tau)));
        }
        let row = match (self.delta, self.mu_scaling, self.tau) {
            (ScaleLimit::Finite(delta), MuScaling::Eps, 2) => Regime::BendingDelta { delta },
            (ScaleLimit::Finite(delta), MuScaling::Eps, 0) => Regime::RealTimeDelta { delta },
            (ScaleLimit::Finite(delta), MuScaling::EpsH, 2) => Regime::StrongBendingDelta { delta },
            (ScaleLimit::Zero, MuScaling::Eps, 0) => {
                let kappa = self
                    .kappa
                    .ok_or_else(|| Error::Config("delta = 0 with mu = eps needs a value of kappa".into()))?;
                return Ok(Regime::RealTimeZero { kappa });
            }
            (ScaleLimit::Zero, MuScaling::Eps2, 2) => Regime::BendingZero,
            (ScaleLimit::Infinite, MuScaling::Eps, 0) => Regime::RealTimeInfinite,
            (ScaleLimit::Infinite, MuScaling::EpsH, 2) => Regime::StrongBendingInfinite,
            (d, m, t) => {
                return Err(Error::Config(format!(
                    "unsupported regime: delta = {d:?}, mu = {m:?}, tau = {t}"
                )))
            }
        };
        if self.kappa.is_some() {
            return Err(Error::Config("kappa applies only to delta = 0 with mu = eps and tau = 0".into()));
        }
        Ok(row)
    }

    /// The nine supported combinations, with `delta = 1` and `kappa = 1` as finite representatives.
    pub fn supported() -> Vec<RegimeConfig> {
        let cfg = |delta, kappa, mu_scaling, tau| RegimeConfig { delta, kappa, mu_scaling, tau };
        let fin = ScaleLimit::Finite(1.0);
        vec![
            cfg(fin, None, MuScaling::Eps, 2),
            cfg(fin, None, MuScaling::Eps, 0),
            cfg(fin, None, MuScaling::EpsH, 2),
            cfg(ScaleLimit::Zero, Some(ScaleLimit::Infinite), MuScaling::Eps, 0),
            cfg(ScaleLimit::Zero, Some(fin), MuScaling::Eps, 0),
            cfg(ScaleLimit::Zero, Some(ScaleLimit::Zero), MuScaling::Eps, 0),
            cfg(ScaleLimit::Zero, None, MuScaling::Eps2, 2),
            cfg(ScaleLimit::Infinite, None, MuScaling::Eps, 0),
            cfg(ScaleLimit::Infinite, None, MuScaling::EpsH, 2),
        ]
    }
}

impl Regime {
    /// Effective tensor regime of the stiff matrix.
    pub fn tensor_regime(&self) -> TensorRegime {
        match *self {
            Regime::BendingDelta { delta } | Regime::RealTimeDelta { delta } | Regime::StrongBendingDelta { delta } => {
                TensorRegime::DeltaFinite { delta }
            }
            Regime::RealTimeZero { .. } | Regime::BendingZero => TensorRegime::DeltaZero,
            Regime::RealTimeInfinite | Regime::StrongBendingInfinite => TensorRegime::DeltaInfty,
        }
    }

    /// Dimension of the cell mesh the regime needs.
    pub fn cell_dim(&self) -> usize {
        match self.tensor_regime() {
            TensorRegime::DeltaFinite { .. } => 3,
            _ => 2,
        }
    }

    /// Inclusion operator whose modes carry the dynamic micro field, if any.
    pub fn micro_tag(&self) -> Option<OperatorTag> {
        match *self {
            Regime::BendingDelta { .. } => None,
            Regime::RealTimeDelta { delta } | Regime::StrongBendingDelta { delta } => {
                Some(OperatorTag::FullDelta { delta })
            }
            Regime::RealTimeZero { .. } => Some(OperatorTag::MembDelta0),
            Regime::BendingZero => Some(OperatorTag::BendDelta0),
            Regime::RealTimeInfinite | Regime::StrongBendingInfinite => Some(OperatorTag::FullDeltaInf),
        }
    }

    /// Inclusion operator of the quasistatic micro field, if any.
    pub fn static_tag(&self) -> Option<OperatorTag> {
        match *self {
            Regime::BendingDelta { delta } => Some(OperatorTag::FullDelta { delta }),
            Regime::BendingZero => Some(OperatorTag::MembDelta0),
            _ => None,
        }
    }

    /// Evolution problem governed by the regime.
    pub fn variant(&self) -> EvolutionVariant {
        match self {
            Regime::BendingDelta { .. } => EvolutionVariant::LongTimeBending,
            Regime::RealTimeDelta { .. } | Regime::RealTimeZero { .. } | Regime::RealTimeInfinite => {
                EvolutionVariant::RealTime
            }
            Regime::StrongBendingDelta { .. } | Regime::StrongBendingInfinite => EvolutionVariant::StrongHcBending,
            Regime::BendingZero => EvolutionVariant::Delta0Hc,
        }
    }
}

/// Profile of a load term on the mid-plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MacroProfile {
    /// Constant one.
    #[default]
    Constant,
    /// `sin(k1 π x1 / L1) sin(k2 π x2 / L2)`.
    Sine {
        /// Half-wave numbers.
        k: [f64; 2],
    },
}

impl MacroProfile {
    /// Value at a mid-plane point of a domain with the given side lengths.
    pub fn eval(&self, x: [f64; 2], lengths: [f64; 2]) -> f64 {
        match self {
            MacroProfile::Constant => 1.0,
            MacroProfile::Sine { k } => {
                let pi = std::f64::consts::PI;
                (k[0] * pi * x[0] / lengths[0]).sin() * (k[1] * pi * x[1] / lengths[1]).sin()
            }
        }
    }
}

/// Profile of a load term on the periodicity cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellProfile {
    /// One on the whole cell.
    #[default]
    Uniform,
    /// One on the inclusion, zero on the matrix.
    SoftOnly,
    /// One on the matrix, zero on the inclusion.
    StiffOnly,
}

impl CellProfile {
    /// Value on the given phase.
    pub fn value(&self, soft: bool) -> f64 {
        match (self, soft) {
            (CellProfile::Uniform, _) | (CellProfile::SoftOnly, true) | (CellProfile::StiffOnly, false) => 1.0,
            _ => 0.0,
        }
    }
}

/// Time dependence of a load term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// Constant one.
    #[default]
    Constant,
    /// `sin(ω t)`.
    Sine {
        /// Angular frequency.
        omega: f64,
    },
    /// `min(t / duration, 1)`.
    Ramp {
        /// Rise time.
        duration: f64,
    },
    /// One up to `duration`, zero afterwards.
    Pulse {
        /// Switch-off time.
        duration: f64,
    },
}

impl TimeProfile {
    /// Value at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Sine { omega } => (omega * t).sin(),
            TimeProfile::Ramp { duration } => (t / duration).min(1.0),
            TimeProfile::Pulse { duration } => {
                if t < duration {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Separable body-load term `amplitude · P(x̂) · x3^p · Y(y) · g(t) · e_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadTerm {
    /// Loaded displacement component, 0, 1 or 2.
    pub component: usize,
    /// Amplitude.
    pub amplitude: f64,
    /// Mid-plane profile.
    #[serde(default)]
    pub macro_profile: MacroProfile,
    /// Power `p` of the transverse coordinate.
    #[serde(default)]
    pub transverse_power: u32,
    /// Cell profile.
    #[serde(default)]
    pub cell_profile: CellProfile,
    /// Time profile.
    #[serde(default)]
    pub time_profile: TimeProfile,
}

/// Body load given as a sum of separable terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LoadSpec {
    /// Terms.
    pub terms: Vec<LoadTerm>,
}

impl LoadSpec {
    /// Checks components, amplitudes and time profiles.
    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if t.component > 2 {
                return Err(Error::Config(format!("load component {} out of range", t.component)));
            }
            if !t.amplitude.is_finite() {
                return Err(Error::Config("load amplitude must be finite".into()));
            }
            if let TimeProfile::Ramp { duration } | TimeProfile::Pulse { duration } = t.time_profile {
                if !(duration > 0.0) {
                    return Err(Error::Config("load duration must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// `∫_I x3^p dx3` over `I = [-1/2, 1/2]`.
pub fn transverse_moment(p: u32) -> f64 {
    let q = p as i32 + 1;
    (0.5f64.powi(q) - (-0.5f64).powi(q)) / q as f64
}

/// Cell and transverse moments of one load term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermFunctional {
    /// `⟨f̄⟩`: transverse and cell average per component.
    pub mean: [f64; 3],
    /// `⟨x3 f̄_*⟩`: first transverse moment of the in-plane components.
    pub moment: [f64; 2],
    /// `∫_{Y1} f̄3`.
    pub stiff: f64,
    /// `∫_{Y0} f̄3`.
    pub soft: f64,
}

/// Moments of every load term for a cell with the given inclusion area fraction.
pub fn compute_load_functional(load: &LoadSpec, soft_fraction: f64) -> Result<Vec<TermFunctional>> {
    load.validate()?;
    Ok(load
        .terms
        .iter()
        .map(|t| {
            let y_soft = t.cell_profile.value(true) * soft_fraction;
            let y_stiff = t.cell_profile.value(false) * (1.0 - soft_fraction);
            let y_mean = y_soft + y_stiff;
            let avg = t.amplitude * transverse_moment(t.transverse_power);
            let first = t.amplitude * transverse_moment(t.transverse_power + 1);
            let mut mean = [0.0; 3];
            let mut moment = [0.0; 2];
            mean[t.component] = avg * y_mean;
            let (mut stiff, mut soft) = (0.0, 0.0);
            if t.component < 2 {
                moment[t.component] = first * y_mean;
            } else {
                stiff = avg * y_stiff;
                soft = avg * y_soft;
            }
            TermFunctional { mean, moment, stiff, soft }
        })
        .collect())
}
