//! Eigenproblems of the soft inclusion: Bloch spectra, weighted means, classification and the strip bottom.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::cell::{assemble_bfs_h2, assemble_vector_h1, CellOperator, CellSpace, Parity, Restriction};
use crate::fem::eig::{eigs_smallest, hermitian_eigenvalues, EigOptions};
use crate::fem::forms::{assemble_h1_cross, assemble_h1_load, assemble_h2_load, dmat3, dmat6, GradKind};
use crate::fem::sparse::{dot, SparseMatrix};
use crate::fem::ElementSpec;
use crate::geometry::CellMesh;
use crate::tensor::{reduced_tensor, MaterialSpec};

/// Relative eigenvalue gap below which eigenvalues form one cluster.
pub const CLUSTER_GAP: f64 = 1e-6;
/// Weighted means at most this multiple of `⟨ρ0⟩` count as zero.
pub const MEAN_ZERO_TOL: f64 = 1e-7;

/// Inclusion operator whose spectrum is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorTag {
    /// Full operator on `I × Y0` with scaled gradient, finite `delta`.
    FullDelta {
        /// Thickness-to-period ratio.
        delta: f64,
    },
    /// Restriction to the membrane parity class, finite `delta`.
    MembDelta {
        /// Thickness-to-period ratio.
        delta: f64,
    },
    /// Restriction to the bending parity class, finite `delta`.
    BendDelta {
        /// Thickness-to-period ratio.
        delta: f64,
    },
    /// Planar membrane operator with the reduced soft tensor.
    MembDelta0,
    /// Biharmonic operator with `C0^r / 12` on `H²0(Y0)`.
    BendDelta0,
    /// Membrane-tracked operator `sym ι(∇_y u)` on three-component fields.
    MembDeltaInf,
    /// Operator `sym ι(∇_y u)` on three-component fields, all components tracked.
    FullDeltaInf,
}

impl OperatorTag {
    /// Components whose weighted means define coupling.
    pub fn tracked(&self) -> Vec<usize> {
        match self {
            OperatorTag::FullDelta { .. } | OperatorTag::FullDeltaInf => vec![0, 1, 2],
            OperatorTag::MembDelta { .. } | OperatorTag::MembDelta0 | OperatorTag::MembDeltaInf => vec![0, 1],
            OperatorTag::BendDelta { .. } => vec![2],
            OperatorTag::BendDelta0 => vec![0],
        }
    }

    /// Whether the operator lives on the prism `I × Y0`.
    pub fn is_prism(&self) -> bool {
        matches!(
            self,
            OperatorTag::FullDelta { .. } | OperatorTag::MembDelta { .. } | OperatorTag::BendDelta { .. }
        )
    }

    fn parity(&self) -> Parity {
        match self {
            OperatorTag::MembDelta { .. } => Parity::Membrane,
            OperatorTag::BendDelta { .. } => Parity::Bending,
            _ => Parity::Full,
        }
    }

    fn delta(&self) -> Option<f64> {
        match self {
            OperatorTag::FullDelta { delta } | OperatorTag::MembDelta { delta } | OperatorTag::BendDelta { delta } => {
                Some(*delta)
            }
            _ => None,
        }
    }
}

/// Whether an inclusion eigenvalue produces a pole of the Zhikov function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeClass {
    /// Some eigenfunction has nonzero weighted mean in a tracked component.
    Coupled,
    /// All eigenfunctions have zero weighted mean in the tracked components.
    Uncoupled,
}

/// Eigenpairs of an inclusion operator with weighted means and classification.
#[derive(Debug, Clone)]
pub struct BlochSpectrum {
    /// Operator.
    pub tag: OperatorTag,
    /// Eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// `M`-orthonormal eigenvectors in the unknowns of `operator`.
    pub modes: Vec<Vec<f64>>,
    /// Per mode, `∫ ρ0 φ_i` over the whole inclusion for every field component.
    pub weighted_means: Vec<Vec<f64>>,
    /// Tracked components.
    pub tracked: Vec<usize>,
    /// Per eigenvalue, coupled or uncoupled with respect to the tracked components.
    pub classification: Vec<ModeClass>,
    /// `⟨ρ0⟩ = ρ0 |Y0|`.
    pub rho0_mean: f64,
    /// `⟨ρ⟩ = ρ1 |Y1| + ρ0 |Y0|`.
    pub rho_mean: f64,
    /// `⟨ρ1⟩ = ρ1 |Y1|`.
    pub rho1_mean: f64,
    /// Discretized operator.
    pub operator: CellOperator,
    /// Mesh the operator lives on (the half prism for parity classes).
    pub mesh: CellMesh,
    /// Mean loads `∫ ρ0 e_i · φ_a` for every component.
    pub mean_loads: Vec<Vec<f64>>,
    /// Factor converting unknown-vector integrals to whole-inclusion integrals of normalized modes.
    pub mode_scale: f64,
}

/// Serializable summary of a spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Operator.
    pub tag: OperatorTag,
    /// Eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Classes.
    pub classification: Vec<ModeClass>,
    /// Weighted means.
    pub weighted_means: Vec<Vec<f64>>,
    /// `⟨ρ0⟩`.
    pub rho0_mean: f64,
    /// `⟨ρ⟩`.
    pub rho_mean: f64,
}

impl BlochSpectrum {
    /// Number of computed modes.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Whether no modes were computed.
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Weighted-mean vector of mode `n` restricted to the tracked components.
    pub fn tracked_mean(&self, n: usize) -> Vec<f64> {
        self.tracked.iter().map(|&c| self.weighted_means[n][c]).collect()
    }

    /// Partial sum `S_N = Σ_{n<N} m_n m_nᵀ` over the tracked components.
    pub fn gram(&self, count: usize) -> DMatrix<f64> {
        let k = self.tracked.len();
        let mut s = DMatrix::zeros(k, k);
        for n in 0..count.min(self.len()) {
            let m = nalgebra::DVector::from_vec(self.tracked_mean(n));
            s += &m * m.transpose();
        }
        s
    }

    /// `1 − trace(S_N) / trace(⟨ρ0⟩ I)`.
    pub fn completeness_deficit(&self, count: usize) -> f64 {
        1.0 - self.gram(count).trace() / (self.rho0_mean * self.tracked.len() as f64)
    }

    /// Sum over all discrete modes, `l_iᵀ M⁻¹ l_j`, the discrete limit of the partial sums.
    pub fn discrete_completeness(&self) -> Result<DMatrix<f64>> {
        let f = crate::fem::Factor::cholesky(&self.operator.pair.m)?;
        let k = self.tracked.len();
        let s2 = self.mode_scale * self.mode_scale;
        Ok(DMatrix::from_fn(k, k, |i, j| {
            let li = &self.mean_loads[self.tracked[i]];
            let lj = &self.mean_loads[self.tracked[j]];
            s2 * dot(li, &f.solve(lj))
        }))
    }

    /// Coupled eigenvalues with their tracked weighted means.
    pub fn poles(&self) -> Vec<(f64, Vec<f64>)> {
        (0..self.len())
            .filter(|&n| self.classification[n] == ModeClass::Coupled)
            .map(|n| (self.eigenvalues[n], self.tracked_mean(n)))
            .collect()
    }

    /// Distinct uncoupled eigenvalues.
    pub fn uncoupled_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for n in 0..self.len() {
            if self.classification[n] == ModeClass::Uncoupled {
                let v = self.eigenvalues[n];
                if out.last().is_none_or(|&l| (v - l).abs() > CLUSTER_GAP * v.abs()) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Integrals `∫ f · φ_n` of a body load over the whole inclusion for every mode.
    ///
    /// For parity classes the load is integrated over both halves using the parity of the modes.
    pub fn project(&self, force: &(dyn Fn([f64; 3]) -> Vec<f64> + Sync)) -> Vec<f64> {
        let v = self.load_vector(force);
        self.modes.iter().map(|m| self.mode_scale * dot(&v, m)).collect()
    }

    fn load_vector(&self, force: &(dyn Fn([f64; 3]) -> Vec<f64> + Sync)) -> Vec<f64> {
        inclusion_load(&self.operator, self.tag, force)
    }

    /// Serializable summary.
    pub fn report(&self) -> SpectrumReport {
        SpectrumReport {
            tag: self.tag,
            eigenvalues: self.eigenvalues.clone(),
            classification: self.classification.clone(),
            weighted_means: self.weighted_means.clone(),
            rho0_mean: self.rho0_mean,
            rho_mean: self.rho_mean,
        }
    }
}

/// Load vector `∫ f · φ_a` of a body load on the unknowns of an inclusion operator.
///
/// For parity classes the load is folded onto the half prism using the parity of the class.
pub fn inclusion_load(op: &CellOperator, tag: OperatorTag, force: &(dyn Fn([f64; 3]) -> Vec<f64> + Sync)) -> Vec<f64> {
    match tag {
        OperatorTag::BendDelta0 => {
            assemble_h2_load(&op.elements, &op.dofs, &|_, x| (force([x[0], x[1], 0.0])[0], [0.0, 0.0]))
        }
        OperatorTag::MembDelta0 => {
            assemble_h1_load(&op.elements, &op.dofs, GradKind::Planar, &|_, x| force(x))
        }
        OperatorTag::MembDelta { delta } | OperatorTag::BendDelta { delta } => {
            let odd: &[usize] = if matches!(tag, OperatorTag::MembDelta { .. }) { &[2] } else { &[0, 1] };
            let kind = GradKind::Scaled3d { transverse_scale: 1.0 / delta };
            assemble_h1_load(&op.elements, &op.dofs, kind, &|_, x| {
                let up = force(x);
                let down = force([x[0], x[1], -x[2]]);
                (0..3)
                    .map(|c| if odd.contains(&c) { up[c] - down[c] } else { up[c] + down[c] })
                    .collect()
            })
        }
        OperatorTag::FullDelta { delta } => {
            let kind = GradKind::Scaled3d { transverse_scale: 1.0 / delta };
            assemble_h1_load(&op.elements, &op.dofs, kind, &|_, x| force(x))
        }
        OperatorTag::MembDeltaInf | OperatorTag::FullDeltaInf => {
            assemble_h1_load(&op.elements, &op.dofs, GradKind::IotaGrad, &|_, x| force(x))
        }
    }
}

/// Assembles the discretized inclusion operator of a tag.
pub fn inclusion_operator(mat: &MaterialSpec, mesh: &CellMesh, tag: OperatorTag) -> Result<(CellOperator, CellMesh)> {
    if let Some(delta) = tag.delta() {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta = {delta} must be positive and finite")));
        }
    }
    if tag.is_prism() != (mesh.dim == 3) {
        return Err(Error::Config("mesh dimension does not match the inclusion operator".into()));
    }
    if mesh.soft_count() == 0 {
        return Err(Error::Geometry("inclusion is empty".into()));
    }
    let rho0 = mat.rho0;
    let op_mesh = match tag {
        OperatorTag::MembDelta { .. } | OperatorTag::BendDelta { .. } => mesh.half_prism()?,
        _ => mesh.clone(),
    };
    let op = match tag {
        OperatorTag::FullDelta { delta } | OperatorTag::MembDelta { delta } | OperatorTag::BendDelta { delta } => {
            let c = dmat6(&mat.c0);
            assemble_vector_h1(
                &op_mesh,
                GradKind::Scaled3d { transverse_scale: 1.0 / delta },
                CellSpace::ZeroTrace,
                Restriction::Soft,
                tag.parity(),
                &|_| c.clone(),
                &|_| rho0,
            )?
        }
        OperatorTag::MembDelta0 => {
            let d = dmat3(&reduced_tensor(&mat.c0)?);
            assemble_vector_h1(
                &op_mesh,
                GradKind::Planar,
                CellSpace::ZeroTrace,
                Restriction::Soft,
                Parity::Full,
                &|_| d.clone(),
                &|_| rho0,
            )?
        }
        OperatorTag::BendDelta0 => {
            let d = reduced_tensor(&mat.c0)? / 12.0;
            assemble_bfs_h2(&op_mesh, CellSpace::ZeroTrace, Restriction::Soft, &|_| d, &|_| rho0)?
        }
        OperatorTag::MembDeltaInf | OperatorTag::FullDeltaInf => {
            let c = dmat6(&mat.c0);
            assemble_vector_h1(
                &op_mesh,
                GradKind::IotaGrad,
                CellSpace::ZeroTrace,
                Restriction::Soft,
                Parity::Full,
                &|_| c.clone(),
                &|_| rho0,
            )?
        }
    };
    Ok((op, op_mesh))
}

/// Groups ascending eigenvalues into clusters of relative gap below [`CLUSTER_GAP`].
pub fn clusters(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || (values[i] - values[i - 1]).abs() > CLUSTER_GAP * values[i].abs().max(1e-300);
        if split {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Classifies eigenvalue clusters by the tracked weighted means.
pub fn classify(values: &[f64], means: &[Vec<f64>], tracked: &[usize], rho0_mean: f64) -> Vec<ModeClass> {
    let mut out = vec![ModeClass::Uncoupled; values.len()];
    for r in clusters(values) {
        let coupled = r
            .clone()
            .any(|n| tracked.iter().any(|&c| means[n][c].abs() > MEAN_ZERO_TOL * rho0_mean));
        if coupled {
            for n in r {
                out[n] = ModeClass::Coupled;
            }
        }
    }
    out
}

/// The `n_modes` lowest eigenpairs of an inclusion operator with weighted means and classes.
pub fn bloch_spectrum(
    mat: &MaterialSpec,
    mesh: &CellMesh,
    tag: OperatorTag,
    n_modes: usize,
    opts: &EigOptions,
) -> Result<BlochSpectrum> {
    if n_modes == 0 {
        return Err(Error::Config("at least one mode must be requested".into()));
    }
    let (op, op_mesh) = inclusion_operator(mat, mesh, tag)?;
    if n_modes > op.pair.ndof() {
        return Err(Error::Config(format!(
            "{n_modes} modes requested, the inclusion space has {} unknowns",
            op.pair.ndof()
        )));
    }
    let eig = eigs_smallest(&op.pair.k, &op.pair.m, n_modes, opts)?;
    let rho0 = mat.rho0;
    let ncomp = op.dofs.ncomp;
    let mean_loads: Vec<Vec<f64>> = if tag == OperatorTag::BendDelta0 {
        vec![assemble_h2_load(&op.elements, &op.dofs, &|_, _| (rho0, [0.0, 0.0]))]
    } else {
        let kind = match tag {
            OperatorTag::MembDelta0 => GradKind::Planar,
            OperatorTag::MembDeltaInf | OperatorTag::FullDeltaInf => GradKind::IotaGrad,
            _ => GradKind::Scaled3d { transverse_scale: 1.0 },
        };
        (0..ncomp)
            .map(|c| {
                assemble_h1_load(&op.elements, &op.dofs, kind, &move |_: &ElementSpec, _| {
                    let mut f = vec![0.0; ncomp];
                    f[c] = rho0;
                    f
                })
            })
            .collect()
    };
    let half = matches!(tag, OperatorTag::MembDelta { .. } | OperatorTag::BendDelta { .. });
    let mode_scale = if half { 2f64.sqrt() } else { 1.0 };
    let odd: Vec<usize> = match tag {
        OperatorTag::MembDelta { .. } => vec![2],
        OperatorTag::BendDelta { .. } => vec![0, 1],
        _ => vec![],
    };
    let weighted_means: Vec<Vec<f64>> = eig
        .vectors
        .par_iter()
        .map(|v| {
            (0..mean_loads.len())
                .map(|c| if odd.contains(&c) { 0.0 } else { mode_scale * dot(&mean_loads[c], v) })
                .collect()
        })
        .collect();
    let soft = mesh.soft_fraction();
    let rho0_mean = rho0 * soft;
    let rho1_mean = mat.rho1 * (1.0 - soft);
    let tracked = tag.tracked();
    let classification = classify(&eig.values, &weighted_means, &tracked, rho0_mean);
    Ok(BlochSpectrum {
        tag,
        eigenvalues: eig.values,
        modes: eig.vectors,
        weighted_means,
        tracked,
        classification,
        rho0_mean,
        rho_mean: rho0_mean + rho1_mean,
        rho1_mean,
        operator: op,
        mesh: op_mesh,
        mean_loads,
        mode_scale,
    })
}

/// Lowest eigenvalue curve of the strip sections and its minimum `m0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripCurve {
    /// Frequencies `η` of the grid.
    pub eta: Vec<f64>,
    /// `α1^η` on the grid.
    pub alpha1: Vec<f64>,
    /// Bottom of the strip spectrum after refinement.
    pub m0: f64,
    /// Minimizing `η`.
    pub eta_min: f64,
}

/// Parts `Kgg + η² Ktt + iη (Kgt − Kgtᵀ)` of the strip section form on `H¹0(Y0; C³)`.
pub struct StripForms {
    kgg: SparseMatrix,
    ktt: SparseMatrix,
    skew: SparseMatrix,
    m: SparseMatrix,
}

impl StripForms {
    /// Assembles the parts on the planar inclusion mesh.
    pub fn new(mat: &MaterialSpec, mesh2d: &CellMesh) -> Result<Self> {
        if mesh2d.dim != 2 {
            return Err(Error::Config("strip sections require a planar mesh".into()));
        }
        let c = dmat6(&mat.c0);
        let rho0 = mat.rho0;
        let op = assemble_vector_h1(
            mesh2d,
            GradKind::IotaGrad,
            CellSpace::ZeroTrace,
            Restriction::Soft,
            Parity::Full,
            &|_| c.clone(),
            &|_| rho0,
        )?;
        let ktt = assemble_h1_cross(&op.elements, &op.dofs, GradKind::TransverseValue, GradKind::TransverseValue, &|_| {
            c.clone()
        })?;
        let kgt = assemble_h1_cross(&op.elements, &op.dofs, GradKind::IotaGrad, GradKind::TransverseValue, &|_| c.clone())?;
        let skew = SparseMatrix::lin_comb(1.0, &kgt, -1.0, &kgt.transpose())?;
        Ok(Self {
            kgg: op.pair.k,
            ktt,
            skew,
            m: op.pair.m,
        })
    }

    /// `α1^η`, the lowest eigenvalue of the section at frequency `η`.
    pub fn alpha1(&self, eta: f64, opts: &EigOptions) -> Result<f64> {
        let kr = SparseMatrix::lin_comb(1.0, &self.kgg, eta * eta, &self.ktt)?;
        let ki = self.skew.scaled(eta);
        Ok(hermitian_eigenvalues(&kr, &ki, &self.m, 1, opts)?[0])
    }
}

/// Uniform grid of `points` frequencies on `[0, eta_max]`.
pub fn eta_grid(points: usize, eta_max: f64) -> Vec<f64> {
    if points < 2 {
        return vec![0.0; points];
    }
    (0..points).map(|i| eta_max * i as f64 / (points - 1) as f64).collect()
}

/// `α1^η` over the grid and `m0` refined by golden-section search around the grid minimizer.
pub fn strip_bottom_m0(mat: &MaterialSpec, mesh2d: &CellMesh, eta: &[f64], opts: &EigOptions) -> Result<StripCurve> {
    if eta.is_empty() {
        return Err(Error::Config("empty frequency grid".into()));
    }
    let forms = StripForms::new(mat, mesh2d)?;
    let alpha1: Vec<f64> = eta.par_iter().map(|&e| forms.alpha1(e, opts)).collect::<Result<_>>()?;
    let (imin, &amin) = alpha1
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    let mut a = eta[imin.saturating_sub(1)];
    let mut b = eta[(imin + 1).min(eta.len() - 1)];
    let (mut m0, mut eta_min) = (amin, eta[imin]);
    if b > a {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = forms.alpha1(x1, opts)?;
        let mut f2 = forms.alpha1(x2, opts)?;
        for _ in 0..40 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = forms.alpha1(x1, opts)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = forms.alpha1(x2, opts)?;
            }
            if (b - a) <= 1e-8 * (1.0 + b.abs()) {
                break;
            }
        }
        let (xb, fb) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if fb < m0 {
            m0 = fb;
            eta_min = xb;
        }
    }
    Ok(StripCurve {
        eta: eta.to_vec(),
        alpha1,
        m0,
        eta_min,
    })
}
