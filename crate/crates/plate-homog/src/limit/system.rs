//! Assembly of the coupled macro–micro system, load vectors, resolvent solves and reconstructed states.

use serde::Serialize;

use super::{
    compute_load_functional, transverse_moment, LoadSpec, LoadTerm, Regime, RegimeConfig, ScaleLimit, TermFunctional,
};
use crate::effective::{effective_delta, effective_delta0, effective_deltainf, EffectiveTensor, TensorRegime};
use crate::error::{Error, Result};
use crate::fem::cell::{assemble_bfs_h2, CellOperator, CellSpace, Restriction};
use crate::fem::eig::EigOptions;
use crate::fem::forms::{assemble_h1_load, assemble_h2_load, ElementSpec, GradKind};
use crate::fem::sparse::{dot, Factor, SparseMatrix};
use crate::fem::DofMap;
use crate::geometry::{CellMesh, MacroMesh};
use crate::inclusion::{bloch_spectrum, inclusion_load, inclusion_operator, BlochSpectrum, OperatorTag};
use crate::macro_plate::{
    bending_dofs, field_mass, free_bending_dofs, free_membrane_dofs, macro_elements, membrane_dofs, MacroKind,
    MacroOperator,
};
use crate::tensor::{reduced_tensor, MaterialSpec};

/// Element family of the mid-plane fields of a regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Bilinear Lagrange elements, one value per node.
    Nodal,
    /// Bogner–Fox–Schmit elements, four values per node.
    Hermite,
}

impl Family {
    /// Values per node of a scalar field.
    pub fn per_node(&self) -> usize {
        match self {
            Family::Nodal => 1,
            Family::Hermite => 4,
        }
    }
}

/// Meaning of a field of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    /// In-plane displacement `𝔞`.
    Membrane,
    /// Transverse displacement `𝔟`.
    Bending,
    /// Average of the transverse displacement over the matrix.
    StiffMean,
    /// Average of the transverse displacement over the inclusion.
    SoftMean,
    /// Coefficient field of one inclusion mode.
    Micro(usize),
}

/// One field of the coupled system and its position in the unknown vector.
#[derive(Debug, Clone)]
pub struct FieldBlock {
    /// Meaning.
    pub role: FieldRole,
    /// Components (each a scalar field of the regime family).
    pub ncomp: usize,
    /// Numbering with `(node, comp · per_node + local)` keys.
    pub dofs: DofMap,
    /// First unknown of the field.
    pub offset: usize,
}

impl FieldBlock {
    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.dofs.ndof
    }

    /// Whether the field has no unknowns.
    pub fn is_empty(&self) -> bool {
        self.dofs.ndof == 0
    }

    pub(crate) fn index(&self, q: usize, node: usize, comp: usize, local: usize) -> Option<usize> {
        self.dofs.dof(node, comp * q + local).map(|d| d + self.offset)
    }

    fn slice<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.offset..self.offset + self.len()]
    }
}

/// Mass coupling between a macro field component and one component of the inclusion modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coupling {
    /// Index of the macro field.
    pub field: usize,
    /// Component of the macro field.
    pub comp: usize,
    /// Component of the modal weighted mean.
    pub mode_comp: usize,
}

/// Inputs of a limit problem.
#[derive(Debug, Clone)]
pub struct LimitInputs<'a> {
    /// Requested regime.
    pub regime: RegimeConfig,
    /// Materials.
    pub material: &'a MaterialSpec,
    /// Cell mesh, three-dimensional for finite `delta`, planar otherwise.
    pub cell: &'a CellMesh,
    /// Mid-plane mesh.
    pub macro_mesh: &'a MacroMesh,
    /// Inclusion modes kept in the modal representation.
    pub modes: usize,
    /// Eigensolver settings.
    pub eig: EigOptions,
}

struct StaticMicro {
    tag: OperatorTag,
    op: CellOperator,
    factor: Factor,
}

struct CellBending {
    op: CellOperator,
    ones: Vec<f64>,
    area: f64,
}

/// Discretized limit problem: `M ẍ + K x = F` on the dynamic fields plus static reconstructions.
pub struct LimitProblem {
    /// Regime row.
    pub regime: Regime,
    /// Effective tensor of the stiff matrix.
    pub tensor: EffectiveTensor,
    /// Macroscopic operator of the first field.
    pub macro_op: MacroOperator,
    /// Inclusion modes of the dynamic micro field.
    pub spectrum: Option<BlochSpectrum>,
    /// Element family of all mid-plane fields.
    pub family: Family,
    /// Fields, macro fields first.
    pub fields: Vec<FieldBlock>,
    /// Mass couplings between macro fields and inclusion modes.
    pub couplings: Vec<Coupling>,
    /// Number of macro unknowns (they precede the modal unknowns).
    pub macro_len: usize,
    /// Stiffness of the coupled system.
    pub k: SparseMatrix,
    /// Mass of the coupled system.
    pub m: SparseMatrix,
    /// Unit mass of an unconstrained scalar field of the family.
    pub scalar_mass: SparseMatrix,
    /// `⟨ρ⟩`.
    pub rho_mean: f64,
    /// `⟨ρ0⟩`.
    pub rho0_mean: f64,
    /// `⟨ρ1⟩`.
    pub rho1_mean: f64,
    /// Inclusion area fraction of the cell mesh.
    pub soft_fraction: f64,
    statics: Option<StaticMicro>,
    cell_bending: Option<CellBending>,
}

/// Discrete data of one load term.
#[derive(Debug, Clone)]
pub struct TermLoad {
    /// The term.
    pub term: LoadTerm,
    /// Its cell and transverse moments.
    pub functional: TermFunctional,
    /// Right-hand side of the coupled system for unit time profile.
    pub dynamic: Vec<f64>,
    /// Membrane load on the membrane unknowns, when the membrane field is quasistatic.
    pub membrane: Option<Vec<f64>>,
    /// Quasistatic inclusion field for unit macro profile, on the static inclusion unknowns.
    pub static_cell: Option<Vec<f64>>,
    /// Load of the matrix-phase bending cell problem.
    pub cell_load: Option<Vec<f64>>,
    /// Macro profile at the mid-plane nodes.
    pub nodal_profile: Vec<f64>,
}

/// Reconstructed limit fields at one resolvent parameter or time.
#[derive(Debug, Clone, Serialize)]
pub struct LimitState {
    /// Regime row.
    pub regime: Regime,
    /// Resolvent parameter, when produced by a resolvent solve.
    pub lambda: Option<f64>,
    /// Time, when produced by an evolution.
    pub time: Option<f64>,
    /// Element family of the mid-plane fields.
    pub family: Family,
    /// `𝔞` at the nodes, two values per node.
    pub membrane: Option<Vec<f64>>,
    /// `𝔟` at the nodes with `per_node` values per node.
    pub bending: Option<Vec<f64>>,
    /// Matrix-phase average of the transverse displacement at the nodes.
    pub stiff_mean: Option<Vec<f64>>,
    /// Inclusion-phase average of the transverse displacement at the nodes.
    pub soft_mean: Option<Vec<f64>>,
    /// Per inclusion mode, the coefficient field at the nodes.
    pub micro: Vec<Vec<f64>>,
    /// Per load term, the quasistatic inclusion field for the term's macro profile.
    pub static_micro: Vec<Vec<f64>>,
    /// Per load term, the matrix-phase bending cell field for the term's macro profile.
    pub cell_bending: Vec<Vec<f64>>,
    /// Unknowns of the coupled system.
    pub dynamic: Vec<f64>,
}

fn scalar_dofs(mesh: &MacroMesh, q: usize) -> DofMap {
    DofMap::build(mesh.num_nodes(), q, |v| v, |_, _| false)
}

fn scalar_mass(mesh: &MacroMesh, family: Family) -> Result<SparseMatrix> {
    match family {
        Family::Hermite => field_mass(mesh, &free_bending_dofs(mesh), 1.0),
        Family::Nodal => {
            let m = field_mass(mesh, &free_membrane_dofs(mesh), 1.0)?;
            let trip: Vec<_> = m
                .triplets()
                .into_iter()
                .filter(|&(i, j, _)| i % 2 == 0 && j % 2 == 0)
                .map(|(i, j, v)| (i / 2, j / 2, v))
                .collect();
            let n = mesh.num_nodes();
            SparseMatrix::from_triplets(n, n, &trip)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn push_mass(
    ms: &[(usize, usize, f64)],
    q: usize,
    a: &FieldBlock,
    ca: usize,
    b: &FieldBlock,
    cb: usize,
    w: f64,
    symmetric: bool,
    out: &mut Vec<(usize, usize, f64)>,
) {
    for &(i, j, v) in ms {
        if let (Some(r), Some(c)) = (a.index(q, i / q, ca, i % q), b.index(q, j / q, cb, j % q)) {
            out.push((r, c, w * v));
            if symmetric {
                out.push((c, r, w * v));
            }
        }
    }
}

/// Nodal values of a scalar field given with `q` values per node.
fn nodal_values(x: &[f64], q: usize) -> Vec<f64> {
    x.iter().step_by(q).copied().collect()
}

impl LimitProblem {
    /// Computes tensors and inclusion modes and assembles the coupled system.
    pub fn new(inp: &LimitInputs) -> Result<Self> {
        let regime = inp.regime.validate()?;
        let cell = inp.cell;
        let mesh = inp.macro_mesh;
        let mat = inp.material;
        if cell.dim != regime.cell_dim() {
            return Err(Error::Config(format!(
                "regime needs a {}-dimensional cell mesh, got {}",
                regime.cell_dim(),
                cell.dim
            )));
        }
        if regime.micro_tag().is_some() && inp.modes == 0 {
            return Err(Error::Config("at least one inclusion mode is needed".into()));
        }
        let tensor = match regime.tensor_regime() {
            TensorRegime::DeltaFinite { delta } => effective_delta(mat, cell, delta)?,
            TensorRegime::DeltaZero => effective_delta0(mat, cell)?,
            TensorRegime::DeltaInfty => effective_deltainf(mat, cell)?,
        };
        let soft_fraction = cell.soft_fraction();
        let rho0_mean = mat.rho0 * soft_fraction;
        let rho1_mean = mat.rho1 * (1.0 - soft_fraction);
        let rho_mean = rho0_mean + rho1_mean;
        let kind = match regime {
            Regime::BendingDelta { .. } | Regime::StrongBendingDelta { .. } => MacroKind::BendCoupled,
            Regime::BendingZero | Regime::StrongBendingInfinite => MacroKind::BendDecoupled,
            _ => MacroKind::Memb,
        };
        let macro_op = MacroOperator::new(kind, mesh, &tensor, rho_mean)?;
        let spectrum = match regime.micro_tag() {
            Some(tag) => Some(bloch_spectrum(mat, cell, tag, inp.modes, &inp.eig)?),
            None => None,
        };
        let family = if kind == MacroKind::Memb { Family::Nodal } else { Family::Hermite };
        let q = family.per_node();

        let mut fields: Vec<FieldBlock> = Vec::new();
        let mut offset = 0;
        let mut push = |role, ncomp, dofs: DofMap| {
            let len = dofs.ndof;
            fields.push(FieldBlock { role, ncomp, dofs, offset });
            offset += len;
        };
        match regime {
            Regime::BendingDelta { .. }
            | Regime::StrongBendingDelta { .. }
            | Regime::BendingZero
            | Regime::StrongBendingInfinite => push(FieldRole::Bending, 1, bending_dofs(mesh)),
            Regime::RealTimeDelta { .. } | Regime::RealTimeInfinite => {
                push(FieldRole::Membrane, 2, membrane_dofs(mesh));
                push(FieldRole::Bending, 1, scalar_dofs(mesh, 1));
            }
            Regime::RealTimeZero { kappa } => {
                push(FieldRole::Membrane, 2, membrane_dofs(mesh));
                if !matches!(kappa, ScaleLimit::Finite(_)) {
                    push(FieldRole::StiffMean, 1, scalar_dofs(mesh, 1));
                }
                push(FieldRole::SoftMean, 1, scalar_dofs(mesh, 1));
            }
        }
        let macro_len: usize = fields.iter().map(|f| f.len()).sum();
        if let Some(sp) = &spectrum {
            for n in 0..sp.len() {
                let f = scalar_dofs(mesh, q);
                fields.push(FieldBlock { role: FieldRole::Micro(n), ncomp: 1, offset: macro_len + n * f.ndof, dofs: f });
            }
        }
        let ndof: usize = fields.iter().map(|f| f.len()).sum();
        let c = |field, comp, mode_comp| Coupling { field, comp, mode_comp };
        let couplings = match regime {
            Regime::BendingDelta { .. } => vec![],
            Regime::RealTimeDelta { .. } | Regime::RealTimeInfinite => vec![c(0, 0, 0), c(0, 1, 1), c(1, 0, 2)],
            Regime::StrongBendingDelta { .. } | Regime::StrongBendingInfinite => vec![c(0, 0, 2)],
            Regime::RealTimeZero { .. } => vec![c(0, 0, 0), c(0, 1, 1)],
            Regime::BendingZero => vec![c(0, 0, 0)],
        };

        let ms = scalar_mass(mesh, family)?;
        let ms_t = ms.triplets();
        let mut kt = macro_op.k.triplets();
        let mut mt = Vec::new();
        for f in &fields {
            let w = match f.role {
                FieldRole::Membrane | FieldRole::Bending => rho_mean,
                FieldRole::StiffMean => rho1_mean,
                FieldRole::SoftMean => rho0_mean,
                FieldRole::Micro(n) => {
                    let eta = spectrum.as_ref().map(|s| s.eigenvalues[n]).unwrap_or(0.0);
                    push_mass(&ms_t, q, f, 0, f, 0, eta, false, &mut kt);
                    1.0
                }
            };
            for comp in 0..f.ncomp {
                push_mass(&ms_t, q, f, comp, f, comp, w, false, &mut mt);
            }
        }
        if let Some(sp) = &spectrum {
            for f in fields.iter().filter(|f| matches!(f.role, FieldRole::Micro(_))) {
                let FieldRole::Micro(n) = f.role else { continue };
                for cp in &couplings {
                    let w = sp.weighted_means[n][cp.mode_comp];
                    if w != 0.0 {
                        push_mass(&ms_t, q, &fields[cp.field], cp.comp, f, 0, w, true, &mut mt);
                    }
                }
            }
        }
        let k = SparseMatrix::from_triplets(ndof, ndof, &kt)?;
        let m = SparseMatrix::from_triplets(ndof, ndof, &mt)?;

        let statics = match regime.static_tag() {
            Some(tag) => {
                let (op, _) = inclusion_operator(mat, cell, tag)?;
                let factor = Factor::cholesky(&op.pair.k)?;
                Some(StaticMicro { tag, op, factor })
            }
            None => None,
        };
        let cell_bending = match regime {
            Regime::RealTimeZero { kappa: ScaleLimit::Finite(kappa) } => {
                let d = reduced_tensor(&mat.c1)? * (kappa * kappa / 12.0);
                let rho1 = mat.rho1;
                let op = assemble_bfs_h2(cell, CellSpace::Periodic, Restriction::Stiff, &|_| d, &|_| rho1)?;
                let ones = assemble_h2_load(&op.elements, &op.dofs, &|_, _| (1.0, [0.0, 0.0]));
                Some(CellBending { op, ones, area: 1.0 - soft_fraction })
            }
            _ => None,
        };
        Ok(Self {
            regime,
            tensor,
            macro_op,
            spectrum,
            family,
            fields,
            couplings,
            macro_len,
            k,
            m,
            scalar_mass: ms,
            rho_mean,
            rho0_mean,
            rho1_mean,
            soft_fraction,
            statics,
            cell_bending,
        })
    }

    /// Number of unknowns of the coupled system.
    pub fn ndof(&self) -> usize {
        self.k.nrows()
    }

    /// Mid-plane mesh.
    pub fn mesh(&self) -> &MacroMesh {
        &self.macro_op.mesh
    }

    /// Number of inclusion modes in the coupled system.
    pub fn modes(&self) -> usize {
        self.spectrum.as_ref().map(|s| s.len()).unwrap_or(0)
    }

    /// Whether the regime carries a matrix-phase bending cell problem.
    pub fn has_cell_bending(&self) -> bool {
        self.cell_bending.is_some()
    }

    /// Stiffness and mass of the matrix-phase bending cell problem.
    pub fn cell_pair(&self) -> Option<(&SparseMatrix, &SparseMatrix)> {
        self.cell_bending.as_ref().map(|c| (&c.op.pair.k, &c.op.pair.m))
    }

    /// Field of the given role.
    pub fn field(&self, role: FieldRole) -> Option<&FieldBlock> {
        self.fields.iter().find(|f| f.role == role)
    }

    fn elements(&self) -> Vec<ElementSpec> {
        macro_elements(self.mesh())
    }

    /// `∫ (a P ψ + P g · ∇ψ)` for every basis function `ψ` of an unconstrained scalar field.
    fn scalar_load(&self, family: Family, term: &LoadTerm, a: f64, g: [f64; 2]) -> Vec<f64> {
        let mesh = self.mesh();
        let lengths = mesh.lengths;
        let profile = term.macro_profile;
        let elements = self.elements();
        match family {
            Family::Nodal => {
                let full = assemble_h1_load(&elements, &free_membrane_dofs(mesh), GradKind::Planar, &|_, x| {
                    vec![a * profile.eval([x[0], x[1]], lengths), 0.0]
                });
                full.into_iter().step_by(2).collect()
            }
            Family::Hermite => assemble_h2_load(&elements, &free_bending_dofs(mesh), &|_, x| {
                let p = profile.eval(x, lengths);
                (a * p, [g[0] * p, g[1] * p])
            }),
        }
    }

    fn scatter(&self, field: &FieldBlock, comp: usize, values: &[f64], scale: f64, out: &mut [f64]) {
        let q = self.family.per_node();
        for (s, &v) in values.iter().enumerate() {
            if let Some(i) = field.index(q, s / q, comp, s % q) {
                out[i] += scale * v;
            }
        }
    }

    /// Integrals of a load term against every inclusion mode.
    pub fn modal_projections(&self, term: &LoadTerm) -> Vec<f64> {
        let Some(sp) = &self.spectrum else { return Vec::new() };
        let c = term.component;
        let y = term.amplitude * term.cell_profile.value(true);
        let p = term.transverse_power as i32;
        let tbar = transverse_moment(term.transverse_power);
        let first = transverse_moment(term.transverse_power + 1);
        match sp.tag {
            OperatorTag::FullDelta { .. } => sp.project(&|x| {
                let mut f = vec![0.0; 3];
                f[c] = y * x[2].powi(p);
                f
            }),
            OperatorTag::MembDelta0 => {
                if c == 2 {
                    vec![0.0; sp.len()]
                } else {
                    sp.project(&|_| {
                        let mut f = vec![0.0; 2];
                        f[c] = y * tbar;
                        f
                    })
                }
            }
            OperatorTag::BendDelta0 => {
                let op = &sp.operator;
                let load = assemble_h2_load(&op.elements, &op.dofs, &|_, _| {
                    let mut g = [0.0; 2];
                    if c < 2 {
                        g[c] = -y * first;
                    }
                    (if c == 2 { y * tbar } else { 0.0 }, g)
                });
                sp.modes.iter().map(|m| sp.mode_scale * dot(&load, m)).collect()
            }
            _ => sp.project(&|_| {
                let mut f = vec![0.0; 3];
                f[c] = y * tbar;
                f
            }),
        }
    }

    /// Discrete right-hand sides and static cell fields of every load term.
    pub fn assemble_load(&self, load: &LoadSpec) -> Result<Vec<TermLoad>> {
        let functionals = compute_load_functional(load, self.soft_fraction)?;
        let mesh = self.mesh();
        let lengths = mesh.lengths;
        let n = self.ndof();
        load.terms
            .iter()
            .zip(functionals)
            .map(|(term, fl)| {
                let mut dynamic = vec![0.0; n];
                let nodal = self.scalar_load(Family::Nodal, term, 1.0, [0.0, 0.0]);
                let mut membrane = None;
                let main = &self.fields[0];
                match self.regime {
                    Regime::BendingDelta { .. } | Regime::BendingZero => {
                        let g = [-fl.moment[0], -fl.moment[1]];
                        let fb = self.scalar_load(Family::Hermite, term, fl.mean[2], g);
                        self.scatter(main, 0, &fb, 1.0, &mut dynamic);
                        if let Some(el) = &self.macro_op.elimination {
                            let mut fa = vec![0.0; el.dofs.ndof];
                            for (v, &val) in nodal.iter().enumerate() {
                                for c in 0..2 {
                                    if let Some(i) = el.dofs.dof(v, c) {
                                        fa[i] += fl.mean[c] * val;
                                    }
                                }
                            }
                            let shift = el.coupling.transpose().matvec(&el.factor.solve(&fa));
                            for (d, s) in dynamic.iter_mut().zip(&shift) {
                                *d -= s;
                            }
                            membrane = Some(fa);
                        }
                    }
                    Regime::StrongBendingDelta { .. } | Regime::StrongBendingInfinite => {
                        let fb = self.scalar_load(Family::Hermite, term, fl.mean[2], [0.0, 0.0]);
                        self.scatter(main, 0, &fb, 1.0, &mut dynamic);
                    }
                    Regime::RealTimeDelta { .. } | Regime::RealTimeInfinite | Regime::RealTimeZero { .. } => {
                        for c in 0..2 {
                            self.scatter(main, c, &nodal, fl.mean[c], &mut dynamic);
                        }
                        for f in &self.fields[1..] {
                            let w = match f.role {
                                FieldRole::Bending => fl.mean[2],
                                FieldRole::StiffMean => fl.stiff,
                                FieldRole::SoftMean => fl.soft,
                                _ => continue,
                            };
                            self.scatter(f, 0, &nodal, w, &mut dynamic);
                        }
                    }
                }
                if self.spectrum.is_some() {
                    let plain = self.scalar_load(self.family, term, 1.0, [0.0, 0.0]);
                    let pi = self.modal_projections(term);
                    for f in &self.fields {
                        if let FieldRole::Micro(k) = f.role {
                            self.scatter(f, 0, &plain, pi[k], &mut dynamic);
                        }
                    }
                }
                let static_cell = self.statics.as_ref().map(|st| self.static_solve(st, term));
                let cell_load = self.cell_bending.as_ref().map(|cb| {
                    let w = if term.component == 2 {
                        term.amplitude * transverse_moment(term.transverse_power) * term.cell_profile.value(false)
                    } else {
                        0.0
                    };
                    assemble_h2_load(&cb.op.elements, &cb.op.dofs, &|_, _| (w, [0.0, 0.0]))
                });
                let nodal_profile =
                    (0..mesh.num_nodes()).map(|v| term.macro_profile.eval(mesh.node_pos(v), lengths)).collect();
                Ok(TermLoad {
                    term: *term,
                    functional: fl,
                    dynamic,
                    membrane,
                    static_cell,
                    cell_load,
                    nodal_profile,
                })
            })
            .collect()
    }

    fn static_solve(&self, st: &StaticMicro, term: &LoadTerm) -> Vec<f64> {
        let c = term.component;
        let n = st.op.dofs.ndof;
        if c == 2 {
            return vec![0.0; n];
        }
        let y = term.amplitude * term.cell_profile.value(true);
        let p = term.transverse_power as i32;
        let tbar = transverse_moment(term.transverse_power);
        let load = match st.tag {
            OperatorTag::MembDelta0 => inclusion_load(&st.op, st.tag, &|_| {
                let mut f = vec![0.0; 2];
                f[c] = y * tbar;
                f
            }),
            _ => inclusion_load(&st.op, st.tag, &|x| {
                let mut f = vec![0.0; 3];
                f[c] = y * x[2].powi(p);
                f
            }),
        };
        st.factor.solve(&load)
    }

    /// Solves `(K + λ M) x = rhs` on the coupled system.
    pub fn resolve(&self, lambda: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda = {lambda} must be positive and finite")));
        }
        if rhs.len() != self.ndof() {
            return Err(Error::Config("right-hand side has the wrong length".into()));
        }
        let a = SparseMatrix::lin_comb(1.0, &self.k, lambda, &self.m)?;
        Ok(Factor::cholesky(&a)?.solve(rhs))
    }

    /// Solves the matrix-phase bending cell problem `(K1 + λ M1) B = L`.
    pub fn resolve_cell(&self, lambda: f64, load: &[f64]) -> Result<Vec<f64>> {
        let cb = self
            .cell_bending
            .as_ref()
            .ok_or_else(|| Error::Config("regime has no bending cell problem".into()))?;
        let a = SparseMatrix::lin_comb(1.0, &cb.op.pair.k, lambda, &cb.op.pair.m)?;
        Ok(Factor::cholesky(&a)?.solve(load))
    }

    /// Reconstructs all limit fields from the coupled unknowns.
    ///
    /// `scales` holds the time-profile value of every load term and `cells` the bending cell fields.
    pub fn state(
        &self,
        x: &[f64],
        loads: &[TermLoad],
        scales: &[f64],
        cells: Vec<Vec<f64>>,
        lambda: Option<f64>,
        time: Option<f64>,
    ) -> Result<LimitState> {
        let mesh = self.mesh();
        let nodes = mesh.num_nodes();
        let main = &self.fields[0];
        let main_part = main.slice(x);
        let membrane;
        let mut bending = None;
        let mut stiff_mean = None;
        let mut soft_mean = None;
        match self.regime {
            Regime::BendingDelta { .. } | Regime::StrongBendingDelta { .. } => {
                let el = self.macro_op.elimination.as_ref().expect("coupled operator carries the elimination");
                let mut rhs: Vec<f64> = el.coupling.matvec(main_part).into_iter().map(|v| -v).collect();
                if matches!(self.regime, Regime::BendingDelta { .. }) {
                    for (tl, &s) in loads.iter().zip(scales) {
                        if let Some(fa) = &tl.membrane {
                            for (r, f) in rhs.iter_mut().zip(fa) {
                                *r += s * f;
                            }
                        }
                    }
                }
                membrane = Some(el.dofs.expand(&el.factor.solve(&rhs)));
                bending = Some(main.dofs.expand(main_part));
            }
            Regime::BendingZero | Regime::StrongBendingInfinite => {
                membrane = Some(vec![0.0; 2 * nodes]);
                bending = Some(main.dofs.expand(main_part));
            }
            Regime::RealTimeDelta { .. } | Regime::RealTimeInfinite | Regime::RealTimeZero { .. } => {
                membrane = Some(main.dofs.expand(main_part));
                for f in &self.fields[1..] {
                    let v = f.dofs.expand(f.slice(x));
                    match f.role {
                        FieldRole::Bending => bending = Some(v),
                        FieldRole::StiffMean => stiff_mean = Some(v),
                        FieldRole::SoftMean => soft_mean = Some(v),
                        _ => {}
                    }
                }
            }
        }
        if let Some(cb) = &self.cell_bending {
            let mut sm = vec![0.0; nodes];
            for (tl, cell) in loads.iter().zip(&cells) {
                let avg = dot(&cb.ones, cell) / cb.area;
                for (s, p) in sm.iter_mut().zip(&tl.nodal_profile) {
                    *s += p * avg;
                }
            }
            stiff_mean = Some(sm);
        }
        let micro = self
            .fields
            .iter()
            .filter(|f| matches!(f.role, FieldRole::Micro(_)))
            .map(|f| f.dofs.expand(f.slice(x)))
            .collect();
        let static_micro = loads
            .iter()
            .zip(scales)
            .filter_map(|(tl, &s)| tl.static_cell.as_ref().map(|u| u.iter().map(|v| s * v).collect()))
            .collect();
        Ok(LimitState {
            regime: self.regime,
            lambda,
            time,
            family: self.family,
            membrane,
            bending,
            stiff_mean,
            soft_mean,
            micro,
            static_micro,
            cell_bending: cells,
            dynamic: x.to_vec(),
        })
    }

    /// Nodal values of the transverse displacement (first value per node for Hermite fields).
    pub fn bending_values(&self, state: &LimitState) -> Option<Vec<f64>> {
        let q = match self.fields.iter().find(|f| f.role == FieldRole::Bending) {
            Some(f) if f.dofs.ncomp == 4 => 4,
            _ => 1,
        };
        state.bending.as_ref().map(|b| nodal_values(b, q))
    }

    /// `L²(ω)` norm of every inclusion-mode coefficient field.
    pub fn micro_amplitudes(&self, x: &[f64]) -> Vec<f64> {
        self.fields
            .iter()
            .filter(|f| matches!(f.role, FieldRole::Micro(_)))
            .map(|f| {
                let c = f.slice(x);
                self.scalar_mass.form(c, c).max(0.0).sqrt()
            })
            .collect()
    }
}

/// Solves the limit resolvent problem `(𝔸 + λ) u = F` of the problem's regime.
pub fn solve_limit_resolvent(problem: &LimitProblem, lambda: f64, load: &LoadSpec) -> Result<LimitState> {
    let loads = problem.assemble_load(load)?;
    let mut rhs = vec![0.0; problem.ndof()];
    for tl in &loads {
        for (r, f) in rhs.iter_mut().zip(&tl.dynamic) {
            *r += f;
        }
    }
    let x = problem.resolve(lambda, &rhs)?;
    let cells = match problem.cell_bending {
        Some(_) => loads
            .iter()
            .map(|tl| problem.resolve_cell(lambda, tl.cell_load.as_deref().unwrap_or(&[])))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let scales = vec![1.0; loads.len()];
    problem.state(&x, &loads, &scales, cells, Some(lambda), None)
}
