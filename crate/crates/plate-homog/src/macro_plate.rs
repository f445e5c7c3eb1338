//! Macroscopic plate operators on the mid-plane: membrane, clamped bending and Schur-coupled bending.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::EffectiveTensor;
use crate::error::{Error, Result};
use crate::fem::eig::{eigs_smallest, EigOptions};
use crate::fem::forms::{assemble_h1, assemble_h2, dmat3, hessian_matrix, ElementSpec, GradKind};
use crate::fem::shapes::bfs_points;
use crate::fem::sparse::{Factor, SparseMatrix};
use crate::fem::DofMap;
use crate::geometry::MacroMesh;
use crate::tensor::Voigt3;

/// Which macroscopic operator is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroKind {
    /// Vector H¹ membrane operator with Dirichlet data on the clamped edges.
    Memb,
    /// Scalar H² bending operator with the bending block only.
    BendDecoupled,
    /// Scalar H² bending operator with the membrane field eliminated.
    BendCoupled,
}

/// Membrane stiffness and the curvature coupling used to eliminate the membrane field.
#[derive(Debug)]
pub struct MembraneElimination {
    /// Factorized membrane stiffness.
    pub factor: Factor,
    /// Coupling `K_ab` from bending unknowns to membrane loads.
    pub coupling: SparseMatrix,
    /// Membrane unknown numbering.
    pub dofs: DofMap,
}

/// Discretized macroscopic operator with `⟨ρ⟩`-weighted mass.
#[derive(Debug)]
pub struct MacroOperator {
    /// Operator kind.
    pub kind: MacroKind,
    /// Mid-plane mesh.
    pub mesh: MacroMesh,
    /// Stiffness on the constrained space.
    pub k: SparseMatrix,
    /// Mass weighted by `⟨ρ⟩`.
    pub m: SparseMatrix,
    /// Unknown numbering (2 components for membrane, 4 BFS values for bending).
    pub dofs: DofMap,
    /// Mass weight `⟨ρ⟩`.
    pub rho_mean: f64,
    /// Membrane elimination data of the coupled bending operator.
    pub elimination: Option<MembraneElimination>,
}

/// Ascending eigenpairs of a macroscopic operator.
#[derive(Debug, Clone)]
pub struct MacroSpectrum {
    /// Eigenvalues with respect to the `⟨ρ⟩`-weighted mass.
    pub values: Vec<f64>,
    /// Mass-orthonormal eigenvectors.
    pub modes: Vec<Vec<f64>>,
    /// Mass weight used.
    pub rho_mean: f64,
}

impl MacroSpectrum {
    /// Eigenvalues with respect to the unweighted mass, the values matched by a Zhikov function.
    pub fn unit_mass_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * self.rho_mean).collect()
    }
}

/// Structured elements of the mid-plane mesh.
pub fn macro_elements(mesh: &MacroMesh) -> Vec<ElementSpec> {
    let h = mesh.h();
    (0..mesh.num_elements())
        .map(|e| {
            let o = mesh.element_origin(e);
            ElementSpec {
                nodes: mesh.element_nodes(e).to_vec(),
                origin: [o[0], o[1], 0.0],
                h: [h[0], h[1], 0.0],
                soft: false,
            }
        })
        .collect()
}

/// Membrane unknowns: two displacement components per node, zero on the clamped edges.
pub fn membrane_dofs(mesh: &MacroMesh) -> DofMap {
    DofMap::build(mesh.num_nodes(), 2, |v| v, |v, _| mesh.dirichlet[v])
}

/// Bending unknowns: BFS values `(w, ∂1w, ∂2w, ∂12w)` per node, all four clamped on the clamped edges.
pub fn bending_dofs(mesh: &MacroMesh) -> DofMap {
    DofMap::build(mesh.num_nodes(), 4, |v| v, |v, _| mesh.dirichlet[v])
}

/// Bending unknowns without boundary constraints, used for `L²` fields.
pub fn free_bending_dofs(mesh: &MacroMesh) -> DofMap {
    DofMap::build(mesh.num_nodes(), 4, |v| v, |_, _| false)
}

/// Membrane unknowns without boundary constraints, used for `L²` fields.
pub fn free_membrane_dofs(mesh: &MacroMesh) -> DofMap {
    DofMap::build(mesh.num_nodes(), 2, |v| v, |_, _| false)
}

fn q1_planar_strain(s: f64, t: f64, h: [f64; 2]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(3, 8);
    for a in 0..4 {
        let (ix, iy) = (a % 2, a / 2);
        let (fx, dfx) = if ix == 1 { (s, 1.0 / h[0]) } else { (1.0 - s, -1.0 / h[0]) };
        let (fy, dfy) = if iy == 1 { (t, 1.0 / h[1]) } else { (1.0 - t, -1.0 / h[1]) };
        let dx = dfx * fy;
        let dy = fx * dfy;
        b[(0, 2 * a)] = dx;
        b[(1, 2 * a + 1)] = dy;
        b[(2, 2 * a)] = dy;
        b[(2, 2 * a + 1)] = dx;
    }
    b
}

/// Assembles `∫ (sym∇ θ)ᵀ D (∇² ψ)` between membrane rows and bending columns.
pub fn assemble_membrane_curvature(
    mesh: &MacroMesh,
    memb: &DofMap,
    bend: &DofMap,
    d: &nalgebra::Matrix3<f64>,
) -> Result<SparseMatrix> {
    let h = mesh.h();
    let dd = DMatrix::from_fn(3, 3, |i, j| d[(i, j)]);
    let local: Vec<_> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let mut ke = DMatrix::zeros(8, 16);
            for bp in bfs_points(h, 4) {
                let b1 = q1_planar_strain(bp.x[0] / h[0], bp.x[1] / h[1], h);
                ke += b1.transpose() * &dd * hessian_matrix(&bp) * bp.w;
            }
            let nodes = mesh.element_nodes(e);
            (memb.element_dofs(&nodes), bend.element_dofs(&nodes), ke)
        })
        .collect();
    let mut trip = Vec::new();
    for (rows, cols, ke) in &local {
        for (a, r) in rows.iter().enumerate() {
            let Some(r) = r else { continue };
            for (b, c) in cols.iter().enumerate() {
                let Some(c) = c else { continue };
                let v = ke[(a, b)];
                if v != 0.0 {
                    trip.push((*r, *c, v));
                }
            }
        }
    }
    SparseMatrix::from_triplets(memb.ndof, bend.ndof, &trip)
}

fn membrane_matrices(mesh: &MacroMesh, memb: &Voigt3, rho: f64, dofs: &DofMap) -> Result<(SparseMatrix, SparseMatrix)> {
    let d = dmat3(memb);
    assemble_h1(&macro_elements(mesh), dofs, GradKind::Planar, &|_| d.clone(), &|_| rho)
}

fn bending_matrices(mesh: &MacroMesh, bend: &Voigt3, rho: f64, dofs: &DofMap) -> Result<(SparseMatrix, SparseMatrix)> {
    let b = *bend;
    assemble_h2(&macro_elements(mesh), dofs, &|_| b, &|_| rho)
}

/// Dense matrix as a sparse one, dropping exact zeros.
fn from_dense(a: &DMatrix<f64>) -> Result<SparseMatrix> {
    let mut trip = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                trip.push((i, j, a[(i, j)]));
            }
        }
    }
    SparseMatrix::from_triplets(a.nrows(), a.ncols(), &trip)
}

impl MacroOperator {
    /// Discretizes the operator of `kind` for the given effective tensor and mass weight.
    pub fn new(kind: MacroKind, mesh: &MacroMesh, tensor: &EffectiveTensor, rho_mean: f64) -> Result<Self> {
        if mesh.num_dirichlet() == 0 {
            return Err(Error::Config("the clamped boundary is empty".into()));
        }
        if !(rho_mean > 0.0) {
            return Err(Error::Config("mass weight must be positive".into()));
        }
        match kind {
            MacroKind::Memb => {
                let dofs = membrane_dofs(mesh);
                let (k, m) = membrane_matrices(mesh, &tensor.memb, rho_mean, &dofs)?;
                Ok(Self { kind, mesh: mesh.clone(), k, m, dofs, rho_mean, elimination: None })
            }
            MacroKind::BendDecoupled => {
                let dofs = bending_dofs(mesh);
                let (k, m) = bending_matrices(mesh, &tensor.bend, rho_mean, &dofs)?;
                Ok(Self { kind, mesh: mesh.clone(), k, m, dofs, rho_mean, elimination: None })
            }
            MacroKind::BendCoupled => {
                let dofs = bending_dofs(mesh);
                let (kbb, m) = bending_matrices(mesh, &tensor.bend, rho_mean, &dofs)?;
                let mdofs = membrane_dofs(mesh);
                let (kaa, _) = membrane_matrices(mesh, &tensor.memb, rho_mean, &mdofs)?;
                let kab = assemble_membrane_curvature(mesh, &mdofs, &dofs, &tensor.coupling)?;
                let factor = Factor::cholesky(&kaa)?;
                let n = dofs.ndof;
                let cols: Vec<Vec<f64>> = (0..n)
                    .into_par_iter()
                    .map(|j| {
                        let mut e = vec![0.0; n];
                        e[j] = 1.0;
                        factor.solve(&kab.matvec(&e))
                    })
                    .collect();
                let kabt = kab.transpose();
                let dense = kbb.to_dense();
                let mut schur = DMatrix::from_fn(n, n, |i, j| dense[(i, j)]);
                for (j, x) in cols.iter().enumerate() {
                    let y = kabt.matvec(x);
                    for i in 0..n {
                        schur[(i, j)] -= y[i];
                    }
                }
                let schur = 0.5 * (&schur + schur.transpose());
                let k = from_dense(&schur)?;
                let elimination = MembraneElimination { factor, coupling: kab, dofs: mdofs };
                Ok(Self { kind, mesh: mesh.clone(), k, m, dofs, rho_mean, elimination: Some(elimination) })
            }
        }
    }

    /// Number of unknowns.
    pub fn ndof(&self) -> usize {
        self.dofs.ndof
    }
}

/// The `count` lowest eigenpairs of stiffness against the `⟨ρ⟩`-weighted mass.
pub fn macro_eigs(op: &MacroOperator, count: usize, opts: &EigOptions) -> Result<MacroSpectrum> {
    if count == 0 {
        return Err(Error::Config("at least one macroscopic eigenvalue must be requested".into()));
    }
    if count > op.ndof() {
        return Err(Error::Config(format!("{count} eigenvalues requested from {} unknowns", op.ndof())));
    }
    let r = eigs_smallest(&op.k, &op.m, count, opts)?;
    Ok(MacroSpectrum { values: r.values, modes: r.vectors, rho_mean: op.rho_mean })
}

/// Membrane field `𝔞^𝔟 = −K_aa⁻¹ K_ab 𝔟` induced by a bending field through the coupling block.
pub fn membrane_solve_for_bending(op: &MacroOperator, b: &[f64]) -> Result<Vec<f64>> {
    let el = op
        .elimination
        .as_ref()
        .ok_or_else(|| Error::Config("operator carries no membrane–bending coupling".into()))?;
    if b.len() != op.ndof() {
        return Err(Error::Config("bending field has the wrong length".into()));
    }
    Ok(el.factor.solve(&el.coupling.matvec(b)).into_iter().map(|x| -x).collect())
}

/// Assembles a sparse matrix from a dense block on the given unknowns (testing and small systems).
pub fn dense_to_sparse(a: &DMatrix<f64>) -> Result<SparseMatrix> {
    from_dense(a)
}

/// Mass matrix `∫ w φ_i φ_j` of an unconstrained scalar or vector field on the mid-plane.
pub fn field_mass(mesh: &MacroMesh, dofs: &DofMap, weight: f64) -> Result<SparseMatrix> {
    let elements = macro_elements(mesh);
    if dofs.ncomp == 4 {
        let zero = Voigt3::zeros();
        Ok(assemble_h2(&elements, dofs, &|_| zero, &|_| weight)?.1)
    } else {
        let d = DMatrix::zeros(3, 3);
        Ok(assemble_h1(&elements, dofs, GradKind::Planar, &|_| d.clone(), &|_| weight)?.1)
    }
}

/// Mixed mass `∫ w φ_i ψ_j` between two numberings of the same element family.
pub fn cross_mass(mesh: &MacroMesh, rows: &DofMap, cols: &DofMap, weight: f64) -> Result<SparseMatrix> {
    if rows.ncomp != cols.ncomp {
        return Err(Error::Config("mixed mass needs equal component counts".into()));
    }
    let full = if rows.ncomp == 4 { free_bending_dofs(mesh) } else { free_membrane_dofs(mesh) };
    let m = field_mass(mesh, &full, weight)?;
    let nodes = mesh.num_nodes();
    let nc = rows.ncomp;
    let rmap: Vec<Option<usize>> = (0..nodes * nc).map(|g| rows.dof(g / nc, g % nc)).collect();
    let cmap: Vec<Option<usize>> = (0..nodes * nc).map(|g| cols.dof(g / nc, g % nc)).collect();
    let mut asm = Vec::new();
    for (i, j, v) in m.triplets() {
        if let (Some(r), Some(c)) = (rmap[i], cmap[j]) {
            asm.push((r, c, v));
        }
    }
    SparseMatrix::from_triplets(rows.ndof, cols.ndof, &asm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::{Provenance, TensorRegime};
    use crate::fem::EigSolverKind;
    use crate::geometry::{build_macro_mesh, Edge};
    use nalgebra::{Matrix3, Matrix6};

    fn tensor(memb: Voigt3, bend: Voigt3, coupling: Matrix3<f64>) -> EffectiveTensor {
        EffectiveTensor {
            regime: TensorRegime::DeltaZero,
            memb,
            bend,
            coupling,
            zero_corrector: Matrix6::zeros(),
            provenance: Provenance { n: 0, n_z: 0, ndof: 0, solver_tol: 0.0 },
        }
    }

    fn plate(d: f64) -> Voigt3 {
        Voigt3::from_diagonal(&nalgebra::Vector3::new(d, d, d / 2.0))
    }

    #[test]
    fn clamped_square_biharmonic() {
        let all = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];
        let mesh = build_macro_mesh(1.0, 1.0, 16, 16, &all).unwrap();
        let op = MacroOperator::new(MacroKind::BendDecoupled, &mesh, &tensor(plate(1.0), plate(1.0), Matrix3::zeros()), 1.0).unwrap();
        let s = macro_eigs(&op, 1, &EigOptions::default()).unwrap();
        assert!((s.values[0] - 1294.93).abs() / 1294.93 < 1e-3, "{}", s.values[0]);
    }

    #[test]
    fn scaling_covariance() {
        let mesh = build_macro_mesh(1.0, 1.0, 6, 6, &[Edge::Left]).unwrap();
        let t1 = tensor(plate(2.0), plate(0.5), Matrix3::zeros());
        let t3 = tensor(plate(6.0), plate(1.5), Matrix3::zeros());
        for kind in [MacroKind::Memb, MacroKind::BendDecoupled] {
            let a = macro_eigs(&MacroOperator::new(kind, &mesh, &t1, 1.3).unwrap(), 5, &EigOptions::default()).unwrap();
            let b = macro_eigs(&MacroOperator::new(kind, &mesh, &t3, 1.3).unwrap(), 5, &EigOptions::default()).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((3.0 * x - y).abs() <= 1e-9 * y);
            }
            assert!(a.values[0] > 0.0);
        }
    }

    #[test]
    fn zero_coupling_coincides() {
        let mesh = build_macro_mesh(1.0, 1.0, 6, 6, &[Edge::Left]).unwrap();
        let t = tensor(plate(2.0), plate(0.5), Matrix3::zeros());
        let a = macro_eigs(&MacroOperator::new(MacroKind::BendDecoupled, &mesh, &t, 1.0).unwrap(), 6, &EigOptions::default()).unwrap();
        let b = macro_eigs(&MacroOperator::new(MacroKind::BendCoupled, &mesh, &t, 1.0).unwrap(), 6, &EigOptions::default()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-9 * x);
        }
    }

    fn coupled_tensor() -> EffectiveTensor {
        let c = Matrix3::new(0.3, 0.1, 0.0, 0.05, 0.2, 0.0, 0.0, 0.0, 0.1);
        tensor(plate(2.0), plate(0.5), c)
    }

    #[test]
    fn coupling_lowers_energy_and_stays_definite() {
        let mesh = build_macro_mesh(1.0, 1.0, 6, 6, &[Edge::Left]).unwrap();
        let t = coupled_tensor();
        assert!(t.form_eigenvalues()[0] > 0.0);
        let dec = MacroOperator::new(MacroKind::BendDecoupled, &mesh, &t, 1.0).unwrap();
        let cou = MacroOperator::new(MacroKind::BendCoupled, &mesh, &t, 1.0).unwrap();
        let mut rng = 12345u64;
        for _ in 0..5 {
            let b: Vec<f64> = (0..dec.ndof())
                .map(|_| {
                    rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            assert!(cou.k.form(&b, &b) <= dec.k.form(&b, &b) * (1.0 + 1e-12));
        }
        let s = macro_eigs(&cou, 1, &EigOptions::default()).unwrap();
        assert!(s.values[0] > 0.0);
    }

    #[test]
    fn induced_membrane_field() {
        let mesh = build_macro_mesh(1.0, 1.0, 6, 6, &[Edge::Left]).unwrap();
        let op = MacroOperator::new(MacroKind::BendCoupled, &mesh, &coupled_tensor(), 1.0).unwrap();
        let a = membrane_solve_for_bending(&op, &vec![0.0; op.ndof()]).unwrap();
        assert!(a.iter().all(|x| *x == 0.0));
        let zero = MacroOperator::new(MacroKind::BendCoupled, &mesh, &tensor(plate(2.0), plate(0.5), Matrix3::zeros()), 1.0).unwrap();
        let b: Vec<f64> = (0..zero.ndof()).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = membrane_solve_for_bending(&zero, &b).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-14));
        assert!(membrane_solve_for_bending(&MacroOperator::new(MacroKind::Memb, &mesh, &coupled_tensor(), 1.0).unwrap(), &b).is_err());
    }

    #[test]
    fn affine_bending_induces_no_membrane_field() {
        let mesh = build_macro_mesh(1.0, 1.0, 4, 4, &[Edge::Left]).unwrap();
        let mdofs = membrane_dofs(&mesh);
        let bdofs = free_bending_dofs(&mesh);
        let kab = assemble_membrane_curvature(&mesh, &mdofs, &bdofs, &coupled_tensor().coupling).unwrap();
        let mut b = vec![0.0; bdofs.ndof];
        for v in 0..mesh.num_nodes() {
            let x = mesh.node_pos(v);
            b[bdofs.dof(v, 0).unwrap()] = 1.0 + 2.0 * x[0] - 0.5 * x[1];
            b[bdofs.dof(v, 1).unwrap()] = 2.0;
            b[bdofs.dof(v, 2).unwrap()] = -0.5;
        }
        assert!(kab.matvec(&b).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn reciprocity_of_coupled_form() {
        let mesh = build_macro_mesh(1.0, 1.0, 5, 5, &[Edge::Left]).unwrap();
        let op = MacroOperator::new(MacroKind::BendCoupled, &mesh, &coupled_tensor(), 1.0).unwrap();
        let el = op.elimination.as_ref().unwrap();
        let n = op.ndof();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.71).cos()).collect();
        let th: Vec<f64> = (0..n).map(|i| (i as f64 * 1.13).sin()).collect();
        let ab = membrane_solve_for_bending(&op, &b).unwrap();
        let at = membrane_solve_for_bending(&op, &th).unwrap();
        let kab = &el.coupling;
        let dec = MacroOperator::new(MacroKind::BendDecoupled, &mesh, &coupled_tensor(), 1.0).unwrap();
        let kaa = membrane_matrices(&mesh, &coupled_tensor().memb, 1.0, &el.dofs).unwrap().0;
        let form = |a1: &[f64], b1: &[f64], a2: &[f64], b2: &[f64]| {
            kaa.form(a1, a2) + crate::fem::sparse::dot(a1, &kab.matvec(b2)) + crate::fem::sparse::dot(a2, &kab.matvec(b1)) + dec.k.form(b1, b2)
        };
        let x = form(&ab, &b, &at, &th);
        let y = form(&at, &th, &ab, &b);
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        assert!((x - op.k.form(&b, &th)).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn dense_and_krylov_agree() {
        let mesh = build_macro_mesh(1.0, 1.0, 12, 12, &[Edge::Left]).unwrap();
        let op = MacroOperator::new(MacroKind::Memb, &mesh, &coupled_tensor(), 1.0).unwrap();
        let d = macro_eigs(&op, 6, &EigOptions { solver: EigSolverKind::Dense, ..EigOptions::default() }).unwrap();
        let k = macro_eigs(&op, 6, &EigOptions { solver: EigSolverKind::ShiftInvert, ..EigOptions::default() }).unwrap();
        for (x, y) in d.values.iter().zip(&k.values) {
            assert!((x - y).abs() <= 1e-8 * x);
        }
    }
}
