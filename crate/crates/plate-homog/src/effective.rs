//! Corrector cell problems and the effective plate tensors of the three regimes.

use nalgebra::{DMatrix, Matrix3, Matrix6, SymmetricEigen, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::cell::{assemble_bfs_h2, assemble_vector_h1, constant_kernel, CellSpace, Parity, Restriction};
use crate::fem::forms::{assemble_h1_strain_load, assemble_h2_curvature_load, dmat3, dmat6, GradKind};
use crate::fem::sparse::{dot, KernelSolver, SparseMatrix};
use crate::geometry::CellMesh;
use crate::tensor::{kept_block, reduced_tensor, MaterialSpec, Voigt3};

/// Residual tolerance of the corrector solves.
pub const CORRECTOR_TOL: f64 = 1e-10;

/// Scaling regime of an effective tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TensorRegime {
    /// Finite ratio `delta` of thickness to period.
    DeltaFinite {
        /// The ratio.
        delta: f64,
    },
    /// Thickness much smaller than the period.
    DeltaZero,
    /// Period much smaller than the thickness.
    DeltaInfty,
}

/// Discretization record of an effective tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// In-plane elements per side.
    pub n: usize,
    /// Transverse layers (1 for planar cell problems).
    pub n_z: usize,
    /// Unknowns of the largest corrector system.
    pub ndof: usize,
    /// Relative residual tolerance of the corrector solves.
    pub solver_tol: f64,
}

/// Homogenized quadratic form on pairs `(A, B)` in planar Voigt notation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensor {
    /// Regime the tensor belongs to.
    pub regime: TensorRegime,
    /// Membrane block.
    pub memb: Voigt3,
    /// Bending block.
    pub bend: Voigt3,
    /// Membrane–bending cross block.
    pub coupling: Matrix3<f64>,
    /// Energy of the zero corrector on the six basis pairs (and their cross terms).
    pub zero_corrector: Matrix6<f64>,
    /// Discretization record.
    pub provenance: Provenance,
}

impl EffectiveTensor {
    fn from_full(regime: TensorRegime, full: &Matrix6<f64>, zero_corrector: Matrix6<f64>, provenance: Provenance) -> Self {
        let block = |r: usize, c: usize| Matrix3::from_fn(|i, j| full[(r + i, c + j)]);
        Self {
            regime,
            memb: block(0, 0),
            bend: block(3, 3),
            coupling: block(0, 3),
            zero_corrector,
            provenance,
        }
    }

    /// The full 6×6 form on `(A, B)` Voigt vectors.
    pub fn full(&self) -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = self.memb[(i, j)];
                m[(i + 3, j + 3)] = self.bend[(i, j)];
                m[(i, j + 3)] = self.coupling[(i, j)];
                m[(j + 3, i)] = self.coupling[(i, j)];
            }
        }
        m
    }

    /// Value of the form at `(A, B)` given as planar Voigt vectors.
    pub fn value(&self, a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
        let p = Vector6::new(a[0], a[1], a[2], b[0], b[1], b[2]);
        p.dot(&(self.full() * p))
    }

    /// Eigenvalues of the form with respect to `|A|² + |B|²`, ascending.
    pub fn form_eigenvalues(&self) -> Vector6<f64> {
        let r = 2f64.sqrt();
        let s = Vector6::new(1.0, 1.0, r, 1.0, 1.0, r);
        let full = self.full();
        let scaled = Matrix6::from_fn(|i, j| s[i] * full[(i, j)] * s[j]);
        let mut e = SymmetricEigen::new(0.5 * (scaled + scaled.transpose())).eigenvalues;
        e.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
        e
    }
}

/// Minimum of `base + 2 lᵀx + xᵀKx` for every pair of loads, as a bilinear form.
///
/// Returns `T_ij = base_ij − l_iᵀ K⁺ l_j`, symmetrized.
fn corrector_form(k: &SparseMatrix, kernel: &[Vec<f64>], loads: &[Vec<f64>], base: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let solver = KernelSolver::new(k, kernel)?;
    let xs: Vec<Vec<f64>> = loads.par_iter().map(|l| solver.solve(l)).collect::<Result<_>>()?;
    let n = loads.len();
    let t = DMatrix::from_fn(n, n, |i, j| base[(i, j)] - dot(&loads[i], &xs[j]));
    let asym = (&t - t.transpose()).abs().max();
    let scale = t.abs().max().max(f64::MIN_POSITIVE);
    if asym > 1e-8 * scale {
        return Err(Error::Solver(format!("corrector form asymmetric by {asym:e}")));
    }
    Ok(0.5 * (&t + t.transpose()))
}

fn stiff_area(mesh: &CellMesh) -> f64 {
    1.0 - mesh.soft_fraction()
}

/// Planar strain `ι(A)` in six-component Voigt form.
fn iota_strain(p: &[f64; 3]) -> [f64; 6] {
    [p[0], p[1], 0.0, 0.0, 0.0, p[2]]
}

fn unit3(j: usize) -> [f64; 3] {
    let mut p = [0.0; 3];
    p[j] = 1.0;
    p
}

/// Zero-corrector energies `|Y1| (C A:A + C B:B / 12)` on the six basis pairs.
fn zero_corrector_form(area: f64, d: &Voigt3) -> Matrix6<f64> {
    let mut z = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            z[(i, j)] = area * d[(i, j)];
            z[(i + 3, j + 3)] = area * d[(i, j)] / 12.0;
        }
    }
    z
}

/// Effective tensor for a finite thickness-to-period ratio `delta`.
///
/// The corrector problems live on the stiff columns `I × Y1` of the prism mesh,
/// with periodic unknowns and the transverse derivative scaled by `1/delta`.
pub fn effective_delta(mat: &MaterialSpec, mesh3d: &CellMesh, delta: f64) -> Result<EffectiveTensor> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta = {delta} must be positive and finite")));
    }
    if mesh3d.dim != 3 {
        return Err(Error::Config("finite-delta tensor requires a prism mesh".into()));
    }
    let c = dmat6(&mat.c1);
    let kind = GradKind::Scaled3d { transverse_scale: 1.0 / delta };
    let op = assemble_vector_h1(
        mesh3d,
        kind,
        CellSpace::Periodic,
        Restriction::Stiff,
        Parity::Full,
        &|_| c.clone(),
        &|_| mat.rho1,
    )?;
    let loads: Vec<Vec<f64>> = (0..6)
        .into_par_iter()
        .map(|j| {
            let p = unit3(j % 3);
            let bending = j >= 3;
            let strain = move |_: &crate::fem::ElementSpec, x: [f64; 3]| {
                let s = if bending { -x[2] } else { 1.0 };
                iota_strain(&p).iter().map(|v| s * v).collect()
            };
            assemble_h1_strain_load(&op.elements, &op.dofs, kind, &|_| c.clone(), &strain)
        })
        .collect();
    let zero = zero_corrector_form(stiff_area(mesh3d), &kept_block(&mat.c1));
    let base = DMatrix::from_fn(6, 6, |i, j| zero[(i, j)]);
    let t = corrector_form(&op.pair.k, &op.pair.kernel, &loads, &base)?;
    let full = Matrix6::from_fn(|i, j| t[(i, j)]);
    Ok(EffectiveTensor::from_full(
        TensorRegime::DeltaFinite { delta },
        &full,
        zero,
        Provenance {
            n: mesh3d.n,
            n_z: mesh3d.n_z,
            ndof: op.pair.ndof(),
            solver_tol: CORRECTOR_TOL,
        },
    ))
}

/// Effective tensor of the thin-period regime, built from the reduced stiff tensor `C1^r`.
///
/// The membrane block solves a planar periodic corrector problem with `C1^r`;
/// the bending block solves a periodic BFS problem with `C1^r / 12`.
pub fn effective_delta0(mat: &MaterialSpec, mesh2d: &CellMesh) -> Result<EffectiveTensor> {
    if mesh2d.dim != 2 {
        return Err(Error::Config("thin-period tensor requires a planar mesh".into()));
    }
    let cr = reduced_tensor(&mat.c1)?;
    let d = dmat3(&cr);
    let memb_op = assemble_vector_h1(
        mesh2d,
        GradKind::Planar,
        CellSpace::Periodic,
        Restriction::Stiff,
        Parity::Full,
        &|_| d.clone(),
        &|_| mat.rho1,
    )?;
    let memb_loads: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            let p = unit3(j);
            assemble_h1_strain_load(&memb_op.elements, &memb_op.dofs, GradKind::Planar, &|_| d.clone(), &move |_, _| {
                p.to_vec()
            })
        })
        .collect();
    let area = stiff_area(mesh2d);
    let memb_base = DMatrix::from_fn(3, 3, |i, j| area * cr[(i, j)]);
    let memb = corrector_form(&memb_op.pair.k, &memb_op.pair.kernel, &memb_loads, &memb_base)?;

    let db = cr / 12.0;
    let bend_op = assemble_bfs_h2(mesh2d, CellSpace::Periodic, Restriction::Stiff, &|_| db, &|_| mat.rho1)?;
    let bend_loads: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            let p = unit3(j);
            assemble_h2_curvature_load(&bend_op.elements, &bend_op.dofs, &|_| db, &move |_, _| p)
        })
        .collect();
    let bend_base = DMatrix::from_fn(3, 3, |i, j| area * db[(i, j)]);
    let bend = corrector_form(&bend_op.pair.k, &bend_op.pair.kernel, &bend_loads, &bend_base)?;

    let mut full = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            full[(i, j)] = memb[(i, j)];
            full[(i + 3, j + 3)] = bend[(i, j)];
        }
    }
    Ok(EffectiveTensor::from_full(
        TensorRegime::DeltaZero,
        &full,
        zero_corrector_form(area, &cr),
        Provenance {
            n: mesh2d.n,
            n_z: 1,
            ndof: memb_op.pair.ndof().max(bend_op.pair.ndof()),
            solver_tol: CORRECTOR_TOL,
        },
    ))
}

/// Voigt rows receiving the constant vector `g = (g1, g2, g3)` of the thick-period corrector.
const G_ROWS: [usize; 3] = [4, 3, 2];

/// Effective tensor of the thick-period regime.
///
/// The corrector is a periodic three-component field `w` on `Y1`, entering through
/// `sym ι(∇_y w)`, plus a constant vector `g` filling the transverse column. The
/// unknown `g` borders the sparse system with three dense rows and columns.
pub fn effective_deltainf(mat: &MaterialSpec, mesh2d: &CellMesh) -> Result<EffectiveTensor> {
    if mesh2d.dim != 2 {
        return Err(Error::Config("thick-period tensor requires a planar mesh".into()));
    }
    let c = dmat6(&mat.c1);
    let kind = GradKind::IotaGrad;
    let op = assemble_vector_h1(
        mesh2d,
        kind,
        CellSpace::Periodic,
        Restriction::Stiff,
        Parity::Full,
        &|_| c.clone(),
        &|_| mat.rho1,
    )?;
    let nw = op.pair.ndof();
    let area = stiff_area(mesh2d);
    let unit6 = |r: usize| {
        let mut e = vec![0.0; 6];
        e[r] = 1.0;
        e
    };
    let border: Vec<Vec<f64>> = G_ROWS
        .iter()
        .map(|&r| assemble_h1_strain_load(&op.elements, &op.dofs, kind, &|_| c.clone(), &move |_, _| unit6(r)))
        .collect();
    let mut trip = op.pair.k.triplets();
    for (a, col) in border.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if v != 0.0 {
                trip.push((i, nw + a, v));
                trip.push((nw + a, i, v));
            }
        }
        for (b, &rb) in G_ROWS.iter().enumerate() {
            trip.push((nw + a, nw + b, area * c[(G_ROWS[a], rb)]));
        }
    }
    let k = SparseMatrix::from_triplets(nw + 3, nw + 3, &trip)?;
    let kernel: Vec<Vec<f64>> = op
        .pair
        .kernel
        .iter()
        .map(|z| {
            let mut v = z.clone();
            v.extend_from_slice(&[0.0; 3]);
            v
        })
        .collect();
    let loads: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            let e = iota_strain(&unit3(j));
            let mut l = assemble_h1_strain_load(&op.elements, &op.dofs, kind, &|_| c.clone(), &move |_, _| e.to_vec());
            for &r in &G_ROWS {
                l.push(area * (0..6).map(|q| c[(r, q)] * e[q]).sum::<f64>());
            }
            l
        })
        .collect();
    let ckk = kept_block(&mat.c1);
    let base = DMatrix::from_fn(3, 3, |i, j| area * ckk[(i, j)]);
    let memb = corrector_form(&k, &kernel, &loads, &base)?;
    let mut full = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            full[(i, j)] = memb[(i, j)];
            full[(i + 3, j + 3)] = memb[(i, j)] / 12.0;
        }
    }
    Ok(EffectiveTensor::from_full(
        TensorRegime::DeltaInfty,
        &full,
        zero_corrector_form(area, &ckk),
        Provenance {
            n: mesh2d.n,
            n_z: 1,
            ndof: nw + 3,
            solver_tol: CORRECTOR_TOL,
        },
    ))
}

/// Kernel candidates of a periodic stiff-phase space, exposed for diagnostics.
pub fn periodic_constants(mesh: &CellMesh, ncomp: usize) -> Vec<Vec<f64>> {
    let dofs = crate::fem::cell::cell_dofmap(mesh, ncomp, CellSpace::Periodic, Restriction::Stiff, Parity::Full);
    constant_kernel(mesh, &dofs, &(0..ncomp).collect::<Vec<_>>())
}
