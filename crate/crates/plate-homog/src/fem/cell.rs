//! Function spaces and operator assembly on cell meshes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dofmap::DofMap;
use super::forms::{assemble_h1, assemble_h2, ElementSpec, GradKind};
use super::sparse::SparseOperatorPair;
use crate::error::{Error, Result};
use crate::geometry::CellMesh;
use crate::tensor::Voigt3;

/// Subset of elements an operator integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Restriction {
    /// Whole cell.
    All,
    /// Stiff phase `Y1` only.
    Stiff,
    /// Soft phase `Y0` only.
    Soft,
}

impl Restriction {
    fn admits(&self, soft: bool) -> bool {
        match self {
            Restriction::All => true,
            Restriction::Stiff => !soft,
            Restriction::Soft => soft,
        }
    }
}

/// Boundary behaviour of a cell space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellSpace {
    /// Periodic in the in-plane directions.
    Periodic,
    /// Zero trace on the inclusion boundary (nodes touching the stiff phase are eliminated).
    ZeroTrace,
}

/// Symmetry class imposed at `x3 = 0` on half-interval prism meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// No constraint.
    Full,
    /// In-plane components even, transverse component odd: `u3 = 0` at `x3 = 0`.
    Membrane,
    /// In-plane components odd, transverse component even: `u1 = u2 = 0` at `x3 = 0`.
    Bending,
}

/// Elements of the restriction, in mesh order.
pub fn cell_elements(mesh: &CellMesh, restrict: Restriction) -> Vec<ElementSpec> {
    let h = mesh.h();
    let hz = if mesh.dim == 3 { mesh.hz() } else { 0.0 };
    (0..mesh.num_elements())
        .filter(|&e| restrict.admits(mesh.is_soft(e)))
        .map(|e| {
            let (i, j, k) = mesh.element_ijk(e);
            let z0 = if mesh.dim == 3 {
                mesh.z_range[0] + k as f64 * hz
            } else {
                0.0
            };
            ElementSpec {
                nodes: mesh.element_nodes(e),
                origin: [i as f64 * h, j as f64 * h, z0],
                h: [h, h, hz],
                soft: mesh.is_soft(e),
            }
        })
        .collect()
}

/// DOF numbering for a cell space with `ncomp` unknowns per node.
pub fn cell_dofmap(
    mesh: &CellMesh,
    ncomp: usize,
    space: CellSpace,
    restrict: Restriction,
    parity: Parity,
) -> DofMap {
    let half = mesh.dim == 3 && mesh.z_range[0] == 0.0;
    DofMap::build(
        mesh.num_nodes(),
        ncomp,
        |v| mesh.periodic_map[v],
        |v, c| {
            let (i, j, k) = mesh.node_ijk(v);
            let present = match space {
                CellSpace::ZeroTrace => mesh.node_interior_soft(i, j),
                CellSpace::Periodic => match restrict {
                    Restriction::All => true,
                    Restriction::Stiff => mesh.node_touches_stiff(i, j),
                    Restriction::Soft => mesh.soft_neighbour_count(i, j) > 0,
                },
            };
            let parity_fixed = half
                && k == 0
                && match parity {
                    Parity::Full => false,
                    Parity::Membrane => c == 2,
                    Parity::Bending => c < 2,
                };
            !present || parity_fixed
        },
    )
}

/// Constant fields (one per listed component) expressed in the unknowns.
pub fn constant_kernel(mesh: &CellMesh, dofs: &DofMap, comps: &[usize]) -> Vec<Vec<f64>> {
    comps
        .iter()
        .map(|&c| {
            let mut z = vec![0.0; dofs.ndof];
            for v in 0..mesh.num_nodes() {
                if let Some(d) = dofs.dof(v, c) {
                    z[d] = 1.0;
                }
            }
            z
        })
        .filter(|z| z.iter().any(|x| *x != 0.0))
        .collect()
}

/// Assembled cell operator with its DOF map and elements.
#[derive(Debug, Clone)]
pub struct CellOperator {
    /// Stiffness, mass and kernel.
    pub pair: SparseOperatorPair,
    /// DOF numbering.
    pub dofs: DofMap,
    /// Integration elements.
    pub elements: Vec<ElementSpec>,
}

/// Assembles an H¹ vector form on a cell mesh.
#[allow(clippy::too_many_arguments)]
pub fn assemble_vector_h1(
    mesh: &CellMesh,
    kind: GradKind,
    space: CellSpace,
    restrict: Restriction,
    parity: Parity,
    tensor: &(dyn Fn(bool) -> DMatrix<f64> + Sync),
    density: &(dyn Fn(bool) -> f64 + Sync),
) -> Result<CellOperator> {
    if kind.is_3d() != (mesh.dim == 3) {
        return Err(Error::Config("gradient kind does not match the mesh dimension".into()));
    }
    let elements = cell_elements(mesh, restrict);
    if elements.is_empty() {
        return Err(Error::Config("restriction selects no elements".into()));
    }
    let dofs = cell_dofmap(mesh, kind.ncomp(), space, restrict, parity);
    if dofs.ndof == 0 {
        return Err(Error::Config("space has no unknowns".into()));
    }
    let (k, m) = assemble_h1(&elements, &dofs, kind, &|e: &ElementSpec| tensor(e.soft), &|e: &ElementSpec| {
        density(e.soft)
    })?;
    let kernel = match space {
        CellSpace::Periodic => {
            let comps: Vec<usize> = (0..kind.ncomp()).collect();
            constant_kernel(mesh, &dofs, &comps)
        }
        CellSpace::ZeroTrace => Vec::new(),
    };
    Ok(CellOperator {
        pair: SparseOperatorPair::new(k, m, kernel)?,
        dofs,
        elements,
    })
}

/// Assembles an H² scalar form with BFS elements on a planar cell mesh.
pub fn assemble_bfs_h2(
    mesh: &CellMesh,
    space: CellSpace,
    restrict: Restriction,
    tensor: &(dyn Fn(bool) -> Voigt3 + Sync),
    density: &(dyn Fn(bool) -> f64 + Sync),
) -> Result<CellOperator> {
    if mesh.dim != 2 {
        return Err(Error::Config("BFS elements require a planar mesh".into()));
    }
    let elements = cell_elements(mesh, restrict);
    if elements.is_empty() {
        return Err(Error::Config("restriction selects no elements".into()));
    }
    let dofs = cell_dofmap(mesh, 4, space, restrict, Parity::Full);
    if dofs.ndof == 0 {
        return Err(Error::Config("space has no unknowns".into()));
    }
    let (k, m) = assemble_h2(&elements, &dofs, &|e: &ElementSpec| tensor(e.soft), &|e: &ElementSpec| {
        density(e.soft)
    })?;
    let kernel = match space {
        CellSpace::Periodic => constant_kernel(mesh, &dofs, &[0]),
        CellSpace::ZeroTrace => Vec::new(),
    };
    Ok(CellOperator {
        pair: SparseOperatorPair::new(k, m, kernel)?,
        dofs,
        elements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::forms::{dmat3, dmat6};
    use crate::geometry::{build_cell_mesh, InclusionShape};
    use crate::tensor::{isotropic, kept_block};

    #[test]
    fn periodic_constants_in_kernel() {
        let mesh = build_cell_mesh(&InclusionShape::disk(0.3), 8, 3, 2).unwrap();
        let c = dmat6(&isotropic(1.0, 1.0));
        let op = assemble_vector_h1(
            &mesh,
            GradKind::Scaled3d { transverse_scale: 1.0 },
            CellSpace::Periodic,
            Restriction::Stiff,
            Parity::Full,
            &|_| c.clone(),
            &|_| 1.0,
        )
        .unwrap();
        assert_eq!(op.pair.kernel.len(), 3);
        assert!(op.pair.k.symmetry_error() < 1e-12);
        assert!(op.pair.m.symmetry_error() < 1e-12);
    }

    #[test]
    fn zero_trace_space_is_interior() {
        let mesh = build_cell_mesh(&InclusionShape::disk(0.3), 16, 2, 1).unwrap();
        let d = dmat3(&kept_block(&isotropic(1.0, 1.0)));
        let op = assemble_vector_h1(
            &mesh,
            GradKind::Planar,
            CellSpace::ZeroTrace,
            Restriction::Soft,
            Parity::Full,
            &|_| d.clone(),
            &|_| 1.0,
        )
        .unwrap();
        assert!(op.pair.kernel.is_empty());
        let interior = (0..=16)
            .flat_map(|j| (0..=16).map(move |i| (i, j)))
            .filter(|&(i, j)| i < 16 && j < 16 && mesh.node_interior_soft(i, j))
            .count();
        assert_eq!(op.dofs.ndof, 2 * interior);
    }

    #[test]
    fn parity_constraints_on_half_prism() {
        let mesh = build_cell_mesh(&InclusionShape::disk(0.3), 8, 3, 2).unwrap().with_z_range(0.0, 0.5);
        let full = cell_dofmap(&mesh, 3, CellSpace::ZeroTrace, Restriction::Soft, Parity::Full);
        let memb = cell_dofmap(&mesh, 3, CellSpace::ZeroTrace, Restriction::Soft, Parity::Membrane);
        let bend = cell_dofmap(&mesh, 3, CellSpace::ZeroTrace, Restriction::Soft, Parity::Bending);
        let per_layer = full.ndof / 3 / 3;
        assert_eq!(memb.ndof, full.ndof - per_layer);
        assert_eq!(bend.ndof, full.ndof - 2 * per_layer);
    }

    #[test]
    fn bfs_periodic_kernel_is_constant() {
        let mesh = build_cell_mesh(&InclusionShape::disk(0.3), 8, 2, 1).unwrap();
        let d = kept_block(&isotropic(1.0, 1.0));
        let op = assemble_bfs_h2(&mesh, CellSpace::Periodic, Restriction::Stiff, &|_| d, &|_| 1.0).unwrap();
        assert_eq!(op.pair.kernel.len(), 1);
    }
}
