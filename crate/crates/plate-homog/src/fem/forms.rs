//! Element kernels and generic assembly of H¹ vector forms (Q1) and H² scalar forms (BFS).

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::dofmap::DofMap;
use super::shapes::{bfs_points, q1_points_2d, q1_points_3d, BfsPoint, QuadPoint};
use super::sparse::{add_element_vector, Assembler, SparseMatrix};
use crate::error::Result;
use crate::tensor::{Voigt3, Voigt6};

/// One structured element handed to the assemblers.
#[derive(Debug, Clone)]
pub struct ElementSpec {
    /// Grid nodes, x fastest, then y, then z.
    pub nodes: Vec<usize>,
    /// Lower corner.
    pub origin: [f64; 3],
    /// Edge lengths (third entry unused in 2D).
    pub h: [f64; 3],
    /// Whether the element belongs to the soft phase.
    pub soft: bool,
}

/// Strain realized by an H¹ vector field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradKind {
    /// `sym ∇̃ u` with `∇̃ = (∂1, ∂2, s ∂3)` on a prism, three components, six strains.
    Scaled3d {
        /// Factor `s` applied to the transverse derivative.
        transverse_scale: f64,
    },
    /// `sym ∇ u` in the plane, two components, three planar strains.
    Planar,
    /// `sym ι(∇_y u)` of a three-component field on a planar domain, six strains.
    IotaGrad,
    /// Zeroth-order part `sym(0 | 0 | u)` of a three-component field on a planar domain.
    TransverseValue,
}

impl GradKind {
    /// Components per node.
    pub fn ncomp(&self) -> usize {
        match self {
            GradKind::Planar => 2,
            _ => 3,
        }
    }

    /// Number of strain entries.
    pub fn nstrain(&self) -> usize {
        match self {
            GradKind::Planar => 3,
            _ => 6,
        }
    }

    /// Whether the element is three-dimensional.
    pub fn is_3d(&self) -> bool {
        matches!(self, GradKind::Scaled3d { .. })
    }
}

/// Strain-displacement matrix at a quadrature point, node-major local DOFs.
pub fn strain_matrix(kind: GradKind, qp: &QuadPoint) -> DMatrix<f64> {
    let nn = qp.n.len();
    let nc = kind.ncomp();
    let mut b = DMatrix::zeros(kind.nstrain(), nn * nc);
    for a in 0..nn {
        let [dx, dy, dz] = qp.dn[a];
        let c = a * nc;
        match kind {
            GradKind::Scaled3d { transverse_scale: s } => {
                b[(0, c)] = dx;
                b[(1, c + 1)] = dy;
                b[(2, c + 2)] = s * dz;
                b[(3, c + 1)] = s * dz;
                b[(3, c + 2)] = dy;
                b[(4, c)] = s * dz;
                b[(4, c + 2)] = dx;
                b[(5, c)] = dy;
                b[(5, c + 1)] = dx;
            }
            GradKind::Planar => {
                b[(0, c)] = dx;
                b[(1, c + 1)] = dy;
                b[(2, c)] = dy;
                b[(2, c + 1)] = dx;
            }
            GradKind::IotaGrad => {
                b[(0, c)] = dx;
                b[(1, c + 1)] = dy;
                b[(3, c + 2)] = dy;
                b[(4, c + 2)] = dx;
                b[(5, c)] = dy;
                b[(5, c + 1)] = dx;
            }
            GradKind::TransverseValue => {
                let v = qp.n[a];
                b[(2, c + 2)] = v;
                b[(3, c + 1)] = v;
                b[(4, c)] = v;
            }
        }
    }
    b
}

/// Quadrature points of a Lagrange element of the given kind.
pub fn lagrange_points(kind: GradKind, h: [f64; 3]) -> Vec<QuadPoint> {
    if kind.is_3d() {
        q1_points_3d(h, 2)
    } else {
        q1_points_2d([h[0], h[1]], 2)
    }
}

/// `∫ Bᵀ D B` over an element.
pub fn element_stiffness(kind: GradKind, h: [f64; 3], d: &DMatrix<f64>) -> DMatrix<f64> {
    let pts = lagrange_points(kind, h);
    let mut ke = DMatrix::zeros(pts[0].n.len() * kind.ncomp(), pts[0].n.len() * kind.ncomp());
    for qp in &pts {
        let b = strain_matrix(kind, qp);
        ke += b.transpose() * d * &b * qp.w;
    }
    ke
}

/// `∫ B1ᵀ D B2` over an element, for mixed forms.
pub fn element_cross(k1: GradKind, k2: GradKind, h: [f64; 3], d: &DMatrix<f64>) -> DMatrix<f64> {
    let pts = lagrange_points(k1, h);
    let mut ke = DMatrix::zeros(pts[0].n.len() * k1.ncomp(), pts[0].n.len() * k2.ncomp());
    for qp in &pts {
        ke += strain_matrix(k1, qp).transpose() * d * strain_matrix(k2, qp) * qp.w;
    }
    ke
}

/// Consistent mass `∫ ρ u·v` of a Lagrange element with `ncomp` components.
pub fn element_mass(kind: GradKind, h: [f64; 3], rho: f64) -> DMatrix<f64> {
    let pts = lagrange_points(kind, h);
    let nn = pts[0].n.len();
    let nc = kind.ncomp();
    let mut me = DMatrix::zeros(nn * nc, nn * nc);
    for qp in &pts {
        for a in 0..nn {
            for b in 0..nn {
                let v = rho * qp.n[a] * qp.n[b] * qp.w;
                for c in 0..nc {
                    me[(a * nc + c, b * nc + c)] += v;
                }
            }
        }
    }
    me
}

/// Voigt matrix as a dynamic matrix.
pub fn dmat6(c: &Voigt6) -> DMatrix<f64> {
    DMatrix::from_fn(6, 6, |i, j| c[(i, j)])
}

/// Planar Voigt matrix as a dynamic matrix.
pub fn dmat3(c: &Voigt3) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| c[(i, j)])
}

/// Assembles stiffness and mass of an H¹ vector form.
pub fn assemble_h1(
    elements: &[ElementSpec],
    dofs: &DofMap,
    kind: GradKind,
    tensor: &(dyn Fn(&ElementSpec) -> DMatrix<f64> + Sync),
    density: &(dyn Fn(&ElementSpec) -> f64 + Sync),
) -> Result<(SparseMatrix, SparseMatrix)> {
    let local: Vec<_> = elements
        .par_iter()
        .map(|e| {
            let d = tensor(e);
            (
                dofs.element_dofs(&e.nodes),
                element_stiffness(kind, e.h, &d),
                element_mass(kind, e.h, density(e)),
            )
        })
        .collect();
    let mut ka = Assembler::new(dofs.ndof);
    let mut ma = Assembler::new(dofs.ndof);
    for (ld, ke, me) in &local {
        ka.add_element(ld, ke);
        ma.add_element(ld, me);
    }
    Ok((ka.finish()?, ma.finish()?))
}

/// Assembles the mixed form `∫ (B1 u)ᵀ D (B2 v)` of two strain kinds sharing one DOF map.
pub fn assemble_h1_cross(
    elements: &[ElementSpec],
    dofs: &DofMap,
    k1: GradKind,
    k2: GradKind,
    tensor: &(dyn Fn(&ElementSpec) -> DMatrix<f64> + Sync),
) -> Result<SparseMatrix> {
    let local: Vec<_> = elements
        .par_iter()
        .map(|e| (dofs.element_dofs(&e.nodes), element_cross(k1, k2, e.h, &tensor(e))))
        .collect();
    let mut a = Assembler::new(dofs.ndof);
    for (ld, ke) in &local {
        a.add_element(ld, ke);
    }
    a.finish()
}

/// Assembles `∫ (B u)ᵀ D E(x)` for a prescribed strain field `E`, giving the load of a corrector problem.
pub fn assemble_h1_strain_load(
    elements: &[ElementSpec],
    dofs: &DofMap,
    kind: GradKind,
    tensor: &(dyn Fn(&ElementSpec) -> DMatrix<f64> + Sync),
    strain: &(dyn Fn(&ElementSpec, [f64; 3]) -> Vec<f64> + Sync),
) -> Vec<f64> {
    let local: Vec<_> = elements
        .par_iter()
        .map(|e| {
            let d = tensor(e);
            let pts = lagrange_points(kind, e.h);
            let mut fe = vec![0.0; pts[0].n.len() * kind.ncomp()];
            for qp in &pts {
                let x = [e.origin[0] + qp.x[0], e.origin[1] + qp.x[1], e.origin[2] + qp.x[2]];
                let eps = nalgebra::DVector::from_vec(strain(e, x));
                let b = strain_matrix(kind, qp);
                let g = b.transpose() * (&d * eps) * qp.w;
                for (fi, gi) in fe.iter_mut().zip(g.iter()) {
                    *fi += gi;
                }
            }
            (dofs.element_dofs(&e.nodes), fe)
        })
        .collect();
    let mut f = vec![0.0; dofs.ndof];
    for (ld, fe) in &local {
        add_element_vector(&mut f, ld, fe);
    }
    f
}

/// Energy `∫ (E + B u)ᵀ D (E + B u)` of a corrector field `u` (given by unknowns) over the elements.
pub fn h1_strain_energy(
    elements: &[ElementSpec],
    dofs: &DofMap,
    kind: GradKind,
    tensor: &(dyn Fn(&ElementSpec) -> DMatrix<f64> + Sync),
    strain: &(dyn Fn(&ElementSpec, [f64; 3]) -> Vec<f64> + Sync),
    u: &[f64],
) -> f64 {
    elements
        .par_iter()
        .map(|e| {
            let d = tensor(e);
            let ld = dofs.element_dofs(&e.nodes);
            let ue = nalgebra::DVector::from_iterator(
                ld.len(),
                ld.iter().map(|x| x.map(|i| u[i]).unwrap_or(0.0)),
            );
            let mut s = 0.0;
            for qp in &lagrange_points(kind, e.h) {
                let x = [e.origin[0] + qp.x[0], e.origin[1] + qp.x[1], e.origin[2] + qp.x[2]];
                let eps = nalgebra::DVector::from_vec(strain(e, x)) + strain_matrix(kind, qp) * &ue;
                s += eps.dot(&(&d * &eps)) * qp.w;
            }
            s
        })
        .sum()
}

/// Consistent load `∫ f·v` of a vector body force.
pub fn assemble_h1_load(
    elements: &[ElementSpec],
    dofs: &DofMap,
    kind: GradKind,
    force: &(dyn Fn(&ElementSpec, [f64; 3]) -> Vec<f64> + Sync),
) -> Vec<f64> {
    let nc = kind.ncomp();
    let local: Vec<_> = elements
        .par_iter()
        .map(|e| {
            let pts = lagrange_points(kind, e.h);
            let nn = pts[0].n.len();
            let mut fe = vec![0.0; nn * nc];
            for qp in &pts {
                let x = [e.origin[0] + qp.x[0], e.origin[1] + qp.x[1], e.origin[2] + qp.x[2]];
                let f = force(e, x);
                for a in 0..nn {
                    for c in 0..nc {
                        fe[a * nc + c] += f[c] * qp.n[a] * qp.w;
                    }
                }
            }
            (dofs.element_dofs(&e.nodes), fe)
        })
        .collect();
    let mut f = vec![0.0; dofs.ndof];
    for (ld, fe) in &local {
        add_element_vector(&mut f, ld, fe);
    }
    f
}

/// Curvature-displacement matrix `(∂11 w, ∂22 w, 2 ∂12 w)` of the BFS element.
pub fn hessian_matrix(bp: &BfsPoint) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(3, 16);
    for i in 0..16 {
        b[(0, i)] = bp.d2n[i][0];
        b[(1, i)] = bp.d2n[i][1];
        b[(2, i)] = 2.0 * bp.d2n[i][2];
    }
    b
}

/// BFS element stiffness `∫ ∇²u : D ∇²v` and mass `∫ ρ u v`.
pub fn bfs_element(h: [f64; 2], d: &Voigt3, rho: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let dd = dmat3(d);
    let mut ke = DMatrix::zeros(16, 16);
    let mut me = DMatrix::zeros(16, 16);
    for bp in bfs_points(h, 4) {
        let b = hessian_matrix(&bp);
        ke += b.transpose() * &dd * &b * bp.w;
        for i in 0..16 {
            for j in 0..16 {
                me[(i, j)] += rho * bp.n[i] * bp.n[j] * bp.w;
            }
        }
    }
    (ke, me)
}

/// Assembles stiffness and mass of an H² scalar form with BFS elements (4 DOFs per node).
pub fn assemble_h2(
    elements: &[ElementSpec],
    dofs: &DofMap,
    tensor: &(dyn Fn(&ElementSpec) -> Voigt3 + Sync),
    density: &(dyn Fn(&ElementSpec) -> f64 + Sync),
) -> Result<(SparseMatrix, SparseMatrix)> {
    let local: Vec<_> = elements
        .par_iter()
        .map(|e| {
            let (ke, me) = bfs_element([e.h[0], e.h[1]], &tensor(e), density(e));
            (dofs.element_dofs(&e.nodes), ke, me)
        })
        .collect();
    let mut ka = Assembler::new(dofs.ndof);
    let mut ma = Assembler::new(dofs.ndof);
    for (ld, ke, me) in &local {
        ka.add_element(ld, ke);
        ma.add_element(ld, me);
    }
    Ok((ka.finish()?, ma.finish()?))
}

/// Load `∫ (∇²v)ᵀ D K(x)` of a BFS corrector problem with prescribed curvature `K`.
pub fn assemble_h2_curvature_load(
    elements: &[ElementSpec],
    dofs: &DofMap,
    tensor: &(dyn Fn(&ElementSpec) -> Voigt3 + Sync),
    curvature: &(dyn Fn(&ElementSpec, [f64; 2]) -> [f64; 3] + Sync),
) -> Vec<f64> {
    let local: Vec<_> = elements
        .par_iter()
        .map(|e| {
            let dd = dmat3(&tensor(e));
            let mut fe = vec![0.0; 16];
            for bp in bfs_points([e.h[0], e.h[1]], 4) {
                let x = [e.origin[0] + bp.x[0], e.origin[1] + bp.x[1]];
                let k = nalgebra::DVector::from_row_slice(&curvature(e, x));
                let g = hessian_matrix(&bp).transpose() * (&dd * k) * bp.w;
                for (fi, gi) in fe.iter_mut().zip(g.iter()) {
                    *fi += gi;
                }
            }
            (dofs.element_dofs(&e.nodes), fe)
        })
        .collect();
    let mut f = vec![0.0; dofs.ndof];
    for (ld, fe) in &local {
        add_element_vector(&mut f, ld, fe);
    }
    f
}

/// Energy `∫ (K + ∇²u)ᵀ D (K + ∇²u)` of a BFS corrector.
pub fn h2_curvature_energy(
    elements: &[ElementSpec],
    dofs: &DofMap,
    tensor: &(dyn Fn(&ElementSpec) -> Voigt3 + Sync),
    curvature: &(dyn Fn(&ElementSpec, [f64; 2]) -> [f64; 3] + Sync),
    u: &[f64],
) -> f64 {
    elements
        .par_iter()
        .map(|e| {
            let dd = dmat3(&tensor(e));
            let ld = dofs.element_dofs(&e.nodes);
            let ue = nalgebra::DVector::from_iterator(16, ld.iter().map(|x| x.map(|i| u[i]).unwrap_or(0.0)));
            let mut s = 0.0;
            for bp in bfs_points([e.h[0], e.h[1]], 4) {
                let x = [e.origin[0] + bp.x[0], e.origin[1] + bp.x[1]];
                let k = nalgebra::DVector::from_row_slice(&curvature(e, x)) + hessian_matrix(&bp) * &ue;
                s += k.dot(&(&dd * &k)) * bp.w;
            }
            s
        })
        .sum()
}

/// Consistent load `∫ f v + g·∇v` of a BFS field.
pub fn assemble_h2_load(
    elements: &[ElementSpec],
    dofs: &DofMap,
    force: &(dyn Fn(&ElementSpec, [f64; 2]) -> (f64, [f64; 2]) + Sync),
) -> Vec<f64> {
    let local: Vec<_> = elements
        .par_iter()
        .map(|e| {
            let mut fe = vec![0.0; 16];
            for bp in bfs_points([e.h[0], e.h[1]], 4) {
                let x = [e.origin[0] + bp.x[0], e.origin[1] + bp.x[1]];
                let (f, g) = force(e, x);
                for i in 0..16 {
                    fe[i] += (f * bp.n[i] + g[0] * bp.dn[i][0] + g[1] * bp.dn[i][1]) * bp.w;
                }
            }
            (dofs.element_dofs(&e.nodes), fe)
        })
        .collect();
    let mut f = vec![0.0; dofs.ndof];
    for (ld, fe) in &local {
        add_element_vector(&mut f, ld, fe);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{isotropic, kept_block};

    /// Closed-form Q1 plane-strain stiffness on `[0,a]×[0,b]` from exact 1D integrals.
    fn hand_q1_stiffness(a: f64, b: f64, d: &DMatrix<f64>) -> DMatrix<f64> {
        // 1D linear functions on [0,L]: ∫φ'φ' = ±1/L, ∫φφ = L/3 or L/6, ∫φ'φ = ±1/2.
        let kk = |l: f64, i: usize, j: usize| if i == j { 1.0 / l } else { -1.0 / l };
        let mm = |l: f64, i: usize, j: usize| if i == j { l / 3.0 } else { l / 6.0 };
        let dm = |i: usize, j: usize| {
            let si = if i == 0 { -1.0 } else { 1.0 };
            let _ = j;
            si * 0.5
        };
        let mut k = DMatrix::zeros(8, 8);
        // ∫ ∂p N_A ∂q N_B for node A=(ia,ja), B=(ib,jb).
        let g = |p: usize, q: usize, ia: usize, ja: usize, ib: usize, jb: usize| -> f64 {
            match (p, q) {
                (0, 0) => kk(a, ia, ib) * mm(b, ja, jb),
                (1, 1) => mm(a, ia, ib) * kk(b, ja, jb),
                (0, 1) => dm(ia, ib) * dm(jb, ja),
                _ => dm(ib, ia) * dm(ja, jb),
            }
        };
        // strain rows: e11 = ∂1 u1, e22 = ∂2 u2, γ = ∂2 u1 + ∂1 u2
        let terms = |c: usize| -> Vec<(usize, usize)> {
            // (strain row, derivative direction) contributions of displacement component c
            if c == 0 {
                vec![(0, 0), (2, 1)]
            } else {
                vec![(1, 1), (2, 0)]
            }
        };
        for na in 0..4 {
            for nb in 0..4 {
                let (ia, ja) = (na % 2, na / 2);
                let (ib, jb) = (nb % 2, nb / 2);
                for ca in 0..2 {
                    for cb in 0..2 {
                        let mut s = 0.0;
                        for &(ra, pa) in &terms(ca) {
                            for &(rb, pb) in &terms(cb) {
                                s += d[(ra, rb)] * g(pa, pb, ia, ja, ib, jb);
                            }
                        }
                        k[(2 * na + ca, 2 * nb + cb)] = s;
                    }
                }
            }
        }
        k
    }

    #[test]
    fn q1_planar_element_matches_hand_integration() {
        let d = dmat3(&kept_block(&isotropic(1.0, 1.0)));
        let ke = element_stiffness(GradKind::Planar, [0.7, 0.4, 0.0], &d);
        let hand = hand_q1_stiffness(0.7, 0.4, &d);
        assert!((ke - hand).abs().max() < 1e-12);
    }

    #[test]
    fn q1_patch_test_energy() {
        let c = isotropic(1.0, 1.0);
        let h = [0.5, 0.3, 0.2];
        let ke = element_stiffness(GradKind::Scaled3d { transverse_scale: 1.0 }, h, &dmat6(&c));
        // u = G x with constant gradient G
        let g = nalgebra::Matrix3::new(0.1, 0.3, -0.2, 0.05, -0.4, 0.25, 0.0, 0.15, 0.3);
        let pts = q1_points_3d(h, 2);
        let _ = pts;
        let mut u = nalgebra::DVector::zeros(24);
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    let a = i + 2 * j + 4 * k;
                    let x = nalgebra::Vector3::new(i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]);
                    let ux = g * x;
                    for c in 0..3 {
                        u[3 * a + c] = ux[c];
                    }
                }
            }
        }
        let eps = 0.5 * (g + g.transpose());
        let exact = crate::tensor::energy(&c, &eps) * h[0] * h[1] * h[2];
        assert!((u.dot(&(&ke * &u)) - exact).abs() < 1e-13);
        // rigid translation in the kernel
        let t = nalgebra::DVector::from_fn(24, |i, _| [1.0, -2.0, 0.5][i % 3]);
        assert!((&ke * t).abs().max() < 1e-13);
    }

    #[test]
    fn bfs_quadratic_energy() {
        let d = kept_block(&isotropic(1.0, 2.0));
        let h = [0.25, 0.5];
        let (ke, _) = bfs_element(h, &d, 1.0);
        // u = x^2/2: w = x^2/2, w_x = x, w_y = 0, w_xy = 0
        let mut u = nalgebra::DVector::zeros(16);
        for b in 0..2 {
            for a in 0..2 {
                let x = a as f64 * h[0];
                let base = 4 * (a + 2 * b);
                u[base] = 0.5 * x * x;
                u[base + 1] = x;
            }
        }
        assert!((u.dot(&(&ke * &u)) - d[(0, 0)] * h[0] * h[1]).abs() < 1e-12);
        // affine fields in the kernel
        let mut aff = nalgebra::DVector::zeros(16);
        for b in 0..2 {
            for a in 0..2 {
                let (x, y) = (a as f64 * h[0], b as f64 * h[1]);
                let base = 4 * (a + 2 * b);
                aff[base] = 1.0 + 2.0 * x - 3.0 * y;
                aff[base + 1] = 2.0;
                aff[base + 2] = -3.0;
            }
        }
        assert!((&ke * aff).abs().max() < 1e-11);
    }

    #[test]
    fn transverse_value_kernel_has_no_derivatives() {
        let qp = &q1_points_2d([1.0, 1.0], 2)[0];
        let b = strain_matrix(GradKind::TransverseValue, qp);
        assert_eq!(b[(0, 0)], 0.0);
        assert!((b[(2, 2)] - qp.n[0]).abs() < 1e-15);
    }
}
