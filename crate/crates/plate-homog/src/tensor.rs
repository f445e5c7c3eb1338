//! Elasticity tensors in Voigt form, the embeddings `iota` and `iota1`,
//! pointwise reduced tensors and coercivity checks.
//!
//! Strain vectors use the engineering ordering `(e11, e22, e33, 2e23, 2e13, 2e12)`,
//! so the energy density is `eᵀ C e`. Planar strains use `(e11, e22, 2e12)`.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Matrix6, SymmetricEigen, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voigt matrix of a three-dimensional elasticity tensor.
pub type Voigt6 = Matrix6<f64>;
/// Voigt matrix of a planar elasticity tensor on symmetric 2×2 matrices.
pub type Voigt3 = Matrix3<f64>;

/// Voigt indices of the in-plane strain components `(11, 22, 12)`.
pub const KEPT: [usize; 3] = [0, 1, 5];
/// Voigt indices of the transverse strain components `(33, 23, 13)`.
pub const TRANSVERSE: [usize; 3] = [2, 3, 4];

/// Isotropic tensor with Lamé constants `lambda`, `mu`.
pub fn isotropic(lambda: f64, mu: f64) -> Voigt6 {
    let mut c = Voigt6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] = lambda + 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }
    c
}

/// Voigt vector of a symmetric 3×3 strain.
pub fn strain_to_voigt(e: &Matrix3<f64>) -> Vector6<f64> {
    Vector6::new(
        e[(0, 0)],
        e[(1, 1)],
        e[(2, 2)],
        e[(1, 2)] + e[(2, 1)],
        e[(0, 2)] + e[(2, 0)],
        e[(0, 1)] + e[(1, 0)],
    )
}

/// Symmetric 3×3 strain of a Voigt vector.
pub fn voigt_to_strain(v: &Vector6<f64>) -> Matrix3<f64> {
    Matrix3::new(
        v[0],
        0.5 * v[5],
        0.5 * v[4],
        0.5 * v[5],
        v[1],
        0.5 * v[3],
        0.5 * v[4],
        0.5 * v[3],
        v[2],
    )
}

/// Planar Voigt vector `(a11, a22, 2 a12)` of a symmetric 2×2 matrix.
pub fn sym2_to_voigt(a: &Matrix2<f64>) -> Vector3<f64> {
    Vector3::new(a[(0, 0)], a[(1, 1)], a[(0, 1)] + a[(1, 0)])
}

/// Symmetric 2×2 matrix of a planar Voigt vector.
pub fn voigt_to_sym2(v: &Vector3<f64>) -> Matrix2<f64> {
    Matrix2::new(v[0], 0.5 * v[2], 0.5 * v[2], v[1])
}

/// Energy density `C ξ : ξ` of a symmetric strain.
pub fn energy(c: &Voigt6, xi: &Matrix3<f64>) -> f64 {
    let v = strain_to_voigt(xi);
    v.dot(&(c * v))
}

/// Energy density `C ξ : ξ` by direct index summation over the fourth-order tensor.
pub fn energy_by_indices(c: &Voigt6, xi: &Matrix3<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    s += c[(voigt_index(i, j), voigt_index(k, l))] * xi[(i, j)] * xi[(k, l)];
                }
            }
        }
    }
    s
}

/// Voigt index of the tensor index pair `(i, j)`.
pub fn voigt_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) => 3,
        (0, 2) => 4,
        _ => 5,
    }
}

/// Embedding of a 2×2 matrix into the top-left block of a 3×3 matrix.
pub fn iota(m: &Matrix2<f64>) -> Matrix3<f64> {
    let mut r = Matrix3::zeros();
    r.fixed_view_mut::<2, 2>(0, 0).copy_from(m);
    r
}

/// Embedding of a 3×2 matrix into the first two columns of a 3×3 matrix.
pub fn iota_3x2(m: &Matrix3x2<f64>) -> Matrix3<f64> {
    let mut r = Matrix3::zeros();
    r.fixed_view_mut::<3, 2>(0, 0).copy_from(m);
    r
}

/// Symmetric matrix with zero top-left block, `a1, a2` in the third row and column and `a3` at `(3,3)`.
pub fn iota1(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, a[0], 0.0, 0.0, a[1], a[0], a[1], a[2])
}

fn sub3(c: &Voigt6, rows: [usize; 3], cols: [usize; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| c[(rows[i], cols[j])])
}

/// In-plane block of the Voigt matrix, without transverse relaxation.
pub fn kept_block(c: &Voigt6) -> Voigt3 {
    sub3(c, KEPT, KEPT)
}

/// Reduced tensor `C^r A:A = min_d C[iota(A) + iota1(d)]:[iota(A) + iota1(d)]`,
/// computed as the Schur complement eliminating the transverse strains.
pub fn reduced_tensor(c: &Voigt6) -> Result<Voigt3> {
    let ckk = sub3(c, KEPT, KEPT);
    let ckt = sub3(c, KEPT, TRANSVERSE);
    let ctt = sub3(c, TRANSVERSE, TRANSVERSE);
    let chol = ctt
        .cholesky()
        .ok_or_else(|| Error::Coercivity("transverse block is not positive definite".into()))?;
    let r = ckk - ckt * chol.solve(&ckt.transpose());
    Ok(0.5 * (r + r.transpose()))
}

/// Optimal transverse vector `d` for the reduction of `iota(A)`.
pub fn reduced_minimizer(c: &Voigt6, a: &Matrix2<f64>) -> Result<Vector3<f64>> {
    let ctt = sub3(c, TRANSVERSE, TRANSVERSE);
    let ctk = sub3(c, TRANSVERSE, KEPT);
    let chol = ctt
        .cholesky()
        .ok_or_else(|| Error::Coercivity("transverse block is not positive definite".into()))?;
    let t = -chol.solve(&(ctk * sym2_to_voigt(a)));
    Ok(Vector3::new(0.5 * t[2], 0.5 * t[1], t[0]))
}

/// Membrane and bending parts of the pointwise reduced soft tensor.
pub fn c0_red(c0: &Voigt6) -> Result<(Voigt3, Voigt3)> {
    let memb = reduced_tensor(c0)?;
    Ok((memb, memb / 12.0))
}

/// Quadratic form value `D A:A` of a planar Voigt tensor.
pub fn planar_energy(d: &Voigt3, a: &Matrix2<f64>) -> f64 {
    let v = sym2_to_voigt(a);
    v.dot(&(d * v))
}

/// Outcome of a coercivity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    /// Smallest eigenvalue of the tensor on symmetric matrices.
    pub min_eig: f64,
    /// Largest eigenvalue of the tensor on symmetric matrices.
    pub max_eig: f64,
    /// Whether `nu <= min_eig`.
    pub lower_ok: bool,
    /// Whether `max_eig <= 1/nu`.
    pub upper_ok: bool,
    /// Whether both bounds hold.
    pub pass: bool,
    /// `min(min_eig - nu, 1/nu - max_eig)`.
    pub margin: f64,
}

/// Eigenvalues of the tensor as a map on symmetric matrices with the Frobenius inner product.
pub fn tensor_eigenvalues(c: &Voigt6) -> Vector6<f64> {
    let s = Vector6::new(1.0, 1.0, 1.0, 2f64.sqrt(), 2f64.sqrt(), 2f64.sqrt());
    let scaled = Matrix6::from_fn(|i, j| s[i] * c[(i, j)] * s[j]);
    let mut e = SymmetricEigen::new(0.5 * (scaled + scaled.transpose())).eigenvalues;
    e.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    e
}

/// Eigenvalues of a planar tensor on symmetric 2×2 matrices with the Frobenius inner product.
pub fn planar_eigenvalues(d: &Voigt3) -> Vector3<f64> {
    let s = Vector3::new(1.0, 1.0, 2f64.sqrt());
    let scaled = Matrix3::from_fn(|i, j| s[i] * d[(i, j)] * s[j]);
    let mut e = SymmetricEigen::new(0.5 * (scaled + scaled.transpose())).eigenvalues;
    e.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    e
}

/// Checks `nu |ξ|² <= C ξ:ξ <= nu⁻¹ |ξ|²` on symmetric matrices.
pub fn check_coercivity(c: &Voigt6, nu: f64) -> CoercivityReport {
    let e = tensor_eigenvalues(c);
    let (min_eig, max_eig) = (e[0], e[5]);
    let margin = if nu > 0.0 {
        (min_eig - nu).min(1.0 / nu - max_eig)
    } else {
        f64::NEG_INFINITY
    };
    let lower_ok = nu > 0.0 && min_eig >= nu;
    let upper_ok = nu > 0.0 && max_eig <= 1.0 / nu;
    CoercivityReport {
        min_eig,
        max_eig,
        lower_ok,
        upper_ok,
        pass: lower_ok && upper_ok,
        margin,
    }
}

/// Whether the tensor has no coupling between in-plane/normal strains and transverse shears.
pub fn is_planar_symmetric(c: &Voigt6, tol: f64) -> bool {
    let scale = c.abs().max().max(1.0);
    [0, 1, 2, 5]
        .iter()
        .all(|&i| [3, 4].iter().all(|&j| c[(i, j)].abs() <= tol * scale))
}

/// Tensor input as stored in material files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorInput {
    /// Upper triangle of the Voigt matrix, row by row (21 entries).
    Voigt(Vec<f64>),
    /// Isotropic tensor by Lamé constants.
    Isotropic {
        /// Lamé constants.
        isotropic: Lame,
    },
}

/// Lamé constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lame {
    /// First Lamé constant.
    pub lambda: f64,
    /// Shear modulus.
    pub mu: f64,
}

impl TensorInput {
    /// Voigt matrix of the input.
    pub fn to_voigt(&self) -> Result<Voigt6> {
        match self {
            TensorInput::Isotropic { isotropic } => Ok(isotropic_from(isotropic)),
            TensorInput::Voigt(v) => {
                if v.len() != 21 {
                    return Err(Error::Config(format!(
                        "expected 21 upper-triangle Voigt entries, got {}",
                        v.len()
                    )));
                }
                let mut c = Voigt6::zeros();
                let mut k = 0;
                for i in 0..6 {
                    for j in i..6 {
                        c[(i, j)] = v[k];
                        c[(j, i)] = v[k];
                        k += 1;
                    }
                }
                Ok(c)
            }
        }
    }
}

fn isotropic_from(l: &Lame) -> Voigt6 {
    isotropic(l.lambda, l.mu)
}

/// Material file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialInput {
    /// Soft inclusion tensor.
    #[serde(rename = "C0")]
    pub c0: TensorInput,
    /// Stiff matrix tensor.
    #[serde(rename = "C1")]
    pub c1: TensorInput,
    /// Inclusion density.
    pub rho0: f64,
    /// Matrix density.
    pub rho1: f64,
    /// Coercivity constant.
    pub nu: f64,
}

/// Physical material data of the two phases.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSpec {
    /// Soft inclusion tensor.
    pub c0: Voigt6,
    /// Stiff matrix tensor.
    pub c1: Voigt6,
    /// Inclusion density.
    pub rho0: f64,
    /// Matrix density.
    pub rho1: f64,
    /// Coercivity constant.
    pub nu: f64,
}

impl MaterialSpec {
    /// Validates symmetry, coercivity and density bounds.
    pub fn new(c0: Voigt6, c1: Voigt6, rho0: f64, rho1: f64, nu: f64) -> Result<Self> {
        for (name, c) in [("C0", &c0), ("C1", &c1)] {
            if (c - c.transpose()).abs().max() > 1e-12 * c.abs().max().max(1.0) {
                return Err(Error::Config(format!("{name} is not symmetric")));
            }
            let rep = check_coercivity(c, nu);
            if !rep.pass {
                return Err(Error::Coercivity(format!(
                    "{name}: eigenvalues in [{}, {}] not within [{nu}, {}]",
                    rep.min_eig,
                    rep.max_eig,
                    1.0 / nu
                )));
            }
        }
        if !(rho0 > 0.0 && rho1 > 0.0 && rho0.is_finite() && rho1.is_finite()) {
            return Err(Error::Config("densities must be positive and finite".into()));
        }
        Ok(Self {
            c0,
            c1,
            rho0,
            rho1,
            nu,
        })
    }

    /// Isotropic phases with the given Lamé constants.
    pub fn isotropic(l0: Lame, l1: Lame, rho0: f64, rho1: f64, nu: f64) -> Result<Self> {
        Self::new(isotropic_from(&l0), isotropic_from(&l1), rho0, rho1, nu)
    }

    /// Builds the material from its file representation.
    pub fn from_input(inp: &MaterialInput) -> Result<Self> {
        Self::new(inp.c0.to_voigt()?, inp.c1.to_voigt()?, inp.rho0, inp.rho1, inp.nu)
    }

    /// Whether both phases are planar symmetric.
    pub fn planar_symmetric(&self) -> bool {
        is_planar_symmetric(&self.c0, 1e-12) && is_planar_symmetric(&self.c1, 1e-12)
    }

    /// Tensor of phase `soft` (true for the inclusion).
    pub fn tensor(&self, soft: bool) -> &Voigt6 {
        if soft {
            &self.c0
        } else {
            &self.c1
        }
    }

    /// Density of phase `soft` (true for the inclusion).
    pub fn density(&self, soft: bool) -> f64 {
        if soft {
            self.rho0
        } else {
            self.rho1
        }
    }
}

/// Voigt matrix of the 90° rotation about the `x3` axis acting on planar Voigt vectors.
pub fn planar_rotation90() -> Matrix3<f64> {
    Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0)
}
