//! Sparse symmetric matrices, element assembly, factorizations and kernel-aware solves.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse column matrix of `f64`.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let inner = SparseColMat::try_new_from_triplets(nrows, ncols, &t)
            .map_err(|e| Error::Solver(format!("sparse construction: {e:?}")))?;
        Ok(Self { inner })
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t).expect("identity")
    }

    /// Diagonal matrix.
    pub fn diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t).expect("diagonal")
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.inner.val().len()
    }

    /// Underlying faer matrix.
    pub fn as_faer(&self) -> &SparseColMat<usize, f64> {
        &self.inner
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let sym = self.inner.symbolic();
        let cp = sym.col_ptr();
        let ri = sym.row_idx();
        let v = self.inner.val();
        let mut out = Vec::with_capacity(v.len());
        for j in 0..self.ncols() {
            for p in cp[j]..cp[j + 1] {
                out.push((ri[p], j, v[p]));
            }
        }
        out
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.matvec_add(x, 1.0, &mut y);
        y
    }

    /// `y += s A x`.
    pub fn matvec_add(&self, x: &[f64], s: f64, y: &mut [f64]) {
        let sym = self.inner.symbolic();
        let cp = sym.col_ptr();
        let ri = sym.row_idx();
        let v = self.inner.val();
        for j in 0..self.ncols() {
            let xj = s * x[j];
            if xj == 0.0 {
                continue;
            }
            for p in cp[j]..cp[j + 1] {
                y[ri[p]] += v[p] * xj;
            }
        }
    }

    /// Bilinear form `xᵀ A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    /// `a A + b B`.
    pub fn lin_comb(a: f64, ma: &SparseMatrix, b: f64, mb: &SparseMatrix) -> Result<Self> {
        let mut t: Vec<_> = ma.triplets().into_iter().map(|(i, j, v)| (i, j, a * v)).collect();
        t.extend(mb.triplets().into_iter().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(ma.nrows(), ma.ncols(), &t)
    }

    /// Scaled copy.
    pub fn scaled(&self, s: f64) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, s * v)).collect();
        Self::from_triplets(self.nrows(), self.ncols(), &t).expect("scaled")
    }

    /// Principal submatrix on the kept indices.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.nrows()];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .filter(|&(i, j, _)| pos[i] != usize::MAX && pos[j] != usize::MAX)
            .map(|(i, j, v)| (pos[i], pos[j], v))
            .collect();
        Self::from_triplets(keep.len(), keep.len(), &t)
    }

    /// Dense copy.
    pub fn to_dense(&self) -> Mat<f64> {
        let mut d = Mat::<f64>::zeros(self.nrows(), self.ncols());
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.inner.val().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.inner.val().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `max |A - Aᵀ| / max |A|`.
    pub fn symmetry_error(&self) -> f64 {
        let d = SparseMatrix::lin_comb(1.0, self, -1.0, &self.transpose()).expect("shape");
        d.max_abs() / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Transpose.
    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols(), self.nrows(), &t).expect("transpose")
    }

    /// Diagonal entries.
    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows().min(self.ncols())];
        for (i, j, v) in self.triplets() {
            if i == j {
                d[i] += v;
            }
        }
        d
    }
}

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += s x`.
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Accumulates element contributions into a sparse matrix.
#[derive(Debug, Clone)]
pub struct Assembler {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Assembler {
    /// Empty square assembler of size `n`.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    /// Adds a single entry.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// Adds an element matrix; eliminated local DOFs are skipped.
    pub fn add_element(&mut self, dofs: &[Option<usize>], ke: &DMatrix<f64>) {
        for (a, da) in dofs.iter().enumerate() {
            let Some(i) = da else { continue };
            for (b, db) in dofs.iter().enumerate() {
                let Some(j) = db else { continue };
                self.add(*i, *j, ke[(a, b)]);
            }
        }
    }

    /// Builds the matrix.
    pub fn finish(self) -> Result<SparseMatrix> {
        SparseMatrix::from_triplets(self.n, self.n, &self.entries)
    }
}

/// Adds an element vector into a global vector.
pub fn add_element_vector(global: &mut [f64], dofs: &[Option<usize>], fe: &[f64]) {
    for (d, v) in dofs.iter().zip(fe) {
        if let Some(i) = d {
            global[*i] += v;
        }
    }
}

/// Sparse factorization of a square matrix.
pub enum Factor {
    /// Cholesky factorization of a symmetric positive definite matrix.
    Llt(faer::sparse::linalg::solvers::Llt<usize, f64>),
    /// LU factorization with partial pivoting.
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

impl std::fmt::Debug for Factor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Factor::Llt(_) => write!(f, "Factor::Llt"),
            Factor::Lu(_) => write!(f, "Factor::Lu"),
        }
    }
}

impl Factor {
    /// Sparse Cholesky factorization (fill-reducing ordering chosen by faer).
    pub fn cholesky(a: &SparseMatrix) -> Result<Self> {
        a.inner
            .sp_cholesky(Side::Lower)
            .map(Factor::Llt)
            .map_err(|e| Error::Solver(format!("Cholesky failed: {e:?}")))
    }

    /// Sparse LU factorization.
    pub fn lu(a: &SparseMatrix) -> Result<Self> {
        a.inner
            .sp_lu()
            .map(Factor::Lu)
            .map_err(|e| Error::Solver(format!("LU failed: {e:?}")))
    }

    /// Cholesky when possible, LU otherwise.
    pub fn spd_or_lu(a: &SparseMatrix) -> Result<Self> {
        Self::cholesky(a).or_else(|_| Self::lu(a))
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        match self {
            Factor::Llt(f) => f.solve_in_place(m.as_mut()),
            Factor::Lu(f) => f.solve_in_place(m.as_mut()),
        }
        (0..b.len()).map(|i| m[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides.
    pub fn solve_many(&self, bs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if bs.is_empty() {
            return Vec::new();
        }
        let n = bs[0].len();
        let mut m = Mat::<f64>::from_fn(n, bs.len(), |i, j| bs[j][i]);
        match self {
            Factor::Llt(f) => f.solve_in_place(m.as_mut()),
            Factor::Lu(f) => f.solve_in_place(m.as_mut()),
        }
        (0..bs.len())
            .map(|j| (0..n).map(|i| m[(i, j)]).collect())
            .collect()
    }
}

/// Stiffness and mass matrices of a discretized form together with the known kernel of the stiffness.
#[derive(Debug, Clone)]
pub struct SparseOperatorPair {
    /// Stiffness.
    pub k: SparseMatrix,
    /// Density-weighted mass.
    pub m: SparseMatrix,
    /// Euclidean-orthonormal basis of the stiffness kernel.
    pub kernel: Vec<Vec<f64>>,
}

/// Relative tolerance for accepting a kernel vector.
pub const KERNEL_TOL: f64 = 1e-10;

impl SparseOperatorPair {
    /// Builds the pair, orthonormalizes the kernel candidates and verifies them.
    pub fn new(k: SparseMatrix, m: SparseMatrix, kernel: Vec<Vec<f64>>) -> Result<Self> {
        let kernel = orthonormalize(kernel);
        let scale = k.frobenius().max(f64::MIN_POSITIVE);
        for z in &kernel {
            let r = norm(&k.matvec(z));
            if r > KERNEL_TOL * scale {
                return Err(Error::Solver(format!(
                    "kernel candidate has residual {r:e} > {KERNEL_TOL:e}·‖K‖"
                )));
            }
        }
        Ok(Self { k, m, kernel })
    }

    /// Number of unknowns.
    pub fn ndof(&self) -> usize {
        self.k.nrows()
    }

    /// Rayleigh quotient `vᵀKv / vᵀMv`.
    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        self.k.form(v, v) / self.m.form(v, v)
    }
}

/// Gram–Schmidt with re-orthogonalization; vectors of negligible norm are dropped.
pub fn orthonormalize(mut vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs.iter_mut() {
        let n0 = norm(v);
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, v);
                axpy(-c, q, v);
            }
        }
        let n1 = norm(v);
        if n1 > 1e-10 * n0.max(f64::MIN_POSITIVE) && n1 > 0.0 {
            out.push(v.iter().map(|x| x / n1).collect());
        }
    }
    out
}

/// Solver for `K x = b` on the orthogonal complement of a known kernel.
///
/// One unknown per kernel vector is pinned to zero (chosen by pivoting on the
/// kernel basis), the remaining block is factorized by sparse Cholesky, and the
/// solution is projected onto the kernel complement.
#[derive(Debug)]
pub struct KernelSolver {
    factor: Factor,
    k: SparseMatrix,
    free: Vec<usize>,
    kernel: Vec<Vec<f64>>,
}

impl KernelSolver {
    /// Factorizes `K` with the given Euclidean-orthonormal kernel basis.
    pub fn new(k: &SparseMatrix, kernel: &[Vec<f64>]) -> Result<Self> {
        let n = k.nrows();
        let mut pinned = Vec::new();
        let mut work: Vec<Vec<f64>> = kernel.to_vec();
        for idx in 0..work.len() {
            let (p, _) = work[idx]
                .iter()
                .enumerate()
                .filter(|(i, _)| !pinned.contains(i))
                .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            pinned.push(p);
            let piv = work[idx][p];
            for other in idx + 1..work.len() {
                let c = work[other][p] / piv;
                let src = work[idx].clone();
                axpy(-c, &src, &mut work[other]);
            }
        }
        let free: Vec<usize> = (0..n).filter(|i| !pinned.contains(i)).collect();
        let kf = if pinned.is_empty() {
            k.clone()
        } else {
            k.principal_submatrix(&free)?
        };
        let factor = Factor::cholesky(&kf)?;
        Ok(Self {
            factor,
            k: k.clone(),
            free,
            kernel: kernel.to_vec(),
        })
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let bf: Vec<f64> = self.free.iter().map(|&i| b[i]).collect();
        let xf = self.factor.solve(&bf);
        let mut x = vec![0.0; b.len()];
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = xf[k];
        }
        x
    }

    fn project(&self, v: &mut [f64]) {
        for z in &self.kernel {
            let c = dot(z, v);
            axpy(-c, z, v);
        }
    }

    /// Solves `K x = P b` with `P` the projection off the kernel; `x` is kernel-orthogonal.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = b.to_vec();
        self.project(&mut rhs);
        let bn = norm(&rhs);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.raw_solve(&rhs);
        let mut res = f64::INFINITY;
        for _ in 0..4 {
            let mut r = rhs.clone();
            self.k.matvec_add(&x, -1.0, &mut r);
            self.project(&mut r);
            res = norm(&r) / bn;
            if res <= 1e-12 {
                break;
            }
            let dx = self.raw_solve(&r);
            axpy(1.0, &dx, &mut x);
        }
        self.project(&mut x);
        let mut r = rhs.clone();
        self.k.matvec_add(&x, -1.0, &mut r);
        res = res.min(norm(&r) / bn);
        if !res.is_finite() || res > 1e-10 {
            return Err(Error::Solver(format!("relative residual {res:e} above 1e-10")));
        }
        Ok(x)
    }
}

/// Solves `K x = b` for an operator pair; with `deflate_kernel` the right-hand side is
/// projected off the kernel and the solution is kernel-orthogonal.
pub fn solve_spd(pair: &SparseOperatorPair, rhs: &[f64], deflate_kernel: bool) -> Result<Vec<f64>> {
    let kernel: &[Vec<f64>] = if deflate_kernel { &pair.kernel } else { &[] };
    KernelSolver::new(&pair.k, kernel)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_periodic(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            t.push((i, (i + 1) % n, -1.0));
            t.push(((i + 1) % n, i, -1.0));
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let k = laplace_periodic(6);
        let pair = SparseOperatorPair::new(k, SparseMatrix::identity(6), vec![vec![1.0; 6]]).unwrap();
        assert_eq!(solve_spd(&pair, &[0.0; 6], true).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn spd_solve_matches_dense() {
        let n = 8;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0 + i as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let k = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let pair = SparseOperatorPair::new(k.clone(), k.clone(), vec![]).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = solve_spd(&pair, &b, false).unwrap();
        let dense = k.to_dense();
        let lu = dense.partial_piv_lu();
        let xd = lu.solve(Mat::<f64>::from_fn(n, 1, |i, _| b[i]));
        for i in 0..n {
            assert!((x[i] - xd[(i, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn deflated_solve_removes_kernel_component() {
        let n = 10;
        let pair = SparseOperatorPair::new(laplace_periodic(n), SparseMatrix::identity(n), vec![vec![1.0; n]]).unwrap();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let x = solve_spd(&pair, &b, true).unwrap();
        assert!(x.iter().sum::<f64>().abs() < 1e-12);
        let mean = b.iter().sum::<f64>() / n as f64;
        let r: Vec<f64> = pair.k.matvec(&x).iter().zip(&b).map(|(kx, bi)| kx - (bi - mean)).collect();
        assert!(norm(&r) <= 1e-10 * norm(&b));
    }

    #[test]
    fn wrong_kernel_rejected() {
        let v: Vec<f64> = (0..6).map(|i| i as f64).collect();
        assert!(SparseOperatorPair::new(laplace_periodic(6), SparseMatrix::identity(6), vec![v]).is_err());
    }

    #[test]
    fn lin_comb_and_transpose() {
        let a = laplace_periodic(4);
        let d = SparseMatrix::lin_comb(1.0, &a, -1.0, &a.transpose()).unwrap();
        assert_eq!(d.max_abs(), 0.0);
        assert_eq!(a.symmetry_error(), 0.0);
    }
}
