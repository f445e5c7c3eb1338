//! Symmetric generalized eigenvalue problems `K v = λ M v`.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::sparse::{axpy, dot, Factor, SparseMatrix};
use crate::error::{Error, Result};

/// Eigensolver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EigSolverKind {
    /// Dense below the threshold, shift-invert above.
    #[default]
    Auto,
    /// Dense factorization of the full pencil.
    Dense,
    /// Block shift-invert Krylov iteration with Rayleigh–Ritz extraction.
    ShiftInvert,
}

/// Eigensolver workspace settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigOptions {
    /// Relative residual tolerance `‖Kv − λMv‖ ≤ tol·‖Kv‖`.
    pub tol: f64,
    /// Largest size handled by the dense path in `Auto` mode.
    pub dense_threshold: usize,
    /// Solver selection.
    pub solver: EigSolverKind,
    /// Shift used for the shift-invert factorization.
    pub shift: f64,
    /// Block size of the Krylov iteration.
    pub block: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            dense_threshold: 4000,
            solver: EigSolverKind::Auto,
            shift: 0.0,
            block: 4,
        }
    }
}

/// Eigenpairs in ascending order with `M`-orthonormal vectors.
#[derive(Debug, Clone)]
pub struct EigResult {
    /// Eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Eigenvectors, `vᵢᵀ M vⱼ = δᵢⱼ`.
    pub vectors: Vec<Vec<f64>>,
}

/// Flips the sign so that the first entry of significant size is positive.
pub fn fix_sign(v: &mut [f64]) {
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * vmax) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// All eigenpairs of a dense symmetric pencil with positive definite `M`.
pub fn dense_generalized(k: &Mat<f64>, m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = k.nrows();
    let llt = m
        .llt(Side::Lower)
        .map_err(|_| Error::Solver("mass matrix is not positive definite".into()))?;
    let l = llt.L();
    let mut x = k.clone();
    solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let c = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("dense eigensolver: {e:?}")))?;
    let s = eig.S().column_vector().to_owned();
    let mut u = eig.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), u.as_mut(), Par::Seq);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let vals: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
    let vecs = Mat::<f64>::from_fn(n, n, |i, j| u[(i, idx[j])]);
    Ok((vals, vecs))
}

fn dense_path(k: &SparseMatrix, m: &SparseMatrix, nev: usize) -> Result<EigResult> {
    let (vals, vecs) = dense_generalized(&k.to_dense(), &m.to_dense())?;
    let n = k.nrows();
    let mut values = Vec::with_capacity(nev);
    let mut vectors = Vec::with_capacity(nev);
    for j in 0..nev {
        let mut v: Vec<f64> = (0..n).map(|i| vecs[(i, j)]).collect();
        let nm = m.form(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nm);
        fix_sign(&mut v);
        values.push(vals[j]);
        vectors.push(v);
    }
    Ok(EigResult { values, vectors })
}

struct Basis {
    q: Vec<Vec<f64>>,
    mq: Vec<Vec<f64>>,
    kq: Vec<Vec<f64>>,
}

impl Basis {
    /// `M`-orthogonalizes `w` against the basis and appends it if it is not negligible.
    fn push(&mut self, mut w: Vec<f64>, k: &SparseMatrix, m: &SparseMatrix) -> bool {
        let n0 = m.form(&w, &w).sqrt();
        if n0 == 0.0 || !n0.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for (q, mq) in self.q.iter().zip(&self.mq) {
                let c = dot(mq, &w);
                axpy(-c, q, &mut w);
            }
        }
        let mw = m.matvec(&w);
        let n1 = dot(&w, &mw).sqrt();
        if n1 <= 1e-10 * n0 {
            return false;
        }
        let w: Vec<f64> = w.iter().map(|x| x / n1).collect();
        let mw: Vec<f64> = mw.iter().map(|x| x / n1).collect();
        self.kq.push(k.matvec(&w));
        self.q.push(w);
        self.mq.push(mw);
        true
    }
}

fn krylov_path(k: &SparseMatrix, m: &SparseMatrix, nev: usize, opts: &EigOptions) -> Result<EigResult> {
    let n = k.nrows();
    let shifted = SparseMatrix::lin_comb(1.0, k, -opts.shift, m)?;
    let factor = Factor::spd_or_lu(&shifted)?;
    let b = opts.block.max(1);
    let max_dim = n.min(20 * nev + 200);
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut basis = Basis {
        q: Vec::new(),
        mq: Vec::new(),
        kq: Vec::new(),
    };
    let mut block: Vec<Vec<f64>> = (0..b)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect();
    let mut last_check = 0;
    loop {
        let mut added = Vec::new();
        for w in block.drain(..) {
            if basis.push(w, k, m) {
                added.push(basis.q.len() - 1);
            }
        }
        if added.is_empty() && basis.q.len() < max_dim {
            added.extend((0..b).filter_map(|_| {
                let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
                basis.push(w, k, m).then(|| basis.q.len() - 1)
            }));
        }
        let dim = basis.q.len();
        let exhausted = dim >= max_dim || added.is_empty();
        if dim >= nev + b && (dim - last_check >= 2 * b || exhausted) {
            last_check = dim;
            if let Some(res) = rayleigh_ritz(&basis, k, m, nev, opts.tol, exhausted)? {
                return Ok(res);
            }
        }
        if exhausted {
            return Err(Error::Solver(format!(
                "shift-invert iteration did not converge within {dim} basis vectors"
            )));
        }
        let rhs: Vec<Vec<f64>> = added.iter().map(|&i| basis.mq[i].clone()).collect();
        block = factor.solve_many(&rhs);
    }
}

fn rayleigh_ritz(
    basis: &Basis,
    k: &SparseMatrix,
    m: &SparseMatrix,
    nev: usize,
    tol: f64,
    last: bool,
) -> Result<Option<EigResult>> {
    let dim = basis.q.len();
    let h = Mat::<f64>::from_fn(dim, dim, |i, j| 0.5 * (dot(&basis.q[i], &basis.kq[j]) + dot(&basis.q[j], &basis.kq[i])));
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("projected eigensolver: {e:?}")))?;
    let s = eig.S().column_vector().to_owned();
    let u = eig.U().to_owned();
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let n = k.nrows();
    let mut values = Vec::with_capacity(nev);
    let mut vectors = Vec::with_capacity(nev);
    let mut worst = 0.0f64;
    for &j in idx.iter().take(nev) {
        let lam = s[j];
        let mut v = vec![0.0; n];
        let mut kv = vec![0.0; n];
        let mut mv = vec![0.0; n];
        for i in 0..dim {
            let c = u[(i, j)];
            axpy(c, &basis.q[i], &mut v);
            axpy(c, &basis.kq[i], &mut kv);
            axpy(c, &basis.mq[i], &mut mv);
        }
        let knorm = dot(&kv, &kv).sqrt();
        let r: f64 = kv
            .iter()
            .zip(&mv)
            .map(|(a, b)| (a - lam * b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r / knorm.max(f64::MIN_POSITIVE));
        let nm = m.form(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nm);
        fix_sign(&mut v);
        values.push(lam);
        vectors.push(v);
    }
    if worst <= tol {
        Ok(Some(EigResult { values, vectors }))
    } else if last {
        Err(Error::Solver(format!(
            "eigenpairs not converged: relative residual {worst:e} > {tol:e}"
        )))
    } else {
        Ok(None)
    }
}

/// The `nev` smallest eigenpairs of `K v = λ M v`.
pub fn eigs_smallest(k: &SparseMatrix, m: &SparseMatrix, nev: usize, opts: &EigOptions) -> Result<EigResult> {
    let n = k.nrows();
    if nev == 0 {
        return Err(Error::Config("at least one eigenpair must be requested".into()));
    }
    if nev > n {
        return Err(Error::Config(format!("{nev} eigenpairs requested, only {n} unknowns")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Config("eigensolver tolerance must be positive".into()));
    }
    let dense = match opts.solver {
        EigSolverKind::Dense => true,
        EigSolverKind::ShiftInvert => false,
        EigSolverKind::Auto => n <= opts.dense_threshold,
    };
    if dense || nev + opts.block >= n {
        dense_path(k, m, nev)
    } else {
        krylov_path(k, m, nev, opts)
    }
}

/// Real symmetric embedding `[[A, −B], [B, A]]` of the Hermitian matrix `A + iB`.
pub fn hermitian_embedding(re: &SparseMatrix, im: &SparseMatrix) -> Result<SparseMatrix> {
    let n = re.nrows();
    let mut t = Vec::with_capacity(2 * (re.nnz() + im.nnz()));
    for (i, j, v) in re.triplets() {
        t.push((i, j, v));
        t.push((i + n, j + n, v));
    }
    for (i, j, v) in im.triplets() {
        t.push((i + n, j, v));
        t.push((i, j + n, -v));
    }
    SparseMatrix::from_triplets(2 * n, 2 * n, &t)
}

/// The `nev` smallest eigenvalues of the Hermitian pencil `(Kr + i Ki, M)` with real `M`.
pub fn hermitian_eigenvalues(
    kr: &SparseMatrix,
    ki: &SparseMatrix,
    m: &SparseMatrix,
    nev: usize,
    opts: &EigOptions,
) -> Result<Vec<f64>> {
    let kk = hermitian_embedding(kr, ki)?;
    let zero = SparseMatrix::from_triplets(m.nrows(), m.ncols(), &[])?;
    let mm = hermitian_embedding(m, &zero)?;
    let mut o = *opts;
    o.block = o.block.max(2);
    let r = eigs_smallest(&kk, &mm, 2 * nev, &o)?;
    Ok((0..nev).map(|i| 0.5 * (r.values[2 * i] + r.values[2 * i + 1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::linalg::solvers::Solve;

    fn lap1d(n: usize) -> (SparseMatrix, SparseMatrix) {
        let h = 1.0 / (n + 1) as f64;
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        for i in 0..n {
            kt.push((i, i, 2.0 / h));
            mt.push((i, i, 4.0 * h / 6.0));
            if i + 1 < n {
                kt.push((i, i + 1, -1.0 / h));
                kt.push((i + 1, i, -1.0 / h));
                mt.push((i, i + 1, h / 6.0));
                mt.push((i + 1, i, h / 6.0));
            }
        }
        (
            SparseMatrix::from_triplets(n, n, &kt).unwrap(),
            SparseMatrix::from_triplets(n, n, &mt).unwrap(),
        )
    }

    #[test]
    fn diagonal_problem() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let k = SparseMatrix::diagonal(&d);
        let m = SparseMatrix::identity(10);
        let r = eigs_smallest(&k, &m, 3, &EigOptions::default()).unwrap();
        for (i, v) in r.values.iter().enumerate() {
            assert!((v - (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn full_spectrum_trace_identity() {
        let (k, m) = lap1d(30);
        let r = eigs_smallest(&k, &m, 30, &EigOptions::default()).unwrap();
        let kd = k.to_dense();
        let md = m.to_dense();
        let prod = md.partial_piv_lu().solve(kd.transpose().to_owned());
        let tr: f64 = (0..30).map(|i| prod[(i, i)]).sum();
        let s: f64 = r.values.iter().sum();
        assert!((tr - s).abs() <= 1e-8 * tr);
    }

    #[test]
    fn krylov_matches_dense() {
        let (k, m) = lap1d(400);
        let dense = eigs_smallest(&k, &m, 6, &EigOptions { solver: EigSolverKind::Dense, ..Default::default() }).unwrap();
        let it = eigs_smallest(&k, &m, 6, &EigOptions { solver: EigSolverKind::ShiftInvert, ..Default::default() }).unwrap();
        for i in 0..6 {
            assert!((dense.values[i] - it.values[i]).abs() <= 1e-8 * dense.values[i]);
            let mv = m.matvec(&it.vectors[i]);
            for j in 0..6 {
                let g = dot(&it.vectors[j], &mv);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn krylov_resolves_multiplicity() {
        // Two uncoupled copies of the same problem: every eigenvalue is double.
        let (k1, m1) = lap1d(200);
        let mut kt = k1.triplets();
        kt.extend(k1.triplets().into_iter().map(|(i, j, v)| (i + 200, j + 200, v)));
        let mut mt = m1.triplets();
        mt.extend(m1.triplets().into_iter().map(|(i, j, v)| (i + 200, j + 200, v)));
        let k = SparseMatrix::from_triplets(400, 400, &kt).unwrap();
        let m = SparseMatrix::from_triplets(400, 400, &mt).unwrap();
        let r = eigs_smallest(&k, &m, 4, &EigOptions { solver: EigSolverKind::ShiftInvert, ..Default::default() }).unwrap();
        assert!((r.values[0] - r.values[1]).abs() < 1e-8 * r.values[0]);
        assert!((r.values[2] - r.values[3]).abs() < 1e-8 * r.values[2]);
        assert!(r.values[2] > 3.0 * r.values[0]);
    }

    #[test]
    fn hermitian_embedding_pairs() {
        let kr = SparseMatrix::diagonal(&[2.0, 3.0]);
        let ki = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        let m = SparseMatrix::identity(2);
        let v = hermitian_eigenvalues(&kr, &ki, &m, 2, &EigOptions::default()).unwrap();
        // eigenvalues of [[2, i], [-i, 3]]
        let disc = (0.25f64 + 1.0).sqrt();
        assert!((v[0] - (2.5 - disc)).abs() < 1e-12);
        assert!((v[1] - (2.5 + disc)).abs() < 1e-12);
    }

    #[test]
    fn request_validation() {
        let (k, m) = lap1d(5);
        assert!(eigs_smallest(&k, &m, 6, &EigOptions::default()).is_err());
        assert!(eigs_smallest(&k, &m, 0, &EigOptions::default()).is_err());
    }
}
