//! Zhikov functions of the soft inclusion and band-gap limit spectra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::eig::EigOptions;
use crate::fem::sparse::{dot, Factor, SparseMatrix};
use crate::geometry::CellMesh;
use crate::inclusion::{bloch_spectrum, clusters, BlochSpectrum, OperatorTag, MEAN_ZERO_TOL};
use crate::macro_plate::MacroOperator;
use crate::tensor::MaterialSpec;

/// Default distance to a pole below which evaluation is refused.
pub const POLE_GUARD: f64 = 1e-8;
/// Relative bisection tolerance `|Δλ| ≤ ROOT_TOL·(1 + λ)`.
pub const ROOT_TOL: f64 = 1e-10;
/// Points closer than this (relative) are merged.
pub const DEDUP_TOL: f64 = 1e-8;
/// Upper end of the searched range as a multiple of the largest pole.
pub const LAMBDA_MAX_FACTOR: f64 = 1.5;
/// Relative tolerance of the scalar-matrix test on pole Gram matrices.
pub const SCALAR_TOL: f64 = 1e-6;

/// Which Zhikov function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZhikovVariant {
    /// Full 3×3 function on all displacement components.
    Full,
    /// 2×2 membrane function.
    Memb,
    /// Scalar function on one component.
    Scalar,
}

/// A group of coupled eigenvalues acting as one pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    /// Smallest eigenvalue of the cluster.
    pub lo: f64,
    /// Largest eigenvalue of the cluster.
    pub hi: f64,
    /// Sum of `m mᵀ` over the cluster, row-major.
    pub gram: Vec<f64>,
}

/// Truncated modal representation `β(λ) = λ⟨ρ⟩I + Σ λ²/(η_n − λ) m_n m_nᵀ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZhikovFunction {
    /// Variant.
    pub variant: ZhikovVariant,
    /// Inclusion operator the modes come from.
    pub tag: OperatorTag,
    /// Field components the function acts on.
    pub components: Vec<usize>,
    /// `⟨ρ⟩`, area-weighted.
    pub rho_mean: f64,
    /// `⟨ρ1⟩`.
    pub rho1_mean: f64,
    /// `⟨ρ0⟩`.
    pub rho0_mean: f64,
    /// Number of modes in the sum.
    pub truncation: usize,
    /// Eigenvalues of the coupled modes used.
    pub etas: Vec<f64>,
    /// Weighted means of the coupled modes on `components`.
    pub means: Vec<Vec<f64>>,
    /// Coupled clusters, ascending.
    pub poles: Vec<Pole>,
    /// Distinct eigenvalues within the truncation whose clusters have zero mean on `components`.
    pub uncoupled: Vec<f64>,
}

impl ZhikovFunction {
    /// Builds the function from the first `truncation` modes of `spectrum` on the given components.
    pub fn new(spectrum: &BlochSpectrum, components: &[usize], truncation: usize) -> Result<Self> {
        if components.is_empty() || components.len() > 3 {
            return Err(Error::Config("a Zhikov function acts on one to three components".into()));
        }
        if truncation == 0 || truncation > spectrum.len() {
            return Err(Error::Config(format!(
                "truncation {truncation} outside 1..={} computed modes",
                spectrum.len()
            )));
        }
        let ncomp = spectrum.weighted_means.first().map_or(0, |m| m.len());
        if components.iter().any(|&c| c >= ncomp) {
            return Err(Error::Config("component not carried by the inclusion operator".into()));
        }
        let variant = match components.len() {
            1 => ZhikovVariant::Scalar,
            2 => ZhikovVariant::Memb,
            _ => ZhikovVariant::Full,
        };
        let values = &spectrum.eigenvalues[..truncation];
        let mean_of = |n: usize| -> Vec<f64> { components.iter().map(|&c| spectrum.weighted_means[n][c]).collect() };
        let zero = MEAN_ZERO_TOL * spectrum.rho0_mean;
        let k = components.len();
        let (mut etas, mut means, mut poles, mut uncoupled) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for r in clusters(values) {
            let coupled = r.clone().any(|n| mean_of(n).iter().any(|x| x.abs() > zero));
            if coupled {
                let mut gram = DMatrix::zeros(k, k);
                for n in r.clone() {
                    let m = DVector::from_vec(mean_of(n));
                    gram += &m * m.transpose();
                    etas.push(values[n]);
                    means.push(m.as_slice().to_vec());
                }
                poles.push(Pole {
                    lo: values[r.start],
                    hi: values[r.end - 1],
                    gram: gram.transpose().as_slice().to_vec(),
                });
            } else {
                uncoupled.push(values[r.start]);
            }
        }
        Ok(Self {
            variant,
            tag: spectrum.tag,
            components: components.to_vec(),
            rho_mean: spectrum.rho_mean,
            rho1_mean: spectrum.rho1_mean,
            rho0_mean: spectrum.rho0_mean,
            truncation,
            etas,
            means,
            poles,
            uncoupled,
        })
    }

    /// Builds the function on the tracked components of the spectrum.
    pub fn tracked(spectrum: &BlochSpectrum, truncation: usize) -> Result<Self> {
        Self::new(spectrum, &spectrum.tracked.clone(), truncation)
    }

    /// Matrix size.
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Largest pole, the scale of the searched range.
    pub fn top_pole(&self) -> Option<f64> {
        self.poles.last().map(|p| p.hi)
    }

    /// Upper end of the searched range.
    pub fn lambda_max(&self) -> f64 {
        let top = self.top_pole().or(self.uncoupled.last().copied()).unwrap_or(1.0);
        LAMBDA_MAX_FACTOR * top
    }

    fn check(&self, lambda: f64, guard: f64) -> Result<()> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("λ = {lambda} must be finite and nonnegative")));
        }
        if let Some(&eta) = self.etas.iter().find(|&&eta| (lambda - eta).abs() < guard) {
            return Err(Error::PoleProximity { lambda, pole: eta, guard });
        }
        Ok(())
    }

    /// `β(λ)` by the truncated modal sum.
    pub fn eval(&self, lambda: f64, guard: f64) -> Result<DMatrix<f64>> {
        self.check(lambda, guard)?;
        let k = self.dim();
        let mut b = DMatrix::identity(k, k) * (lambda * self.rho_mean);
        for (eta, m) in self.etas.iter().zip(&self.means) {
            let w = lambda * lambda / (eta - lambda);
            let m = DVector::from_column_slice(m);
            b += &m * m.transpose() * w;
        }
        Ok(b)
    }

    /// `β′(λ) = ⟨ρ⟩I + Σ λ(2η_n − λ)/(η_n − λ)² m_n m_nᵀ`.
    pub fn derivative(&self, lambda: f64, guard: f64) -> Result<DMatrix<f64>> {
        self.check(lambda, guard)?;
        let k = self.dim();
        let mut b = DMatrix::identity(k, k) * self.rho_mean;
        for (eta, m) in self.etas.iter().zip(&self.means) {
            let w = lambda * (2.0 * eta - lambda) / ((eta - lambda) * (eta - lambda));
            let m = DVector::from_column_slice(m);
            b += &m * m.transpose() * w;
        }
        Ok(b)
    }

    /// Whether every pole Gram matrix is a multiple of the identity, so that `β` is scalar.
    pub fn is_scalar(&self) -> bool {
        let k = self.dim();
        self.poles.iter().all(|p| {
            let g = DMatrix::from_row_slice(k, k, &p.gram);
            let c = g.trace() / k as f64;
            (g - DMatrix::identity(k, k) * c).abs().max() <= SCALAR_TOL * c.abs().max(1e-300)
        })
    }

    /// The scalar `b(λ)` with `β(λ) = b(λ) I`, valid when [`Self::is_scalar`] holds.
    pub fn eval_scalar(&self, lambda: f64, guard: f64) -> Result<f64> {
        let b = self.eval(lambda, guard)?;
        Ok(b.trace() / self.dim() as f64)
    }
}

/// `β(λ)` by the truncated modal sum with the default pole guard.
pub fn beta_eval(zf: &ZhikovFunction, lambda: f64) -> Result<DMatrix<f64>> {
    zf.eval(lambda, POLE_GUARD)
}

/// `β(λ)` without modal truncation, from shifted solves `(A_00 − λ) b_i = e_i` on the computed operator.
pub fn beta_oracle_on(spectrum: &BlochSpectrum, components: &[usize], lambda: f64) -> Result<DMatrix<f64>> {
    let pair = &spectrum.operator.pair;
    if let Some(&eta) = spectrum
        .eigenvalues
        .iter()
        .find(|&&eta| (lambda - eta).abs() <= 1e-12 * eta.abs().max(1.0))
    {
        return Err(Error::PoleProximity { lambda, pole: eta, guard: 1e-12 * eta.abs().max(1.0) });
    }
    let shifted = SparseMatrix::lin_comb(1.0, &pair.k, -lambda, &pair.m)?;
    let factor = Factor::lu(&shifted).map_err(|_| Error::OnSpectrum(lambda))?;
    let loads: Vec<&Vec<f64>> = components.iter().map(|&c| &spectrum.mean_loads[c]).collect();
    let sols = factor.solve_many(&loads.iter().map(|l| (*l).clone()).collect::<Vec<_>>());
    for (l, x) in loads.iter().zip(&sols) {
        let r = shifted.matvec(x);
        let res: f64 = r.iter().zip(l.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = dot(l, l).sqrt().max(1e-300);
        if !res.is_finite() || res > 1e-6 * scale {
            return Err(Error::OnSpectrum(lambda));
        }
    }
    let k = components.len();
    let s2 = spectrum.mode_scale * spectrum.mode_scale;
    let mut b = DMatrix::identity(k, k) * (lambda * spectrum.rho_mean);
    for i in 0..k {
        for j in 0..k {
            b[(i, j)] += lambda * lambda * s2 * 0.5 * (dot(loads[j], &sols[i]) + dot(loads[i], &sols[j]));
        }
    }
    Ok(b)
}

/// `β(λ)` without modal truncation for the inclusion operator `tag` on `mesh`, on its tracked components.
pub fn beta_oracle(mat: &MaterialSpec, mesh: &CellMesh, tag: OperatorTag, lambda: f64) -> Result<DMatrix<f64>> {
    let spectrum = bloch_spectrum(mat, mesh, tag, 1, &EigOptions::default())?;
    let components = spectrum.tracked.clone();
    beta_oracle_on(&spectrum, &components, lambda)
}

/// Origin of a limit-spectrum point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    /// Root of `β(λ) = μ_k` for a macroscopic eigenvalue.
    BetaRoot,
    /// Eigenvalue of the inclusion operator without coupling.
    Uncoupled,
    /// Eigenvalue of the homogenized plate when no inclusion resonance enters.
    Macro,
}

/// One point of a limit spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// Location.
    pub lambda: f64,
    /// Origin.
    pub kind: PointKind,
    /// Matched macroscopic eigenvalue for roots.
    pub matched_mu: Option<f64>,
    /// Index of the pole interval containing the root, 0 for `(0, η_1)`.
    pub pole_interval: Option<usize>,
}

/// Root-finding method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumPath {
    /// Scalar `β` against macroscopic eigenvalues.
    #[default]
    Scalar,
    /// Inertia of `K − β(λ)⊗M` on the macroscopic mesh.
    Matrix,
}

/// Options of the limit-spectrum computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Pole guard of `β` evaluations.
    pub pole_guard: f64,
    /// Bottom `m0` of the strip spectrum when the essential interval `[m0, ∞)` is present.
    pub strip_bottom: Option<f64>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { pole_guard: POLE_GUARD, strip_bottom: None }
    }
}

/// Computed approximation of a limit spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSpectrum {
    /// Regime label.
    pub regime: String,
    /// Root-finding method used.
    pub path: SpectrumPath,
    /// Sorted, deduplicated points.
    pub points: Vec<SpectrumPoint>,
    /// Intervals `[a, b]`, `b = ∞` for essential spectrum.
    pub intervals: Vec<(f64, f64)>,
    /// Open intervals without spectrum starting at a pole or at zero.
    pub gaps: Vec<(f64, f64)>,
    /// Poles of `β`.
    pub poles: Vec<f64>,
    /// Upper end of the searched range.
    pub lambda_max: f64,
    /// Remarks on truncation and unevaluated parts.
    pub notes: Vec<String>,
}

impl LimitSpectrum {
    /// Point locations.
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    /// Distance from `x` to the computed set including intervals.
    pub fn distance(&self, x: f64) -> f64 {
        let d = self.points.iter().map(|p| (p.lambda - x).abs()).fold(f64::INFINITY, f64::min);
        self.intervals.iter().fold(d, |d, &(a, b)| if x >= a && x <= b { 0.0 } else { d.min((x - a).abs()).min((x - b).abs()) })
    }
}

/// Search intervals `(lo, hi, index)` between consecutive poles up to `lambda_max`.
fn pole_intervals(zf: &ZhikovFunction, lambda_max: f64) -> Vec<(f64, f64, usize)> {
    let mut out = Vec::new();
    let mut lo = 0.0;
    for (i, p) in zf.poles.iter().enumerate() {
        out.push((lo, p.lo, i));
        lo = p.hi;
    }
    if lambda_max > lo {
        out.push((lo, lambda_max, zf.poles.len()));
    }
    out
}

fn offsets(zf: &ZhikovFunction, lo: f64, hi: f64, idx: usize, guard: f64) -> (f64, f64) {
    let a = if idx == 0 { 0.0 } else { lo + guard.max(1e-12 * lo) };
    let b = if idx < zf.poles.len() { hi - guard.max(1e-12 * hi) } else { hi };
    (a, b)
}

fn bisect(mut a: f64, mut b: f64, tol: f64, mut above: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= tol * (1.0 + b.abs()) || m <= a || m >= b {
            break;
        }
        if above(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Limit spectrum from a scalar `β` and macroscopic eigenvalues `μ_k` taken with unit mass.
pub fn limit_spectrum(regime: &str, zf: &ZhikovFunction, macro_mu: &[f64], opts: &SpectrumOptions) -> Result<LimitSpectrum> {
    if macro_mu.is_empty() {
        return Err(Error::Config("macroscopic spectrum is empty".into()));
    }
    if !zf.is_scalar() {
        return Err(Error::Config("the scalar path needs a Zhikov function that is a multiple of the identity".into()));
    }
    let lambda_max = zf.lambda_max();
    let tasks: Vec<(f64, f64, usize, f64)> = pole_intervals(zf, lambda_max)
        .into_iter()
        .flat_map(|(lo, hi, i)| macro_mu.iter().map(move |&mu| (lo, hi, i, mu)))
        .collect();
    let roots: Vec<Option<SpectrumPoint>> = tasks
        .par_iter()
        .map(|&(lo, hi, idx, mu)| -> Result<Option<SpectrumPoint>> {
            let (a, b) = offsets(zf, lo, hi, idx, opts.pole_guard);
            if !(b > a) {
                return Ok(None);
            }
            let fa = zf.eval_scalar(a, 0.0)? - mu;
            let fb = zf.eval_scalar(b, 0.0)? - mu;
            if !(fa < 0.0 && fb > 0.0) {
                return Ok(None);
            }
            let root = bisect(a, b, 0.0, |x| Ok(zf.eval_scalar(x, 0.0)? >= mu))?;
            Ok(Some(SpectrumPoint { lambda: root, kind: PointKind::BetaRoot, matched_mu: Some(mu), pole_interval: Some(idx) }))
        })
        .collect::<Result<_>>()?;
    Ok(finish(regime, SpectrumPath::Scalar, zf, roots.into_iter().flatten().collect(), lambda_max, opts))
}

/// Dense `β(λ)`-weighted mass `Σ β_ij M_ij` on the unknowns of a macroscopic operator with unit density.
pub fn beta_mass(op: &MacroOperator, beta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = op.ndof();
    let nc = op.dofs.ncomp;
    let mut owner = vec![(0usize, 0usize); n];
    for v in 0..op.dofs.num_nodes() {
        for c in 0..nc {
            if let Some(d) = op.dofs.dof(v, c) {
                owner[d] = (v, c);
            }
        }
    }
    let mut out = DMatrix::zeros(n, n);
    match (nc, beta.nrows()) {
        (4, 1) => {
            for (i, j, v) in op.m.triplets() {
                out[(i, j)] += beta[(0, 0)] * v / op.rho_mean;
            }
        }
        (2, 2) => {
            for (i, j, v) in op.m.triplets() {
                let ((vi, ci), (vj, cj)) = (owner[i], owner[j]);
                if ci != 0 || cj != 0 {
                    continue;
                }
                for a in 0..2 {
                    for b in 0..2 {
                        if let (Some(r), Some(c)) = (op.dofs.dof(vi, a), op.dofs.dof(vj, b)) {
                            out[(r, c)] += beta[(a, b)] * v / op.rho_mean;
                        }
                    }
                }
            }
        }
        _ => {
            return Err(Error::Config(format!(
                "a {}×{} Zhikov function does not act on a macroscopic field with {nc} values per node",
                beta.nrows(),
                beta.ncols()
            )))
        }
    }
    Ok(out)
}

/// Number of eigenvalues of `K^{-1/2} β(λ)⊗M K^{-1/2}` above one, the negative inertia of `K − β(λ)⊗M`.
pub fn inertia_count(zf: &ZhikovFunction, op: &MacroOperator, k_dense: &DMatrix<f64>, lambda: f64) -> Result<usize> {
    let b = zf.eval(lambda, 0.0)?;
    let a = k_dense - beta_mass(op, &b)?;
    let e = SymmetricEigen::new(a);
    let scale = e.eigenvalues.amax().max(1e-300);
    Ok(e.eigenvalues.iter().filter(|&&x| x < -1e-14 * scale).count())
}

/// Limit spectrum by inertia counting of `K − β(λ)⊗M` on the macroscopic mesh, for the lowest `count` curves.
pub fn limit_spectrum_matrix(
    regime: &str,
    zf: &ZhikovFunction,
    op: &MacroOperator,
    count: usize,
    opts: &SpectrumOptions,
) -> Result<LimitSpectrum> {
    if count == 0 || op.ndof() == 0 {
        return Err(Error::Config("macroscopic spectrum is empty".into()));
    }
    let kd = op.k.to_dense();
    let k_dense = DMatrix::from_fn(op.ndof(), op.ndof(), |i, j| kd[(i, j)]);
    let lambda_max = zf.lambda_max();
    let found: Vec<Vec<SpectrumPoint>> = pole_intervals(zf, lambda_max)
        .into_par_iter()
        .map(|(lo, hi, idx)| -> Result<Vec<SpectrumPoint>> {
            let (a, b) = offsets(zf, lo, hi, idx, opts.pole_guard);
            if !(b > a) {
                return Ok(Vec::new());
            }
            let ca = inertia_count(zf, op, &k_dense, a)?;
            let cb = inertia_count(zf, op, &k_dense, b)?.min(count);
            let mut pts = Vec::new();
            for level in ca..cb {
                let root = bisect(a, b, ROOT_TOL, |x| Ok(inertia_count(zf, op, &k_dense, x)? > level))?;
                pts.push(SpectrumPoint { lambda: root, kind: PointKind::BetaRoot, matched_mu: None, pole_interval: Some(idx) });
            }
            Ok(pts)
        })
        .collect::<Result<_>>()?;
    Ok(finish(regime, SpectrumPath::Matrix, zf, found.into_iter().flatten().collect(), lambda_max, opts))
}

fn finish(
    regime: &str,
    path: SpectrumPath,
    zf: &ZhikovFunction,
    roots: Vec<SpectrumPoint>,
    lambda_max: f64,
    opts: &SpectrumOptions,
) -> LimitSpectrum {
    let mut points = roots;
    points.extend(zf.uncoupled.iter().filter(|&&a| a <= lambda_max).map(|&a| SpectrumPoint {
        lambda: a,
        kind: PointKind::Uncoupled,
        matched_mu: None,
        pole_interval: None,
    }));
    points.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut dedup: Vec<SpectrumPoint> = Vec::with_capacity(points.len());
    for p in points {
        if dedup.last().is_some_and(|l| (p.lambda - l.lambda).abs() <= DEDUP_TOL * (1.0 + p.lambda.abs())) {
            continue;
        }
        dedup.push(p);
    }
    let mut intervals = Vec::new();
    let mut notes = vec![format!(
        "search range truncated at {:.6e} = {LAMBDA_MAX_FACTOR} times the largest computed pole; {} inclusion modes in the modal sum",
        lambda_max, zf.truncation
    )];
    if let Some(m0) = opts.strip_bottom {
        intervals.push((m0, f64::INFINITY));
        notes.push("strip discrete spectrum: not evaluated".into());
    }
    let poles: Vec<f64> = zf.poles.iter().map(|p| p.lo).collect();
    let mut gaps = Vec::new();
    let starts = std::iter::once(0.0).chain(zf.poles.iter().map(|p| p.hi));
    for s in starts {
        let next = dedup.iter().map(|p| p.lambda).find(|&l| l > s * (1.0 + DEDUP_TOL));
        let interval_start = intervals.iter().map(|i| i.0).find(|&a| a > s);
        let end = match (next, interval_start) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y).or((s < lambda_max).then_some(lambda_max)),
        };
        let covered = intervals.iter().any(|&(a, b)| s >= a && s <= b);
        if let (Some(e), false) = (end, covered) {
            if e > s {
                gaps.push((s, e));
            }
        }
    }
    LimitSpectrum { regime: regime.to_string(), path, points: dedup, intervals, gaps, poles, lambda_max, notes }
}

/// Samples `(λ, upper-triangular β entries)` on a uniform grid of `[0, λ_max]`, skipping points near poles.
pub fn dispersion_samples(zf: &ZhikovFunction, points: usize) -> Vec<(f64, Vec<f64>)> {
    let top = zf.lambda_max();
    (0..points)
        .filter_map(|i| {
            let l = top * i as f64 / (points.max(2) - 1) as f64;
            let b = zf.eval(l, 1e-6 * top).ok()?;
            let k = zf.dim();
            let mut row = Vec::new();
            for r in 0..k {
                for c in r..k {
                    row.push(b[(r, c)]);
                }
            }
            Some((l, row))
        })
        .collect()
}
