//! Direct three-dimensional discretization of the scaled plate problem with ε-periodic coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::eig::{eigs_smallest, EigOptions};
use crate::fem::forms::{dmat6, element_mass, element_stiffness, lagrange_points, GradKind};
use crate::fem::sparse::{Factor, SparseMatrix};
use crate::geometry::{CellMesh, Edge};
use crate::limit::{LoadSpec, MuScaling};
use crate::tensor::MaterialSpec;
use crate::zhikov::LimitSpectrum;

/// Default upper bound on the number of unknowns of a fine problem.
pub const DEFAULT_BUDGET: usize = 200_000;

/// Parity class the fine problem is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FineParity {
    /// All displacements.
    #[default]
    Full,
    /// In-plane components even and transverse component odd in `x3`.
    Membrane,
    /// In-plane components odd and transverse component even in `x3`.
    Bending,
}

/// Parameters of a fine-scale problem on `ω × I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineConfig {
    /// Plate thickness `h`.
    pub h: f64,
    /// Period `ε`; every side of `ω` must be an integer multiple.
    pub epsilon: f64,
    /// Soft-phase stiffness scaling; `None` keeps the soft tensor unscaled.
    pub mu_scaling: Option<MuScaling>,
    /// Spectral scaling exponent, the stiffness is multiplied by `h^{-τ}`.
    pub tau: u32,
    /// Element layers across the thickness.
    pub layers: usize,
    /// Side lengths of `ω`.
    pub lengths: [f64; 2],
    /// Clamped edges of `ω`; the lateral faces above them are clamped.
    pub clamped: Vec<Edge>,
    /// Parity restriction.
    pub parity: FineParity,
    /// Largest admissible number of unknowns.
    pub budget: usize,
}

impl FineConfig {
    /// Unit square clamped on the left edge, four layers, `h = δ ε`, full parity and the default budget.
    pub fn new(epsilon: f64, delta: f64, mu_scaling: Option<MuScaling>, tau: u32) -> Self {
        Self {
            h: delta * epsilon,
            epsilon,
            mu_scaling,
            tau,
            layers: 4,
            lengths: [1.0, 1.0],
            clamped: vec![Edge::Left],
            parity: FineParity::Full,
            budget: DEFAULT_BUDGET,
        }
    }

    /// Contrast factor `μ_h`.
    pub fn mu_h(&self) -> f64 {
        match self.mu_scaling {
            None => 1.0,
            Some(MuScaling::Eps) => self.epsilon,
            Some(MuScaling::EpsH) => self.epsilon * self.h,
            Some(MuScaling::Eps2) => self.epsilon * self.epsilon,
        }
    }

    /// Factor `h^{-τ}` of the elastic form.
    pub fn spectral_scale(&self) -> f64 {
        self.h.powi(-(self.tau as i32))
    }

    fn validate(&self) -> Result<[usize; 2]> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("thickness h = {} must be positive", self.h)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("period ε = {} must be positive", self.epsilon)));
        }
        if self.tau != 0 && self.tau != 2 {
            return Err(Error::Config(format!("τ = {} must be 0 or 2", self.tau)));
        }
        if self.layers == 0 {
            return Err(Error::Config("at least one layer is required".into()));
        }
        if self.parity != FineParity::Full && !self.layers.is_multiple_of(2) {
            return Err(Error::Config("a parity restriction needs an even number of layers".into()));
        }
        if self.clamped.is_empty() {
            return Err(Error::Config("at least one clamped edge is required".into()));
        }
        let mut cells = [0; 2];
        for (c, &l) in cells.iter_mut().zip(&self.lengths) {
            let q = l / self.epsilon;
            let r = q.round();
            if !(l > 0.0) || r < 1.0 || (q - r).abs() > 1e-9 * q.max(1.0) {
                return Err(Error::Config(format!("side {l} is not an integer multiple of ε = {}", self.epsilon)));
            }
            *c = r as usize;
        }
        Ok(cells)
    }
}

/// Assembled fine-scale problem `h^{-τ} a_ε(u, v) + λ (ρ^ε u, v)`.
#[derive(Debug, Clone)]
pub struct FineProblem {
    /// Parameters.
    pub config: FineConfig,
    /// Number of cells per side of `ω`.
    pub cells: [usize; 2],
    /// Elements per side of one cell.
    pub cell_elements: usize,
    /// Soft flag per in-plane element of one cell, row-major.
    pub cell_soft: Vec<bool>,
    /// Elements along `x1`, `x2` and `x3`.
    pub elements: [usize; 3],
    /// Stiffness `h^{-τ} a_ε` on the free unknowns.
    pub k: SparseMatrix,
    /// Mass `ρ^ε` on the free unknowns.
    pub m: SparseMatrix,
    dofs: Vec<Option<(usize, f64)>>,
    ndof: usize,
}

/// Fine resolvent solution with its transverse and cell averages.
#[derive(Debug, Clone, Serialize)]
pub struct FineSolution {
    /// Spectral parameter.
    pub lambda: f64,
    /// Displacement per node, nodes numbered `i + (N1+1)(j + (N2+1) k)`.
    pub displacement: Vec<[f64; 3]>,
    /// Transverse average `∫_I u dx3` per mid-plane node `i + (N1+1) j`.
    pub transverse_mean: Vec<[f64; 3]>,
    /// Means of the displacement over every cell.
    pub cell_means: Vec<CellMean>,
}

/// Means of the displacement over one `ε`-cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    /// Cell index along `x1` and `x2`.
    pub cell: [usize; 2],
    /// Cell centre.
    pub centre: [f64; 2],
    /// Mean over the cell.
    pub all: [f64; 3],
    /// Mean over the stiff phase.
    pub stiff: [f64; 3],
    /// Mean over the soft phase, zero without soft phase.
    pub soft: [f64; 3],
}

/// Fine eigenvalue against the computed limit set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Position in the fine spectrum, zero-based.
    pub index: usize,
    /// Fine eigenvalue.
    pub fine: f64,
    /// Nearest point of the limit set.
    pub nearest: f64,
    /// Distance to the limit set.
    pub distance: f64,
    /// Lies in an essential interval of the limit set but away from its computed points.
    pub pollution_candidate: bool,
}

/// Distances of a fine spectrum to a limit set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Period.
    pub epsilon: f64,
    /// Thickness.
    pub h: f64,
    /// One row per fine eigenvalue.
    pub rows: Vec<ComparisonRow>,
}

fn edge_node(edge: Edge, i: usize, j: usize, n: [usize; 3]) -> bool {
    match edge {
        Edge::Left => i == 0,
        Edge::Right => i == n[0],
        Edge::Bottom => j == 0,
        Edge::Top => j == n[1],
    }
}

impl FineProblem {
    /// Tiles `ω` by copies of the in-plane cell mesh and assembles the scaled operator pair.
    pub fn new(config: FineConfig, material: &MaterialSpec, cell: &CellMesh) -> Result<Self> {
        let cells = config.validate()?;
        if cell.dim != 2 {
            return Err(Error::Geometry("the fine problem tiles a planar cell mesh".into()));
        }
        let n = cell.n;
        let elements = [cells[0] * n, cells[1] * n, config.layers];
        let nodes = (elements[0] + 1) * (elements[1] + 1) * (elements[2] + 1);
        let dofs = Self::number(&config, elements);
        let ndof = dofs.iter().flatten().map(|&(i, _)| i + 1).max().unwrap_or(0);
        if ndof > config.budget {
            return Err(Error::Budget { dofs: ndof, budget: config.budget });
        }
        debug_assert_eq!(dofs.len(), 3 * nodes);
        let cell_soft: Vec<bool> = (0..n * n).map(|c| cell.column_soft(c % n, c / n)).collect();
        let hel = [config.epsilon / n as f64, config.epsilon / n as f64, 1.0 / config.layers as f64];
        let kind = GradKind::Scaled3d { transverse_scale: 1.0 / config.h };
        let scale = config.spectral_scale();
        let mu2 = config.mu_h() * config.mu_h();
        let k_soft = element_stiffness(kind, hel, &dmat6(&material.c0)) * (scale * mu2);
        let k_stiff = element_stiffness(kind, hel, &dmat6(&material.c1)) * scale;
        let m_soft = element_mass(kind, hel, material.rho0);
        let m_stiff = element_mass(kind, hel, material.rho1);
        let mut fp = Self {
            config,
            cells,
            cell_elements: n,
            cell_soft,
            elements,
            k: SparseMatrix::identity(0),
            m: SparseMatrix::identity(0),
            dofs,
            ndof,
        };
        let (kt, mt): (Vec<_>, Vec<_>) = (0..elements[2] * elements[1])
            .into_par_iter()
            .map(|row| {
                let (j, k) = (row % elements[1], row / elements[1]);
                let mut kt = Vec::new();
                let mut mt = Vec::new();
                for i in 0..elements[0] {
                    let local = fp.element_dofs(i, j, k);
                    let soft = fp.is_soft(i, j);
                    let (ke, me) = if soft { (&k_soft, &m_soft) } else { (&k_stiff, &m_stiff) };
                    for (a, da) in local.iter().enumerate() {
                        let Some((ia, sa)) = da else { continue };
                        for (b, db) in local.iter().enumerate() {
                            let Some((ib, sb)) = db else { continue };
                            kt.push((*ia, *ib, sa * sb * ke[(a, b)]));
                            mt.push((*ia, *ib, sa * sb * me[(a, b)]));
                        }
                    }
                }
                (kt, mt)
            })
            .unzip();
        let kt: Vec<_> = kt.into_iter().flatten().collect();
        fp.k = SparseMatrix::from_triplets(ndof, ndof, &kt)?;
        drop(kt);
        let mt: Vec<_> = mt.into_iter().flatten().collect();
        fp.m = SparseMatrix::from_triplets(ndof, ndof, &mt)?;
        Ok(fp)
    }

    fn number(config: &FineConfig, n: [usize; 3]) -> Vec<Option<(usize, f64)>> {
        let nz = n[2];
        let mid = nz / 2;
        let mut dofs = vec![None; 3 * (n[0] + 1) * (n[1] + 1) * (nz + 1)];
        let mut next = 0;
        let mut index = std::collections::HashMap::new();
        for k in 0..=nz {
            for j in 0..=n[1] {
                for i in 0..=n[0] {
                    if config.clamped.iter().any(|&e| edge_node(e, i, j, n)) {
                        continue;
                    }
                    let node = i + (n[0] + 1) * (j + (n[1] + 1) * k);
                    for c in 0..3 {
                        let (key_k, sign) = match config.parity {
                            FineParity::Full => (k, 1.0),
                            FineParity::Membrane | FineParity::Bending => {
                                let odd = (c == 2) == (config.parity == FineParity::Membrane);
                                if odd && 2 * k == nz {
                                    continue;
                                }
                                let sign = if odd && k > mid { -1.0 } else { 1.0 };
                                (k.min(nz - k), sign)
                            }
                        };
                        let id = *index.entry((i, j, key_k, c)).or_insert_with(|| {
                            next += 1;
                            next - 1
                        });
                        dofs[3 * node + c] = Some((id, sign));
                    }
                }
            }
        }
        dofs
    }

    /// Number of unknowns.
    pub fn ndof(&self) -> usize {
        self.ndof
    }

    /// Number of grid nodes.
    pub fn num_nodes(&self) -> usize {
        (self.elements[0] + 1) * (self.elements[1] + 1) * (self.elements[2] + 1)
    }

    fn node(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.elements[0] + 1) * (j + (self.elements[1] + 1) * k)
    }

    /// Whether the in-plane element column `(i, j)` lies in the soft phase.
    pub fn is_soft(&self, i: usize, j: usize) -> bool {
        let n = self.cell_elements;
        self.cell_soft[i % n + n * (j % n)]
    }

    fn element_nodes(&self, i: usize, j: usize, k: usize) -> [usize; 8] {
        let mut out = [0; 8];
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.node(i + (a & 1), j + ((a >> 1) & 1), k + (a >> 2));
        }
        out
    }

    fn element_dofs(&self, i: usize, j: usize, k: usize) -> Vec<Option<(usize, f64)>> {
        self.element_nodes(i, j, k)
            .iter()
            .flat_map(|&v| (0..3).map(move |c| self.dofs[3 * v + c]))
            .collect()
    }

    /// Element edge lengths in the scaled coordinates.
    pub fn element_size(&self) -> [f64; 3] {
        let hx = self.config.epsilon / self.cell_elements as f64;
        [hx, hx, 1.0 / self.config.layers as f64]
    }

    /// Nodal displacements of a vector of unknowns.
    pub fn expand(&self, x: &[f64]) -> Vec<[f64; 3]> {
        (0..self.num_nodes())
            .map(|v| {
                let mut u = [0.0; 3];
                for (c, uc) in u.iter_mut().enumerate() {
                    if let Some((i, s)) = self.dofs[3 * v + c] {
                        *uc = s * x[i];
                    }
                }
                u
            })
            .collect()
    }

    /// Load vector of a separable body load; for `τ = 2` the in-plane part is divided by `h`.
    pub fn load_vector(&self, load: &LoadSpec) -> Result<Vec<f64>> {
        load.validate()?;
        let hel = self.element_size();
        let kind = GradKind::Scaled3d { transverse_scale: 1.0 / self.config.h };
        let pts = lagrange_points(kind, hel);
        let in_plane = if self.config.tau == 2 { 1.0 / self.config.h } else { 1.0 };
        let lengths = self.config.lengths;
        let mut f = vec![0.0; self.ndof];
        for k in 0..self.elements[2] {
            for j in 0..self.elements[1] {
                for i in 0..self.elements[0] {
                    let origin = [i as f64 * hel[0], j as f64 * hel[1], -0.5 + k as f64 * hel[2]];
                    let soft = self.is_soft(i, j);
                    let mut fe = [0.0; 24];
                    for qp in &pts {
                        let x = [origin[0] + qp.x[0], origin[1] + qp.x[1], origin[2] + qp.x[2]];
                        let mut val = [0.0; 3];
                        for t in &load.terms {
                            let s = if t.component < 2 { in_plane } else { 1.0 };
                            val[t.component] += s
                                * t.amplitude
                                * t.macro_profile.eval([x[0], x[1]], lengths)
                                * x[2].powi(t.transverse_power as i32)
                                * t.cell_profile.value(soft);
                        }
                        for (a, na) in qp.n.iter().enumerate() {
                            for c in 0..3 {
                                fe[3 * a + c] += qp.w * na * val[c];
                            }
                        }
                    }
                    for (d, v) in self.element_dofs(i, j, k).iter().zip(fe) {
                        if let Some((idx, s)) = d {
                            f[*idx] += s * v;
                        }
                    }
                }
            }
        }
        Ok(f)
    }

    /// Transverse averages and cell means of nodal displacements.
    fn averages(&self, u: &[[f64; 3]]) -> (Vec<[f64; 3]>, Vec<CellMean>) {
        let [n1, n2, nz] = self.elements;
        let plane = (n1 + 1) * (n2 + 1);
        let mut tm = vec![[0.0; 3]; plane];
        for k in 0..=nz {
            let w = if k == 0 || k == nz { 0.5 } else { 1.0 } / nz as f64;
            for (p, t) in tm.iter_mut().enumerate() {
                for c in 0..3 {
                    t[c] += w * u[p + plane * k][c];
                }
            }
        }
        let n = self.cell_elements;
        let eps = self.config.epsilon;
        let mut means = Vec::with_capacity(self.cells[0] * self.cells[1]);
        for cj in 0..self.cells[1] {
            for ci in 0..self.cells[0] {
                let mut sums = [[0.0; 3]; 2];
                let mut counts = [0usize; 2];
                for j in cj * n..(cj + 1) * n {
                    for i in ci * n..(ci + 1) * n {
                        let phase = usize::from(self.is_soft(i, j));
                        counts[phase] += 1;
                        for a in 0..4 {
                            let p = (i + (a & 1)) + (n1 + 1) * (j + (a >> 1));
                            for c in 0..3 {
                                sums[phase][c] += 0.25 * tm[p][c];
                            }
                        }
                    }
                }
                let avg = |s: [f64; 3], m: usize| if m == 0 { [0.0; 3] } else { s.map(|v| v / m as f64) };
                let all = [0, 1, 2].map(|c| (sums[0][c] + sums[1][c]) / (n * n) as f64);
                means.push(CellMean {
                    cell: [ci, cj],
                    centre: [(ci as f64 + 0.5) * eps, (cj as f64 + 0.5) * eps],
                    all,
                    stiff: avg(sums[0], counts[0]),
                    soft: avg(sums[1], counts[1]),
                });
            }
        }
        (tm, means)
    }
}

/// The `count` lowest eigenvalues of `h^{-τ} A_ε` in ascending order.
pub fn fine_eigs(fp: &FineProblem, count: usize, opts: &EigOptions) -> Result<Vec<f64>> {
    Ok(eigs_smallest(&fp.k, &fp.m, count, opts)?.values)
}

/// Solves `h^{-τ} a_ε(u, v) + λ (ρ^ε u, v) = (f, v)` for a separable load.
pub fn fine_resolvent(fp: &FineProblem, lambda: f64, load: &LoadSpec) -> Result<FineSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("λ = {lambda} must be positive")));
    }
    let f = fp.load_vector(load)?;
    let a = SparseMatrix::lin_comb(1.0, &fp.k, lambda, &fp.m)?;
    let x = Factor::cholesky(&a)?.solve(&f);
    let displacement = fp.expand(&x);
    let (transverse_mean, cell_means) = fp.averages(&displacement);
    Ok(FineSolution { lambda, displacement, transverse_mean, cell_means })
}

/// Distances of fine eigenvalues to a limit set; eigenvalues inside an essential interval whose
/// relative distance to every computed point exceeds `pollution_tol` are flagged.
pub fn compare_with_limit(fp: &FineProblem, values: &[f64], limit: &LimitSpectrum, pollution_tol: f64) -> ComparisonReport {
    let rows = values
        .iter()
        .enumerate()
        .map(|(index, &x)| {
            let mut nearest = f64::NAN;
            let mut distance = f64::INFINITY;
            for p in &limit.points {
                let d = (p.lambda - x).abs();
                if d < distance {
                    distance = d;
                    nearest = p.lambda;
                }
            }
            let point_distance = distance;
            let mut inside = false;
            for &(a, b) in &limit.intervals {
                let c = x.clamp(a, b);
                inside |= c == x;
                if (c - x).abs() < distance {
                    distance = (c - x).abs();
                    nearest = c;
                }
            }
            ComparisonRow {
                index,
                fine: x,
                nearest,
                distance,
                pollution_candidate: inside && point_distance > pollution_tol * x.abs(),
            }
        })
        .collect();
    ComparisonReport { epsilon: fp.config.epsilon, h: fp.config.h, rows }
}
