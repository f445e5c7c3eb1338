//! Structured periodic meshes of the unit cell, the inclusion and the prisms
//! over them, plus rectangular macroscopic meshes of the mid-plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusion shape family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    /// Disk of given radius.
    #[default]
    Disk,
    /// Axis-aligned square of given half-side.
    Square,
}

/// Inclusion `Y0` inside the unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionShape {
    /// Shape family.
    pub kind: ShapeKind,
    /// Center in the open unit square.
    #[serde(default = "default_center")]
    pub center: [f64; 2],
    /// Radius for disks, half-side for squares.
    pub size: f64,
}

fn default_center() -> [f64; 2] {
    [0.5, 0.5]
}

impl InclusionShape {
    /// Centered disk of radius `r`.
    pub fn disk(r: f64) -> Self {
        Self {
            kind: ShapeKind::Disk,
            center: default_center(),
            size: r,
        }
    }

    /// Centered square of half-side `a`.
    pub fn square(a: f64) -> Self {
        Self {
            kind: ShapeKind::Square,
            center: default_center(),
            size: a,
        }
    }

    /// Whether the point lies in the open shape.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        match self.kind {
            ShapeKind::Disk => dx * dx + dy * dy < self.size * self.size,
            ShapeKind::Square => dx.abs() < self.size && dy.abs() < self.size,
        }
    }

    /// Exact area of the shape.
    pub fn analytic_area(&self) -> f64 {
        match self.kind {
            ShapeKind::Disk => std::f64::consts::PI * self.size * self.size,
            ShapeKind::Square => 4.0 * self.size * self.size,
        }
    }

    /// Whether the boundary is `C^{1,1}` (disks) rather than Lipschitz only (squares).
    pub fn is_c11(&self) -> bool {
        self.kind == ShapeKind::Disk
    }

    /// Checks that the closure of the shape lies strictly inside the unit cell.
    pub fn validate(&self) -> Result<()> {
        if !(self.size > 0.0 && self.size < 0.5) {
            return Err(Error::Geometry(format!("size {} not in (0, 0.5)", self.size)));
        }
        for c in self.center {
            if c - self.size <= 0.0 || c + self.size >= 1.0 {
                return Err(Error::Geometry("inclusion touches the cell boundary".into()));
            }
        }
        Ok(())
    }
}

/// Material phase of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Stiff matrix `Y1`.
    Stiff,
    /// Soft inclusion `Y0`.
    Soft,
}

/// Structured mesh of the periodic cell `Y` (dim 2) or of the prism `I × Y` (dim 3).
///
/// Nodes are numbered on the full `(n+1)²` grid (times `n_z + 1` layers), with
/// node `(i, j, k)` at index `i + (n+1) j + (n+1)² k`. Elements are numbered
/// `i + n j + n² k`.
#[derive(Debug, Clone, Serialize)]
pub struct CellMesh {
    /// Inclusion shape, `None` in the no-inclusion validation mode.
    pub shape: Option<InclusionShape>,
    /// Elements per side.
    pub n: usize,
    /// Spatial dimension, 2 or 3.
    pub dim: usize,
    /// Layers over the transverse interval (1 when `dim = 2`).
    pub n_z: usize,
    /// Transverse interval covered by the layers, `[-1/2, 1/2]` unless restricted to a half.
    pub z_range: [f64; 2],
    /// Phase per element.
    pub element_material: Vec<Phase>,
    /// Master node of every node under the in-plane periodic identification.
    pub periodic_map: Vec<usize>,
    /// In-plane nodes incident to both phases.
    pub inclusion_boundary_nodes: Vec<usize>,
}

impl CellMesh {
    /// Number of in-plane grid nodes per layer.
    pub fn nodes_per_layer(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    /// Total number of grid nodes.
    pub fn num_nodes(&self) -> usize {
        self.nodes_per_layer() * if self.dim == 3 { self.n_z + 1 } else { 1 }
    }

    /// Total number of elements.
    pub fn num_elements(&self) -> usize {
        self.element_material.len()
    }

    /// Mesh width.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Layer thickness.
    pub fn hz(&self) -> f64 {
        (self.z_range[1] - self.z_range[0]) / self.n_z as f64
    }

    /// Copy of a prism mesh whose layers cover `[z0, z1]` instead of the full interval.
    pub fn with_z_range(&self, z0: f64, z1: f64) -> Self {
        let mut m = self.clone();
        m.z_range = [z0, z1];
        m
    }

    /// Prism over the upper half `(0, 1/2)` of the transverse interval with half the layers.
    pub fn half_prism(&self) -> Result<Self> {
        if self.dim != 3 || !self.n_z.is_multiple_of(2) {
            return Err(Error::Geometry("half prism requires a prism mesh with an even layer count".into()));
        }
        let soft2d = (0..self.n * self.n).map(|c| self.column_soft(c % self.n, c / self.n)).collect();
        Ok(assemble_mesh(self.shape, self.n, 3, self.n_z / 2, soft2d).with_z_range(0.0, 0.5))
    }

    /// Whether the in-plane element column `(i, j)` is soft.
    pub fn column_soft(&self, i: usize, j: usize) -> bool {
        self.element_material[i + self.n * j] == Phase::Soft
    }

    /// Whether element `e` is soft.
    pub fn is_soft(&self, e: usize) -> bool {
        self.element_material[e] == Phase::Soft
    }

    /// Grid node index.
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.n + 1) * j + self.nodes_per_layer() * k
    }

    /// Grid coordinates `(i, j, k)` of a node.
    pub fn node_ijk(&self, v: usize) -> (usize, usize, usize) {
        let npl = self.nodes_per_layer();
        let k = v / npl;
        let r = v % npl;
        (r % (self.n + 1), r / (self.n + 1), k)
    }

    /// Position of a node; the third coordinate ranges over `[-1/2, 1/2]`.
    pub fn node_pos(&self, v: usize) -> [f64; 3] {
        let (i, j, k) = self.node_ijk(v);
        let z = if self.dim == 3 {
            self.z_range[0] + k as f64 * self.hz()
        } else {
            0.0
        };
        [i as f64 * self.h(), j as f64 * self.h(), z]
    }

    /// Element grid coordinates `(i, j, k)`.
    pub fn element_ijk(&self, e: usize) -> (usize, usize, usize) {
        let nn = self.n * self.n;
        (e % self.n, (e % nn) / self.n, e / nn)
    }

    /// Nodes of element `e` in lexicographic order (x fastest, then y, then z).
    pub fn element_nodes(&self, e: usize) -> Vec<usize> {
        let (i, j, k) = self.element_ijk(e);
        let mut v = Vec::with_capacity(8);
        let layers = if self.dim == 3 { 2 } else { 1 };
        for dk in 0..layers {
            for dj in 0..2 {
                for di in 0..2 {
                    v.push(self.node(i + di, j + dj, k + dk));
                }
            }
        }
        v
    }

    /// Number of soft in-plane columns that touch the in-plane node `(i, j)` (periodically), out of four.
    fn soft_neighbours(&self, i: usize, j: usize) -> usize {
        let n = self.n as isize;
        let mut s = 0;
        for dj in [-1isize, 0] {
            for di in [-1isize, 0] {
                let ei = (i as isize + di).rem_euclid(n) as usize;
                let ej = (j as isize + dj).rem_euclid(n) as usize;
                if self.column_soft(ei, ej) {
                    s += 1;
                }
            }
        }
        s
    }

    /// Number of soft columns among the four around the in-plane node `(i, j)`.
    pub fn soft_neighbour_count(&self, i: usize, j: usize) -> usize {
        self.soft_neighbours(i, j)
    }

    /// Whether the in-plane node `(i, j)` touches only soft elements.
    pub fn node_interior_soft(&self, i: usize, j: usize) -> bool {
        self.soft_neighbours(i, j) == 4
    }

    /// Whether the in-plane node `(i, j)` touches at least one stiff element.
    pub fn node_touches_stiff(&self, i: usize, j: usize) -> bool {
        self.soft_neighbours(i, j) < 4
    }

    /// Soft area fraction computed from the element flags.
    pub fn soft_fraction(&self) -> f64 {
        let nn = self.n * self.n;
        self.element_material[..nn]
            .iter()
            .filter(|p| **p == Phase::Soft)
            .count() as f64
            / nn as f64
    }

    /// Number of soft elements.
    pub fn soft_count(&self) -> usize {
        self.element_material.iter().filter(|p| **p == Phase::Soft).count()
    }
}

fn assemble_mesh(
    shape: Option<InclusionShape>,
    n: usize,
    dim: usize,
    n_z: usize,
    soft2d: Vec<bool>,
) -> CellMesh {
    let layers = if dim == 3 { n_z } else { 1 };
    let mut element_material = Vec::with_capacity(n * n * layers);
    for _ in 0..layers {
        element_material.extend(
            soft2d
                .iter()
                .map(|&s| if s { Phase::Soft } else { Phase::Stiff }),
        );
    }
    let node_layers = if dim == 3 { n_z + 1 } else { 1 };
    let npl = (n + 1) * (n + 1);
    let mut periodic_map = Vec::with_capacity(npl * node_layers);
    for k in 0..node_layers {
        for j in 0..=n {
            for i in 0..=n {
                periodic_map.push((i % n) + (n + 1) * (j % n) + npl * k);
            }
        }
    }
    let mut mesh = CellMesh {
        shape,
        n,
        dim,
        n_z: if dim == 3 { n_z } else { 1 },
        z_range: [-0.5, 0.5],
        element_material,
        periodic_map,
        inclusion_boundary_nodes: Vec::new(),
    };
    let mut boundary = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let s = mesh.soft_neighbours(i, j);
            if s > 0 && s < 4 {
                boundary.push(i + (n + 1) * j);
            }
        }
    }
    mesh.inclusion_boundary_nodes = boundary;
    mesh
}

/// Builds the cell mesh with centroid-based phase flags.
pub fn build_cell_mesh(shape: &InclusionShape, n: usize, dim: usize, n_z: usize) -> Result<CellMesh> {
    if n < 4 {
        return Err(Error::Geometry(format!("resolution {n} below 4")));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::Geometry(format!("dimension {dim} not in {{2, 3}}")));
    }
    if dim == 3 && n_z < 2 {
        return Err(Error::Geometry(format!("{n_z} layers, at least 2 required")));
    }
    shape.validate()?;
    let h = 1.0 / n as f64;
    let mut soft2d = vec![false; n * n];
    for j in 0..n {
        for i in 0..n {
            let c = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            soft2d[i + n * j] = shape.contains(c);
        }
    }
    for j in 0..n {
        for i in 0..n {
            let on_ring = i == 0 || j == 0 || i == n - 1 || j == n - 1;
            if on_ring && soft2d[i + n * j] {
                return Err(Error::Geometry(
                    "discrete inclusion reaches the cell boundary".into(),
                ));
            }
        }
    }
    if !soft2d.iter().any(|&s| s) {
        return Err(Error::Geometry("inclusion not resolved by the mesh".into()));
    }
    Ok(assemble_mesh(Some(*shape), n, dim, n_z, soft2d))
}

/// Builds a cell mesh without inclusion, used for analytic validation.
pub fn build_cell_mesh_without_inclusion(n: usize, dim: usize, n_z: usize) -> Result<CellMesh> {
    if n < 1 || (dim == 3 && n_z < 1) {
        return Err(Error::Geometry("empty mesh".into()));
    }
    Ok(assemble_mesh(None, n, dim, n_z, vec![false; n * n]))
}

/// Edge of the rectangular mid-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    /// `x1 = 0`.
    Left,
    /// `x1 = L1`.
    Right,
    /// `x2 = 0`.
    Bottom,
    /// `x2 = L2`.
    Top,
}

/// Structured mesh of the mid-plane `ω = [0, L1] × [0, L2]`.
#[derive(Debug, Clone, Serialize)]
pub struct MacroMesh {
    /// Side lengths.
    pub lengths: [f64; 2],
    /// Elements per side.
    pub n: [usize; 2],
    /// Clamped edges.
    pub gamma_d: Vec<Edge>,
    /// Dirichlet flag per node.
    pub dirichlet: Vec<bool>,
}

impl MacroMesh {
    /// Number of nodes.
    pub fn num_nodes(&self) -> usize {
        (self.n[0] + 1) * (self.n[1] + 1)
    }

    /// Number of elements.
    pub fn num_elements(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Element widths.
    pub fn h(&self) -> [f64; 2] {
        [
            self.lengths[0] / self.n[0] as f64,
            self.lengths[1] / self.n[1] as f64,
        ]
    }

    /// Node index of grid point `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> usize {
        i + (self.n[0] + 1) * j
    }

    /// Position of a node.
    pub fn node_pos(&self, v: usize) -> [f64; 2] {
        let h = self.h();
        let i = v % (self.n[0] + 1);
        let j = v / (self.n[0] + 1);
        [i as f64 * h[0], j as f64 * h[1]]
    }

    /// Nodes of element `e` in lexicographic order.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let i = e % self.n[0];
        let j = e / self.n[0];
        [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i, j + 1),
            self.node(i + 1, j + 1),
        ]
    }

    /// Lower-left corner of element `e`.
    pub fn element_origin(&self, e: usize) -> [f64; 2] {
        let h = self.h();
        [(e % self.n[0]) as f64 * h[0], (e / self.n[0]) as f64 * h[1]]
    }

    /// Number of Dirichlet nodes.
    pub fn num_dirichlet(&self) -> usize {
        self.dirichlet.iter().filter(|d| **d).count()
    }
}

/// Builds the mid-plane mesh with the given clamped edges.
pub fn build_macro_mesh(l1: f64, l2: f64, n1: usize, n2: usize, gamma_d: &[Edge]) -> Result<MacroMesh> {
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(Error::Config("side lengths must be positive".into()));
    }
    if n1 < 2 || n2 < 2 {
        return Err(Error::Config("at least two elements per side are required".into()));
    }
    if gamma_d.is_empty() {
        return Err(Error::Config("the clamped boundary must contain an edge".into()));
    }
    let mut dirichlet = vec![false; (n1 + 1) * (n2 + 1)];
    for j in 0..=n2 {
        for i in 0..=n1 {
            let on = gamma_d.iter().any(|e| match e {
                Edge::Left => i == 0,
                Edge::Right => i == n1,
                Edge::Bottom => j == 0,
                Edge::Top => j == n2,
            });
            dirichlet[i + (n1 + 1) * j] = on;
        }
    }
    let mut edges = gamma_d.to_vec();
    edges.dedup();
    Ok(MacroMesh {
        lengths: [l1, l2],
        n: [n1, n2],
        gamma_d: edges,
        dirichlet,
    })
}
