//! Degree-of-freedom numbering with periodic identification and eliminated constraints.

/// Map from `(grid node, component)` to an unknown index, or `None` when the value is fixed to zero.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Components per node.
    pub ncomp: usize,
    map: Vec<Option<usize>>,
    /// Number of unknowns carried by nodes.
    pub ndof: usize,
}

impl DofMap {
    /// Numbers the unknowns.
    ///
    /// `master(v)` gives the representative of node `v` under periodic identification;
    /// `fixed(m, c)` tells whether component `c` at master node `m` is eliminated.
    pub fn build(
        num_nodes: usize,
        ncomp: usize,
        master: impl Fn(usize) -> usize,
        fixed: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let mut master_dof: Vec<Option<usize>> = vec![None; num_nodes * ncomp];
        let mut ndof = 0;
        for v in 0..num_nodes {
            if master(v) != v {
                continue;
            }
            for c in 0..ncomp {
                if !fixed(v, c) {
                    master_dof[v * ncomp + c] = Some(ndof);
                    ndof += 1;
                }
            }
        }
        let mut map = vec![None; num_nodes * ncomp];
        for v in 0..num_nodes {
            let m = master(v);
            for c in 0..ncomp {
                map[v * ncomp + c] = master_dof[m * ncomp + c];
            }
        }
        Self { ncomp, map, ndof }
    }

    /// Unknown index of `(node, component)`.
    pub fn dof(&self, node: usize, comp: usize) -> Option<usize> {
        self.map[node * self.ncomp + comp]
    }

    /// Local-to-global map of an element, node-major.
    pub fn element_dofs(&self, nodes: &[usize]) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(nodes.len() * self.ncomp);
        for &v in nodes {
            for c in 0..self.ncomp {
                out.push(self.dof(v, c));
            }
        }
        out
    }

    /// Number of grid nodes.
    pub fn num_nodes(&self) -> usize {
        self.map.len() / self.ncomp
    }

    /// Expands an unknown vector to nodal values (zero where eliminated).
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|d| d.map(|i| x[i]).unwrap_or(0.0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_and_fixed_numbering() {
        // Three nodes on a periodic line: node 2 is the image of node 0.
        let m = DofMap::build(3, 2, |v| if v == 2 { 0 } else { v }, |v, c| v == 1 && c == 1);
        assert_eq!(m.ndof, 3);
        assert_eq!(m.dof(2, 0), m.dof(0, 0));
        assert_eq!(m.dof(1, 1), None);
        assert_eq!(m.element_dofs(&[1, 2]), vec![Some(2), None, Some(0), Some(1)]);
        assert_eq!(m.expand(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0, 0.0, 1.0, 2.0]);
    }
}
