//! Quadrature rules and shape functions on axis-aligned elements.

/// Gauss–Legendre points and weights on `[0, 1]`.
pub fn gauss01(order: usize) -> Vec<(f64, f64)> {
    let (pts, wts): (Vec<f64>, Vec<f64>) = match order {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
    };
    pts.iter()
        .zip(wts.iter())
        .map(|(p, w)| (0.5 * (p + 1.0), 0.5 * w))
        .collect()
}

/// Shape data of a Lagrange element at one quadrature point, in physical coordinates.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    /// Quadrature weight including the Jacobian.
    pub w: f64,
    /// Position relative to the element origin.
    pub x: [f64; 3],
    /// Shape function values.
    pub n: Vec<f64>,
    /// Shape function gradients (third entry zero in 2D).
    pub dn: Vec<[f64; 3]>,
}

/// Bilinear shape data on `[0, hx] × [0, hy]`; nodes ordered `(0,0), (1,0), (0,1), (1,1)`.
pub fn q1_points_2d(h: [f64; 2], order: usize) -> Vec<QuadPoint> {
    let g = gauss01(order);
    let mut out = Vec::with_capacity(g.len() * g.len());
    for &(t, wt) in &g {
        for &(s, ws) in &g {
            let lx = [1.0 - s, s];
            let ly = [1.0 - t, t];
            let dx = [-1.0 / h[0], 1.0 / h[0]];
            let dy = [-1.0 / h[1], 1.0 / h[1]];
            let mut n = Vec::with_capacity(4);
            let mut dn = Vec::with_capacity(4);
            for b in 0..2 {
                for a in 0..2 {
                    n.push(lx[a] * ly[b]);
                    dn.push([dx[a] * ly[b], lx[a] * dy[b], 0.0]);
                }
            }
            out.push(QuadPoint {
                w: ws * wt * h[0] * h[1],
                x: [s * h[0], t * h[1], 0.0],
                n,
                dn,
            });
        }
    }
    out
}

/// Trilinear shape data on `[0, hx] × [0, hy] × [0, hz]`; nodes ordered x fastest, then y, then z.
pub fn q1_points_3d(h: [f64; 3], order: usize) -> Vec<QuadPoint> {
    let g = gauss01(order);
    let mut out = Vec::with_capacity(g.len().pow(3));
    for &(u, wu) in &g {
        for &(t, wt) in &g {
            for &(s, ws) in &g {
                let l = [[1.0 - s, s], [1.0 - t, t], [1.0 - u, u]];
                let d = [
                    [-1.0 / h[0], 1.0 / h[0]],
                    [-1.0 / h[1], 1.0 / h[1]],
                    [-1.0 / h[2], 1.0 / h[2]],
                ];
                let mut n = Vec::with_capacity(8);
                let mut dn = Vec::with_capacity(8);
                for c in 0..2 {
                    for b in 0..2 {
                        for a in 0..2 {
                            n.push(l[0][a] * l[1][b] * l[2][c]);
                            dn.push([
                                d[0][a] * l[1][b] * l[2][c],
                                l[0][a] * d[1][b] * l[2][c],
                                l[0][a] * l[1][b] * d[2][c],
                            ]);
                        }
                    }
                }
                out.push(QuadPoint {
                    w: ws * wt * wu * h[0] * h[1] * h[2],
                    x: [s * h[0], t * h[1], u * h[2]],
                    n,
                    dn,
                });
            }
        }
    }
    out
}

/// Shape data of the Bogner–Fox–Schmit element at one quadrature point.
#[derive(Debug, Clone)]
pub struct BfsPoint {
    /// Quadrature weight including the Jacobian.
    pub w: f64,
    /// Position relative to the element origin.
    pub x: [f64; 2],
    /// Values of the 16 shape functions.
    pub n: [f64; 16],
    /// Gradients.
    pub dn: [[f64; 2]; 16],
    /// Second derivatives `(∂11, ∂22, ∂12)`.
    pub d2n: [[f64; 3]; 16],
}

/// Cubic Hermite functions on `[0, h]` and their first two derivatives at `s = x/h`:
/// value at 0, slope at 0, value at 1, slope at 1.
fn hermite(s: f64, h: f64) -> [[f64; 3]; 4] {
    [
        [
            1.0 - 3.0 * s * s + 2.0 * s.powi(3),
            (-6.0 * s + 6.0 * s * s) / h,
            (-6.0 + 12.0 * s) / (h * h),
        ],
        [
            h * (s - 2.0 * s * s + s.powi(3)),
            1.0 - 4.0 * s + 3.0 * s * s,
            (-4.0 + 6.0 * s) / h,
        ],
        [
            3.0 * s * s - 2.0 * s.powi(3),
            (6.0 * s - 6.0 * s * s) / h,
            (6.0 - 12.0 * s) / (h * h),
        ],
        [
            h * (-s * s + s.powi(3)),
            -2.0 * s + 3.0 * s * s,
            (-2.0 + 6.0 * s) / h,
        ],
    ]
}

/// Evaluates the BFS basis at a reference point `(s, t) ∈ [0,1]²` on an element of size `h`.
///
/// Local DOFs are ordered by node `(0,0), (1,0), (0,1), (1,1)` and per node
/// `(w, ∂1 w, ∂2 w, ∂12 w)`.
pub fn bfs_eval(s: f64, t: f64, h: [f64; 2]) -> ([f64; 16], [[f64; 2]; 16], [[f64; 3]; 16]) {
    let hx = hermite(s, h[0]);
    let hy = hermite(t, h[1]);
    let mut n = [0.0; 16];
    let mut dn = [[0.0; 2]; 16];
    let mut d2n = [[0.0; 3]; 16];
    for b in 0..2 {
        for a in 0..2 {
            let node = a + 2 * b;
            let fx = [hx[2 * a], hx[2 * a + 1]];
            let fy = [hy[2 * b], hy[2 * b + 1]];
            for (k, (px, py)) in [(0, 0), (1, 0), (0, 1), (1, 1)].iter().enumerate() {
                let x = fx[*px];
                let y = fy[*py];
                let i = 4 * node + k;
                n[i] = x[0] * y[0];
                dn[i] = [x[1] * y[0], x[0] * y[1]];
                d2n[i] = [x[2] * y[0], x[0] * y[2], x[1] * y[1]];
            }
        }
    }
    (n, dn, d2n)
}

/// BFS shape data at the tensor Gauss points of an element of size `h`.
pub fn bfs_points(h: [f64; 2], order: usize) -> Vec<BfsPoint> {
    let g = gauss01(order);
    let mut out = Vec::with_capacity(g.len() * g.len());
    for &(t, wt) in &g {
        for &(s, ws) in &g {
            let (n, dn, d2n) = bfs_eval(s, t, h);
            out.push(BfsPoint {
                w: ws * wt * h[0] * h[1],
                x: [s * h[0], t * h[1]],
                n,
                dn,
                d2n,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        for order in 1..=4 {
            let deg = 2 * order - 1;
            for p in 0..=deg {
                let s: f64 = gauss01(order).iter().map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn q1_partition_of_unity() {
        for qp in q1_points_3d([0.5, 0.25, 0.1], 2) {
            assert!((qp.n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for c in 0..3 {
                assert!(qp.dn.iter().map(|d| d[c]).sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bfs_reproduces_bicubics() {
        let h = [0.3, 0.2];
        // u = x^3 y^2 + 2 x y
        let u = |x: f64, y: f64| x.powi(3) * y * y + 2.0 * x * y;
        let ux = |x: f64, y: f64| 3.0 * x * x * y * y + 2.0 * y;
        let uy = |x: f64, y: f64| 2.0 * x.powi(3) * y + 2.0 * x;
        let uxy = |x: f64, y: f64| 6.0 * x * x * y + 2.0;
        let mut dofs = [0.0; 16];
        for b in 0..2 {
            for a in 0..2 {
                let (x, y) = (a as f64 * h[0], b as f64 * h[1]);
                let base = 4 * (a + 2 * b);
                dofs[base] = u(x, y);
                dofs[base + 1] = ux(x, y);
                dofs[base + 2] = uy(x, y);
                dofs[base + 3] = uxy(x, y);
            }
        }
        let (s, t) = (0.37, 0.81);
        let (x, y) = (s * h[0], t * h[1]);
        let (n, dn, d2n) = bfs_eval(s, t, h);
        let val: f64 = (0..16).map(|i| n[i] * dofs[i]).sum();
        let gx: f64 = (0..16).map(|i| dn[i][0] * dofs[i]).sum();
        let hxx: f64 = (0..16).map(|i| d2n[i][0] * dofs[i]).sum();
        let hyy: f64 = (0..16).map(|i| d2n[i][1] * dofs[i]).sum();
        let hxy: f64 = (0..16).map(|i| d2n[i][2] * dofs[i]).sum();
        assert!((val - u(x, y)).abs() < 1e-13);
        assert!((gx - ux(x, y)).abs() < 1e-12);
        assert!((hxx - 6.0 * x * y * y).abs() < 1e-11);
        assert!((hyy - 2.0 * x.powi(3)).abs() < 1e-11);
        assert!((hxy - uxy(x, y)).abs() < 1e-11);
    }
}
