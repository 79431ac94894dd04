use crate::error::{Error, Result};

/// Degrees of freedom per node: `u1, u2, v, ∂1v, ∂2v, ∂12v`.
pub const NODE_DOFS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    pub fn name(self) -> &'static str {
        match self {
            Edge::Left => "left",
            Edge::Right => "right",
            Edge::Bottom => "bottom",
            Edge::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Edge> {
        Edge::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Nonempty subset of the rectangle's edges carrying Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeSet([bool; 4]);

impl EdgeSet {
    pub fn new(edges: &[Edge]) -> Result<Self> {
        let mut set = [false; 4];
        for e in edges {
            set[*e as usize] = true;
        }
        if !set.iter().any(|&b| b) {
            return Err(Error::InvalidParameter(
                "gamma_d must contain at least one edge".into(),
            ));
        }
        Ok(EdgeSet(set))
    }

    pub fn all() -> Self {
        EdgeSet([true; 4])
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.0[e as usize]
    }

    pub fn edges(&self) -> Vec<Edge> {
        Edge::ALL.into_iter().filter(|e| self.contains(*e)).collect()
    }

    /// Whether the Dirichlet part is a connected arc with two endpoints on
    /// the boundary (a single edge, or two/three consecutive edges).
    pub fn is_simple_arc(&self) -> bool {
        // boundary cycle order: bottom, right, top, left
        let cycle = [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left];
        let bits: Vec<bool> = cycle.iter().map(|e| self.contains(*e)).collect();
        let n = bits.iter().filter(|&&b| b).count();
        if n == 4 {
            return false;
        }
        let runs = (0..4).filter(|&i| bits[i] && !bits[(i + 3) % 4]).count();
        runs == 1
    }

    pub fn to_config_string(&self) -> String {
        self.edges()
            .iter()
            .map(|e| e.name())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Gauss–Legendre rule mapped to `[a, b]`, weights normalized to sum 1.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        // ascending order
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let xs = x.iter().map(|z| mid + half * z).collect();
    let ws = w.iter().map(|v| 0.5 * v).collect();
    (xs, ws)
}

/// Uniform structured grid on `[0, lx] × [0, ly]` with Gauss points in
/// plane (`nq × nq` per cell) and through the thickness (`nz` on (−½, ½)).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nq: usize,
    pub gamma_d: EdgeSet,
    qx: Vec<f64>,
    qw: Vec<f64>,
    zx: Vec<f64>,
    zw: Vec<f64>,
}

pub const DEFAULT_INPLANE_POINTS: usize = 3;

impl Grid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize, nz: usize, gamma_d: EdgeSet) -> Result<Self> {
        Self::with_inplane_points(lx, ly, nx, ny, nz, DEFAULT_INPLANE_POINTS, gamma_d)
    }

    pub fn with_inplane_points(
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
        nz: usize,
        nq: usize,
        gamma_d: EdgeSet,
    ) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidParameter("domain lengths must be > 0".into()));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("cell counts must be >= 1".into()));
        }
        if nz < 2 {
            return Err(Error::InvalidParameter("nz must be >= 2".into()));
        }
        if !(2..=4).contains(&nq) {
            return Err(Error::InvalidParameter(
                "in-plane quadrature order must be 2, 3 or 4".into(),
            ));
        }
        let (qx, qw) = gauss_legendre(nq, 0.0, 1.0);
        let (zx, zw) = gauss_legendre(nz, -0.5, 0.5);
        Ok(Grid {
            lx,
            ly,
            nx,
            ny,
            nz,
            nq,
            gamma_d,
            qx,
            qw,
            zx,
            zw,
        })
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_dofs(&self) -> usize {
        NODE_DOFS * self.n_nodes()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// In-plane quadrature points per cell.
    pub fn points_per_cell(&self) -> usize {
        self.nq * self.nq
    }

    pub fn n_inplane_points(&self) -> usize {
        self.n_cells() * self.points_per_cell()
    }

    /// Total number of (cell, in-plane point, layer) quadrature points.
    pub fn n_points(&self) -> usize {
        self.n_inplane_points() * self.nz
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n % (self.nx + 1), n / (self.nx + 1))
    }

    pub fn node_pos(&self, n: usize) -> (f64, f64) {
        let (i, j) = self.node_ij(n);
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    /// Corner nodes in the order (i,j), (i+1,j), (i,j+1), (i+1,j+1).
    pub fn cell_nodes(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(c);
        [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i, j + 1),
            self.node(i + 1, j + 1),
        ]
    }

    /// Local coordinates `(ξ, η) ∈ [0,1]²` of in-plane point `g` of a cell.
    pub fn local_point(&self, g: usize) -> (f64, f64) {
        (self.qx[g % self.nq], self.qx[g / self.nq])
    }

    /// Area weight of in-plane point `g` (cell area times the rule weight).
    pub fn inplane_weight(&self, g: usize) -> f64 {
        self.hx() * self.hy() * self.qw[g % self.nq] * self.qw[g / self.nq]
    }

    pub fn inplane_position(&self, c: usize, g: usize) -> (f64, f64) {
        let (i, j) = self.cell_ij(c);
        let (xi, eta) = self.local_point(g);
        ((i as f64 + xi) * self.hx(), (j as f64 + eta) * self.hy())
    }

    pub fn layers(&self) -> &[f64] {
        &self.zx
    }

    pub fn layer_weights(&self) -> &[f64] {
        &self.zw
    }

    /// `Σ w_l z_l²`, equal to 1/12 for every admissible `nz`.
    pub fn second_moment(&self) -> f64 {
        self.zx.iter().zip(&self.zw).map(|(z, w)| w * z * z).sum()
    }

    /// Flat index of (cell, in-plane point, layer).
    pub fn point_index(&self, c: usize, g: usize, l: usize) -> usize {
        (c * self.points_per_cell() + g) * self.nz + l
    }

    /// Quadrature weight of a flat point index (area × layer weight).
    pub fn point_weight(&self, idx: usize) -> f64 {
        let l = idx % self.nz;
        let g = (idx / self.nz) % self.points_per_cell();
        self.inplane_weight(g) * self.zw[l]
    }

    pub fn is_boundary_node(&self, n: usize, edge: Edge) -> bool {
        let (i, j) = self.node_ij(n);
        match edge {
            Edge::Left => i == 0,
            Edge::Right => i == self.nx,
            Edge::Bottom => j == 0,
            Edge::Top => j == self.ny,
        }
    }

    /// Nodes lying on the Dirichlet part.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| {
                self.gamma_d
                    .edges()
                    .into_iter()
                    .any(|e| self.is_boundary_node(n, e))
            })
            .collect()
    }

    /// Mask over all DOFs, `true` where the DOF is prescribed.
    pub fn constrained_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_dofs()];
        for n in self.dirichlet_nodes() {
            for k in 0..NODE_DOFS {
                mask[NODE_DOFS * n + k] = true;
            }
        }
        mask
    }

    pub fn same_layout(&self, o: &Grid) -> bool {
        self.nx == o.nx && self.ny == o.ny && self.nz == o.nz && self.nq == o.nq
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thickness_rule_moments() {
        for nz in 2..=8 {
            let g = Grid::new(1.0, 1.0, 4, 4, nz, EdgeSet::all()).unwrap();
            let w = g.layer_weights();
            let z = g.layers();
            let s0: f64 = w.iter().sum();
            let s1: f64 = z.iter().zip(w).map(|(z, w)| z * w).sum();
            assert!((s0 - 1.0).abs() < 1e-12);
            assert!(s1.abs() < 1e-12);
            assert!((g.second_moment() - 1.0 / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inplane_weights_sum_to_area() {
        let g = Grid::new(2.0, 0.5, 5, 4, 2, EdgeSet::all()).unwrap();
        let total: f64 = (0..g.n_points()).map(|i| g.point_weight(i)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_rule_integrates_quintics() {
        let (x, w) = gauss_legendre(3, 0.0, 1.0);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(5)).sum();
        assert!((integral - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn empty_dirichlet_set_rejected() {
        assert!(EdgeSet::new(&[]).is_err());
    }

    #[test]
    fn arc_classification() {
        assert!(EdgeSet::new(&[Edge::Left]).unwrap().is_simple_arc());
        assert!(EdgeSet::new(&[Edge::Left, Edge::Bottom]).unwrap().is_simple_arc());
        assert!(!EdgeSet::new(&[Edge::Left, Edge::Right]).unwrap().is_simple_arc());
        assert!(!EdgeSet::all().is_simple_arc());
    }
}
