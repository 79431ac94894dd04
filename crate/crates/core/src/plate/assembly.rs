//! Element-level evaluation of fields, elastic energy, gradient and Hessian.

use nalgebra::{SMatrix, Vector3};

use crate::forms::ReducedStiffness;
use crate::tensor::{Mat2, Sym2};

use super::element::ShapeTable;
use super::fields::{Alpha, PlateState};
use super::grid::{Grid, NODE_DOFS};

pub const CELL_DOFS: usize = 4 * NODE_DOFS;

type BMat = SMatrix<f64, 3, CELL_DOFS>;
pub type CellMatrix = SMatrix<f64, CELL_DOFS, CELL_DOFS>;

/// Global DOF numbers of a cell, local index `6 * corner + kind`.
pub fn cell_dofs(grid: &Grid, c: usize) -> [usize; CELL_DOFS] {
    let nodes = grid.cell_nodes(c);
    let mut out = [0; CELL_DOFS];
    for (a, slot) in out.iter_mut().enumerate() {
        *slot = NODE_DOFS * nodes[a / NODE_DOFS] + a % NODE_DOFS;
    }
    out
}

/// Field values at one in-plane quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct PointData {
    pub u: [f64; 2],
    /// `grad_u[(i, j)] = ∂u_i/∂x_j`.
    pub grad_u: Mat2,
    pub v: f64,
    pub grad_v: [f64; 2],
    pub hess_v: Sym2,
}

impl PointData {
    pub fn new(grid: &Grid, shapes: &ShapeTable, dofs: &[f64], c: usize, g: usize) -> Self {
        let idx = cell_dofs(grid, c);
        let lin = &shapes.linear[g];
        let her = &shapes.hermite[g];
        let mut u = [0.0; 2];
        let mut grad_u = Mat2::zeros();
        let (mut v, mut grad_v) = (0.0, [0.0; 2]);
        let (mut vxx, mut vyy, mut vxy) = (0.0, 0.0, 0.0);
        for corner in 0..4 {
            let base = NODE_DOFS * corner;
            let s = lin[corner];
            for comp in 0..2 {
                let d = dofs[idx[base + comp]];
                u[comp] += d * s.val;
                grad_u[(comp, 0)] += d * s.dx;
                grad_u[(comp, 1)] += d * s.dy;
            }
            for kind in 0..4 {
                let d = dofs[idx[base + 2 + kind]];
                let h = her[4 * corner + kind];
                v += d * h.val;
                grad_v[0] += d * h.dx;
                grad_v[1] += d * h.dy;
                vxx += d * h.dxx;
                vyy += d * h.dyy;
                vxy += d * h.dxy;
            }
        }
        PointData {
            u,
            grad_u,
            v,
            grad_v,
            hess_v: Sym2::new(vxx, vyy, vxy),
        }
    }

    /// `sym∇u + (l/2)∇v⊗∇v`.
    pub fn membrane(&self, l: f64) -> Sym2 {
        Sym2::sym(&self.grad_u) + (0.5 * l) * Sym2::sym_outer(self.grad_v, self.grad_v)
    }
}

/// Elastic energy `∫Q₂(e_α)` with its first and second derivatives in the DOFs.
#[derive(Debug, Clone)]
pub struct ElasticAssembler {
    pub grid: Grid,
    shapes: ShapeTable,
    stiffness: ReducedStiffness,
    alpha: Alpha,
    s1: f64,
    s2: f64,
}

impl ElasticAssembler {
    pub fn new(grid: &Grid, stiffness: &ReducedStiffness, alpha: Alpha) -> Self {
        let zs = grid.layers();
        let ws = grid.layer_weights();
        ElasticAssembler {
            grid: grid.clone(),
            shapes: ShapeTable::new(grid),
            stiffness: *stiffness,
            alpha,
            s1: zs.iter().zip(ws).map(|(z, w)| w * z).sum(),
            s2: zs.iter().zip(ws).map(|(z, w)| w * z * z).sum(),
        }
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn stiffness(&self) -> &ReducedStiffness {
        &self.stiffness
    }

    /// Membrane/bending variations of the 24 cell DOFs at point `g`.
    fn variations(&self, g: usize, grad_v: [f64; 2]) -> (BMat, BMat) {
        let l = self.alpha.l();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut bm = BMat::zeros();
        let mut bk = BMat::zeros();
        let lin = &self.shapes.linear[g];
        let her = &self.shapes.hermite[g];
        for corner in 0..4 {
            let base = NODE_DOFS * corner;
            let s = lin[corner];
            bm.set_column(base, &Vector3::new(s.dx, 0.0, r * s.dy));
            bm.set_column(base + 1, &Vector3::new(0.0, s.dy, r * s.dx));
            for kind in 0..4 {
                let h = her[4 * corner + kind];
                if l != 0.0 {
                    bm.set_column(
                        base + 2 + kind,
                        &(l * Vector3::new(
                            grad_v[0] * h.dx,
                            grad_v[1] * h.dy,
                            r * (grad_v[0] * h.dy + grad_v[1] * h.dx),
                        )),
                    );
                }
                bk.set_column(
                    base + 2 + kind,
                    &Vector3::new(h.dxx, h.dyy, std::f64::consts::SQRT_2 * h.dxy),
                );
            }
        }
        (bm, bk)
    }

    /// Mandel resultants `(Σ w M e, Σ w z M e)` over the layers of a point and
    /// the energy `Σ w ½ e·Me`, all without the in-plane weight.
    fn resultants(&self, state: &PlateState, c: usize, g: usize, k: &PointData) -> (Vector3<f64>, Vector3<f64>, f64) {
        let m = k.membrane(self.alpha.l());
        let mut n = Vector3::zeros();
        let mut mo = Vector3::zeros();
        let mut energy = 0.0;
        let mat = self.stiffness.matrix();
        for (l, (&z, &w)) in self.grid.layers().iter().zip(self.grid.layer_weights()).enumerate() {
            let p = state.p[self.grid.point_index(c, g, l)].in_plane();
            let e = (m - z * k.hess_v - p).mandel();
            let s = mat * e;
            n += w * s;
            mo += (w * z) * s;
            energy += 0.5 * w * e.dot(&s);
        }
        (n, mo, energy)
    }

    pub fn energy(&self, state: &PlateState) -> f64 {
        let mut total = 0.0;
        for c in 0..self.grid.n_cells() {
            for g in 0..self.grid.points_per_cell() {
                let k = PointData::new(&self.grid, &self.shapes, &state.dofs, c, g);
                total += self.grid.inplane_weight(g) * self.resultants(state, c, g, &k).2;
            }
        }
        total
    }

    pub fn gradient(&self, state: &PlateState) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_dofs()];
        for c in 0..self.grid.n_cells() {
            let idx = cell_dofs(&self.grid, c);
            for g in 0..self.grid.points_per_cell() {
                let k = PointData::new(&self.grid, &self.shapes, &state.dofs, c, g);
                let (n, mo, _) = self.resultants(state, c, g, &k);
                let (bm, bk) = self.variations(g, k.grad_v);
                let w = self.grid.inplane_weight(g);
                let local = bm.transpose() * n - bk.transpose() * mo;
                for (a, &i) in idx.iter().enumerate() {
                    out[i] += w * local[a];
                }
            }
        }
        out
    }

    /// `‖ℂ₂e‖` in `L²` over the plate.
    pub fn stress_norm(&self, state: &PlateState) -> f64 {
        let mat = self.stiffness.matrix();
        let m_l = self.alpha.l();
        let mut total = 0.0;
        for c in 0..self.grid.n_cells() {
            for g in 0..self.grid.points_per_cell() {
                let k = PointData::new(&self.grid, &self.shapes, &state.dofs, c, g);
                let m = k.membrane(m_l);
                for (l, (&z, &w)) in self.grid.layers().iter().zip(self.grid.layer_weights()).enumerate() {
                    let p = state.p[self.grid.point_index(c, g, l)].in_plane();
                    let s = mat * (m - z * k.hess_v - p).mandel();
                    total += self.grid.inplane_weight(g) * w * s.norm_squared();
                }
            }
        }
        total.sqrt()
    }

    /// Squared `L²` norm of the strain variation of every DOF's basis function.
    pub fn variation_norms(&self, state: &PlateState) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_dofs()];
        for c in 0..self.grid.n_cells() {
            let idx = cell_dofs(&self.grid, c);
            for g in 0..self.grid.points_per_cell() {
                let k = PointData::new(&self.grid, &self.shapes, &state.dofs, c, g);
                let (bm, bk) = self.variations(g, k.grad_v);
                let w = self.grid.inplane_weight(g);
                for (a, &i) in idx.iter().enumerate() {
                    let (dm, dk) = (bm.column(a), bk.column(a));
                    out[i] += w * (dm.norm_squared() - 2.0 * self.s1 * dm.dot(&dk) + self.s2 * dk.norm_squared());
                }
            }
        }
        out
    }

    /// Cell Hessians, passed to `sink(cell, dofs, matrix)`.
    pub fn hessian<F: FnMut(usize, &[usize; CELL_DOFS], &CellMatrix)>(&self, state: &PlateState, mut sink: F) {
        let mat = self.stiffness.matrix();
        let l = self.alpha.l();
        for c in 0..self.grid.n_cells() {
            let idx = cell_dofs(&self.grid, c);
            let mut ke = CellMatrix::zeros();
            for g in 0..self.grid.points_per_cell() {
                let k = PointData::new(&self.grid, &self.shapes, &state.dofs, c, g);
                let (bm, bk) = self.variations(g, k.grad_v);
                let w = self.grid.inplane_weight(g);
                let mbm = mat * bm;
                let mbk = mat * bk;
                let cross = bm.transpose() * mbk;
                ke += w * (bm.transpose() * mbm + self.s2 * (bk.transpose() * mbk));
                if self.s1 != 0.0 {
                    ke -= (w * self.s1) * (cross + cross.transpose());
                }
                if l != 0.0 {
                    let (n, _, _) = self.resultants(state, c, g, &k);
                    let her = &self.shapes.hermite[g];
                    let r = std::f64::consts::SQRT_2;
                    for (a, ha) in her.iter().enumerate() {
                        let ia = NODE_DOFS * (a / 4) + 2 + a % 4;
                        for (b, hb) in her.iter().enumerate() {
                            let ib = NODE_DOFS * (b / 4) + 2 + b % 4;
                            let geo = n[0] * ha.dx * hb.dx
                                + n[1] * ha.dy * hb.dy
                                + n[2] * r * 0.5 * (ha.dx * hb.dy + ha.dy * hb.dx);
                            ke[(ia, ib)] += w * l * geo;
                        }
                    }
                }
            }
            sink(c, &idx, &ke);
        }
    }
}

/// Gradient of `∫Q₂(e_α)` with respect to all DOFs.
pub fn elastic_gradient(grid: &Grid, state: &PlateState, el: &ReducedStiffness, alpha: Alpha) -> Vec<f64> {
    ElasticAssembler::new(grid, el, alpha).gradient(state)
}
