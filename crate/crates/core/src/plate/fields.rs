//! Plate state, strain assembly, energies, dissipation and boundary data.

use crate::error::{Error, Result};
use crate::forms::{DissipationDensity, HardeningForm, ReducedStiffness};
use crate::tensor::{DeviatoricTensor, Mat2, Sym2};

use super::assembly::{elastic_gradient, PointData};
use super::element::ShapeTable;
use super::grid::{Grid, NODE_DOFS};
use super::loading::{BoundaryTrajectory, Side};

/// Reduced model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alpha {
    /// Linearized plate, no membrane nonlinearity.
    Linear,
    /// Von Kármán plate with the `½∇v⊗∇v` membrane term.
    VonKarman,
}

impl Alpha {
    /// Coefficient of `∇v⊗∇v` in the membrane strain (times two).
    pub fn l(self) -> f64 {
        match self {
            Alpha::Linear => 0.0,
            Alpha::VonKarman => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Alpha::Linear => "linear",
            Alpha::VonKarman => "vonkarman",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Alpha::Linear),
            "vonkarman" | "von-karman" => Some(Alpha::VonKarman),
            _ => None,
        }
    }
}

/// Nodal displacement/deflection DOFs plus plastic strain per quadrature point.
///
/// Node `n` owns DOFs `6n..6n+6` in the order `u1, u2, v, ∂1v, ∂2v, ∂12v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateState {
    pub dofs: Vec<f64>,
    pub p: Vec<DeviatoricTensor>,
}

impl PlateState {
    pub fn zeros(grid: &Grid) -> Self {
        PlateState {
            dofs: vec![0.0; grid.n_dofs()],
            p: vec![DeviatoricTensor::ZERO; grid.n_points()],
        }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.dofs.len() != grid.n_dofs() || self.p.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "state has {} dofs / {} points, grid expects {} / {}",
                self.dofs.len(),
                self.p.len(),
                grid.n_dofs(),
                grid.n_points()
            )));
        }
        Ok(())
    }

    pub fn u(&self, node: usize) -> [f64; 2] {
        [self.dofs[NODE_DOFS * node], self.dofs[NODE_DOFS * node + 1]]
    }

    /// `(v, ∂1v, ∂2v, ∂12v)` at a node.
    pub fn v(&self, node: usize) -> [f64; 4] {
        let b = NODE_DOFS * node + 2;
        [self.dofs[b], self.dofs[b + 1], self.dofs[b + 2], self.dofs[b + 3]]
    }
}

/// Strain of the state at every quadrature point, `p'` not subtracted.
pub fn assemble_strain(grid: &Grid, state: &PlateState, alpha: Alpha) -> Vec<Sym2> {
    let shapes = ShapeTable::new(grid);
    let mut out = Vec::with_capacity(grid.n_points());
    for c in 0..grid.n_cells() {
        for g in 0..grid.points_per_cell() {
            let k = PointData::new(grid, &shapes, &state.dofs, c, g);
            let m = k.membrane(alpha.l());
            let kappa = k.hess_v;
            for &z in grid.layers() {
                out.push(m - z * kappa);
            }
        }
    }
    out
}

/// `(∫Q₂(e − p'), ∫B(p))` over the plate.
pub fn total_energy(
    grid: &Grid,
    state: &PlateState,
    el: &ReducedStiffness,
    h: &HardeningForm,
    alpha: Alpha,
) -> (f64, f64) {
    let strain = assemble_strain(grid, state, alpha);
    let mut elastic = 0.0;
    let mut hardening = 0.0;
    for (idx, (e, p)) in strain.iter().zip(&state.p).enumerate() {
        let w = grid.point_weight(idx);
        elastic += w * el.energy(&(*e - p.in_plane()));
        hardening += w * h.eval(p);
    }
    (elastic, hardening)
}

/// `∫H_D(p_new − p_old)`.
pub fn dissipation_increment(
    grid: &Grid,
    p_new: &[DeviatoricTensor],
    p_old: &[DeviatoricTensor],
    d: &DissipationDensity,
) -> Result<f64> {
    if p_new.len() != grid.n_points() || p_old.len() != grid.n_points() {
        return Err(Error::GridMismatch(format!(
            "plastic fields of length {} and {} on a grid with {} points",
            p_new.len(),
            p_old.len(),
            grid.n_points()
        )));
    }
    Ok(p_new
        .iter()
        .zip(p_old)
        .enumerate()
        .map(|(idx, (a, b))| grid.point_weight(idx) * d.eval(&(*a - *b)))
        .sum())
}

/// Writes the sampled Dirichlet data at time `t` into the constrained DOFs.
pub fn apply_boundary(
    grid: &Grid,
    state: &PlateState,
    traj: &BoundaryTrajectory,
    t: f64,
) -> PlateState {
    let mut out = state.clone();
    let s = traj.profile.s(t);
    for n in grid.dirichlet_nodes() {
        let (x, y) = grid.node_pos(n);
        let shape = traj.shape_dofs(x, y);
        for (k, val) in shape.iter().enumerate() {
            out.dofs[NODE_DOFS * n + k] = s * val;
        }
    }
    out
}

/// Interpolant of the spatial load shape at every node.
pub fn load_lifting(grid: &Grid, traj: &BoundaryTrajectory) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_dofs()];
    for n in 0..grid.n_nodes() {
        let (x, y) = grid.node_pos(n);
        out[NODE_DOFS * n..NODE_DOFS * (n + 1)].copy_from_slice(&traj.shape_dofs(x, y));
    }
    out
}

/// Power of the boundary loading, `∫ℂ₂e : ∂ₜe` with the interior held fixed
/// and the data moving along its (interpolated) shape.
pub fn work_rate(
    grid: &Grid,
    state: &PlateState,
    traj: &BoundaryTrajectory,
    el: &ReducedStiffness,
    alpha: Alpha,
    t: f64,
    side: Side,
) -> f64 {
    let ds = traj.profile.ds(t, side);
    if ds == 0.0 || traj.is_zero() {
        return 0.0;
    }
    let grad = elastic_gradient(grid, state, el, alpha);
    let lift = load_lifting(grid, traj);
    ds * grad.iter().zip(&lift).map(|(a, b)| a * b).sum::<f64>()
}

/// Discrete norms of the difference of two states: `H¹` for `u`, `H²` for
/// `v`, `L²` for `p`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldDistance {
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

impl FieldDistance {
    pub fn max(&self) -> f64 {
        self.u.max(self.v).max(self.p)
    }
}

pub fn field_distance(grid: &Grid, a: &PlateState, b: &PlateState) -> FieldDistance {
    let diff: Vec<f64> = a.dofs.iter().zip(&b.dofs).map(|(x, y)| x - y).collect();
    let shapes = ShapeTable::new(grid);
    let (mut u2, mut v2) = (0.0, 0.0);
    for c in 0..grid.n_cells() {
        for g in 0..grid.points_per_cell() {
            let w = grid.inplane_weight(g);
            let k = PointData::new(grid, &shapes, &diff, c, g);
            u2 += w * (k.u[0].powi(2) + k.u[1].powi(2) + frob2(&k.grad_u));
            v2 += w
                * (k.v.powi(2)
                    + k.grad_v[0].powi(2)
                    + k.grad_v[1].powi(2)
                    + k.hess_v.norm().powi(2));
        }
    }
    let p2: f64 = a
        .p
        .iter()
        .zip(&b.p)
        .enumerate()
        .map(|(idx, (x, y))| grid.point_weight(idx) * (*x - *y).norm().powi(2))
        .sum();
    FieldDistance {
        u: u2.sqrt(),
        v: v2.sqrt(),
        p: p2.sqrt(),
    }
}

fn frob2(m: &Mat2) -> f64 {
    m.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::IsotropicElasticity;
    use crate::plate::grid::{Edge, EdgeSet};
    use crate::plate::loading::{Polynomial, TimeProfile};

    fn unit_grid(n: usize, gamma: &[Edge]) -> Grid {
        Grid::new(1.0, 1.0, n, n, 4, EdgeSet::new(gamma).unwrap()).unwrap()
    }

    fn stiffness() -> ReducedStiffness {
        ReducedStiffness::new(&IsotropicElasticity::new(1.0, 1.0).unwrap()).unwrap()
    }

    /// State interpolating polynomial shapes at every node.
    fn interpolated(grid: &Grid, u1: Polynomial, u2: Polynomial, v: Polynomial) -> PlateState {
        let traj = BoundaryTrajectory::mixed(u1, u2, v, TimeProfile::linear(1.0));
        PlateState {
            dofs: load_lifting(grid, &traj),
            p: vec![DeviatoricTensor::ZERO; grid.n_points()],
        }
    }

    #[test]
    fn zero_state_gives_zero_strain_and_energy() {
        let g = unit_grid(4, &[Edge::Left]);
        let s = PlateState::zeros(&g);
        assert!(assemble_strain(&g, &s, Alpha::VonKarman)
            .iter()
            .all(|e| *e == Sym2::ZERO));
        let h = HardeningForm::isotropic(1.0).unwrap();
        assert_eq!(total_energy(&g, &s, &stiffness(), &h, Alpha::Linear), (0.0, 0.0));
    }

    #[test]
    fn uniform_stretch_strain_and_energy() {
        let a = 0.03;
        let g = unit_grid(4, &[Edge::Left, Edge::Right]);
        let s = interpolated(&g, Polynomial::monomial(a, 1, 0), Polynomial::zero(), Polynomial::zero());
        for alpha in [Alpha::Linear, Alpha::VonKarman] {
            for e in assemble_strain(&g, &s, alpha) {
                assert!((e - Sym2::new(a, 0.0, 0.0)).norm() < 1e-15);
            }
        }
        let h = HardeningForm::isotropic(1.0).unwrap();
        let (el, hard) = total_energy(&g, &s, &stiffness(), &h, Alpha::Linear);
        assert!((el - 4.0 / 3.0 * a * a).abs() < 1e-15);
        assert_eq!(hard, 0.0);
    }

    #[test]
    fn pure_bending_strain_and_energy() {
        let g = unit_grid(4, &[Edge::Left]);
        let s = interpolated(&g, Polynomial::zero(), Polynomial::zero(), Polynomial::monomial(1.0, 2, 0));
        let lin = assemble_strain(&g, &s, Alpha::Linear);
        let vk = assemble_strain(&g, &s, Alpha::VonKarman);
        for c in 0..g.n_cells() {
            for q in 0..g.points_per_cell() {
                let (x, _) = g.inplane_position(c, q);
                for (l, &z) in g.layers().iter().enumerate() {
                    let idx = g.point_index(c, q, l);
                    assert!((lin[idx] - Sym2::new(-2.0 * z, 0.0, 0.0)).norm() < 1e-12);
                    let extra = vk[idx] - lin[idx];
                    assert!((extra - Sym2::new(2.0 * x * x, 0.0, 0.0)).norm() < 1e-12);
                }
            }
        }
        let h = HardeningForm::isotropic(1.0).unwrap();
        let (el, _) = total_energy(&g, &s, &stiffness(), &h, Alpha::Linear);
        assert!((el - 16.0 / 3.0 / 12.0).abs() < 1e-13, "{el}");
    }

    #[test]
    fn strain_converges_for_non_polynomial_fields() {
        // v = x^5 y^4 is outside the bicubic space; the interpolation error in
        // second derivatives decays like h².
        let v = Polynomial::monomial(1.0, 5, 4);
        let mut errs = Vec::new();
        for n in [4, 8, 16] {
            let g = unit_grid(n, &[Edge::Left]);
            let s = interpolated(&g, Polynomial::zero(), Polynomial::zero(), v.clone());
            let strain = assemble_strain(&g, &s, Alpha::Linear);
            let mut err: f64 = 0.0;
            for c in 0..g.n_cells() {
                for q in 0..g.points_per_cell() {
                    let (x, y) = g.inplane_position(c, q);
                    let l = 0;
                    let z = g.layers()[l];
                    let exact = Sym2::new(
                        -z * v.deriv(2, 0, x, y),
                        -z * v.deriv(0, 2, x, y),
                        -z * v.deriv(1, 1, x, y),
                    );
                    err = err.max((strain[g.point_index(c, q, l)] - exact).norm());
                }
            }
            errs.push(err);
        }
        assert!(errs[1] < 0.3 * errs[0] && errs[2] < 0.3 * errs[1], "{errs:?}");
    }

    #[test]
    fn strain_is_affine_in_thickness() {
        let g = unit_grid(4, &[Edge::Left]);
        let mut s = PlateState::zeros(&g);
        for (i, d) in s.dofs.iter_mut().enumerate() {
            *d = ((i * 37 % 11) as f64 - 5.0) * 0.01;
        }
        let strain = assemble_strain(&g, &s, Alpha::VonKarman);
        let zs = g.layers();
        for c in 0..g.n_cells() {
            for q in 0..g.points_per_cell() {
                let e0 = strain[g.point_index(c, q, 0)];
                let e1 = strain[g.point_index(c, q, 1)];
                let slope = (1.0 / (zs[1] - zs[0])) * (e1 - e0);
                for (l, &z) in zs.iter().enumerate() {
                    let fit = e0 + (z - zs[0]) * slope;
                    assert!((strain[g.point_index(c, q, l)] - fit).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn linear_energy_is_quadratic() {
        let g = unit_grid(4, &[Edge::Left]);
        let mut s = PlateState::zeros(&g);
        for (i, d) in s.dofs.iter_mut().enumerate() {
            *d = ((i * 13 % 7) as f64 - 3.0) * 0.02;
        }
        for (i, p) in s.p.iter_mut().enumerate() {
            *p = DeviatoricTensor::new(0.001 * (i % 5) as f64, -0.002, 0.0005, 0.0, 0.001);
        }
        let h = HardeningForm::isotropic(0.7).unwrap();
        let (e1, h1) = total_energy(&g, &s, &stiffness(), &h, Alpha::Linear);
        let scaled = PlateState {
            dofs: s.dofs.iter().map(|x| 3.0 * x).collect(),
            p: s.p.iter().map(|p| 3.0 * *p).collect(),
        };
        let (e3, h3) = total_energy(&g, &scaled, &stiffness(), &h, Alpha::Linear);
        assert!((e3 - 9.0 * e1).abs() < 1e-12 * e3.abs().max(1.0));
        assert!((h3 - 9.0 * h1).abs() < 1e-12 * h3.abs().max(1.0));
    }

    #[test]
    fn dissipation_increment_examples() {
        let g = unit_grid(4, &[Edge::Left]);
        let d = DissipationDensity::von_mises(2.0).unwrap();
        let a: Vec<DeviatoricTensor> = (0..g.n_points())
            .map(|i| DeviatoricTensor::new(0.01 * (i % 3) as f64, 0.0, -0.01, 0.0, 0.0))
            .collect();
        assert_eq!(dissipation_increment(&g, &a, &a, &d).unwrap(), 0.0);

        let q0 = DeviatoricTensor::new(0.1, -0.05, 0.02, 0.03, -0.01);
        let b: Vec<_> = a.iter().map(|p| *p + 0.5 * q0).collect();
        let got = dissipation_increment(&g, &b, &a, &d).unwrap();
        assert!((got - 0.5 * 2.0 * q0.norm() * g.area()).abs() < 1e-14);

        let c: Vec<_> = a.iter().enumerate().map(|(i, p)| *p - (i % 4) as f64 * q0).collect();
        let ab = dissipation_increment(&g, &b, &a, &d).unwrap();
        let bc = dissipation_increment(&g, &c, &b, &d).unwrap();
        let ac = dissipation_increment(&g, &c, &a, &d).unwrap();
        assert!(ac <= ab + bc + 1e-14);

        assert!(matches!(
            dissipation_increment(&g, &a[1..], &a, &d),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn boundary_values_follow_the_trajectory() {
        let g = unit_grid(4, &[Edge::Left, Edge::Right]);
        let traj = BoundaryTrajectory::stretch(0.2, TimeProfile::linear(1.0));
        let s = apply_boundary(&g, &PlateState::zeros(&g), &traj, 1.0);
        for n in 0..g.n_nodes() {
            let (x, _) = g.node_pos(n);
            let on = g.is_boundary_node(n, Edge::Left) || g.is_boundary_node(n, Edge::Right);
            let expect = if on { 0.2 * x } else { 0.0 };
            assert_eq!(s.u(n)[0], expect);
            assert_eq!(s.u(n)[1], 0.0);
        }

        let g = unit_grid(4, &[Edge::Left]);
        let bend = BoundaryTrajectory::bend(1.0, TimeProfile::linear(1.0));
        let mut start = PlateState::zeros(&g);
        start.dofs.iter_mut().for_each(|d| *d = 7.0);
        let s = apply_boundary(&g, &start, &bend, 0.5);
        for n in 0..g.n_nodes() {
            if g.is_boundary_node(n, Edge::Left) {
                assert_eq!(s.v(n), [0.0; 4]);
            } else {
                assert!(s.dofs[NODE_DOFS * n..NODE_DOFS * (n + 1)].iter().all(|&d| d == 7.0));
            }
        }

        let zero = BoundaryTrajectory::zero(1.0);
        let s = apply_boundary(&g, &start, &zero, 0.3);
        for n in g.dirichlet_nodes() {
            assert!(s.dofs[NODE_DOFS * n..NODE_DOFS * (n + 1)].iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn work_rate_examples() {
        let g = unit_grid(4, &[Edge::Left, Edge::Right]);
        let el = stiffness();
        let a = 0.05;
        let traj = BoundaryTrajectory::stretch(a, TimeProfile::linear(2.0));
        assert_eq!(
            work_rate(&g, &PlateState::zeros(&g), &traj, &el, Alpha::Linear, 1.0, Side::After),
            0.0
        );

        // uniform stretch at s = 1/2 and a uniform plastic strain
        let mut s = interpolated(&g, Polynomial::monomial(0.5 * a, 1, 0), Polynomial::zero(), Polynomial::zero());
        let p = DeviatoricTensor::new(0.004, -0.001, 0.002, 0.0, 0.0);
        s.p.iter_mut().for_each(|q| *q = p);
        let w = work_rate(&g, &s, &traj, &el, Alpha::Linear, 1.0, Side::After);
        let stress = el.stress(&(Sym2::new(0.5 * a, 0.0, 0.0) - p.in_plane()));
        let expect = g.area() * stress.ddot(&Sym2::new(a / 2.0, 0.0, 0.0));
        assert!((w - expect).abs() < 1e-15, "{w} vs {expect}");

        let frozen = traj.with_profile(
            TimeProfile::new(crate::plate::loading::ProfileKind::RampHold { t_ramp: 0.5 }, 2.0).unwrap(),
        );
        assert_eq!(work_rate(&g, &s, &frozen, &el, Alpha::Linear, 1.0, Side::After), 0.0);
    }

    #[test]
    fn field_distance_of_identical_states_vanishes() {
        let g = unit_grid(4, &[Edge::Left]);
        let a = interpolated(&g, Polynomial::monomial(1.0, 1, 1), Polynomial::zero(), Polynomial::monomial(1.0, 2, 0));
        assert_eq!(field_distance(&g, &a, &a), FieldDistance::default());
        let b = PlateState::zeros(&g);
        let d = field_distance(&g, &a, &b);
        // ‖xy‖² + ‖∇(xy)‖² on the unit square = 1/9 + 2/3
        assert!((d.u - (1.0f64 / 9.0 + 2.0 / 3.0).sqrt()).abs() < 1e-13);
        // x⁴, (2x)², 2²: 1/5 + 4/3 + 4
        assert!((d.v - (0.2f64 + 4.0 / 3.0 + 4.0).sqrt()).abs() < 1e-13);
        assert_eq!(d.p, 0.0);
    }
}
