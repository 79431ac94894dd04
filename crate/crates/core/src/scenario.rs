//! Reference problems shared by the tests, the command line tool and the demo.

use crate::evolution::{PlateProblem, SolverTolerances};
use crate::forms::{DissipationDensity, HardeningForm, IsotropicElasticity};
use crate::local::LocalProblem;
use crate::plate::{Alpha, BoundaryTrajectory, Edge, EdgeSet, Grid, TimeProfile};

pub const LAM: f64 = 1.0;
pub const MU: f64 = 1.0;
pub const HARDENING: f64 = 0.5;
pub const SIGMA_Y: f64 = 0.05;
/// Curvature amplitude `a` of `v⁰ = s(t)·a·x1²`, about 3.5 times first yield.
pub const BEND_AMPLITUDE: f64 = 0.1;

pub fn material(sigma_y: f64) -> LocalProblem {
    LocalProblem::new(
        IsotropicElasticity::new(LAM, MU).expect("positive moduli"),
        HardeningForm::isotropic(HARDENING).expect("positive hardening"),
        DissipationDensity::von_mises(sigma_y).expect("positive yield stress"),
    )
    .expect("definite local problem")
}

/// Unit square clamped on the left and right edges, bent by
/// `v⁰ = s(t)·a·x1²` with `s(t) = t` on `[0, 1]`.
pub fn bending(alpha: Alpha, n: usize, sigma_y: f64) -> PlateProblem {
    let grid = Grid::new(1.0, 1.0, n, n, 4, EdgeSet::new(&[Edge::Left, Edge::Right]).unwrap())
        .expect("valid grid");
    PlateProblem::new(
        grid,
        alpha,
        material(sigma_y),
        BoundaryTrajectory::bend(BEND_AMPLITUDE, TimeProfile::linear(1.0)),
        SolverTolerances::default(),
    )
    .expect("valid problem")
}
