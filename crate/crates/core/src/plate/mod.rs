//! Discretization of the plate `ω × (−½, ½)` on a uniform rectangular grid.

pub mod assembly;
pub mod element;
pub mod fields;
pub mod grid;
pub mod loading;

pub use fields::{
    apply_boundary, assemble_strain, dissipation_increment, field_distance, total_energy,
    work_rate, Alpha, FieldDistance, PlateState,
};
pub use grid::{Edge, EdgeSet, Grid, NODE_DOFS};
pub use loading::{
    BoundaryTrajectory, LoadFamily, Polynomial, ProfileKind, Reparam, Side, TimeProfile,
};
