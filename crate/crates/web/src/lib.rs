//! Browser bindings: the pointwise plastic update along a cyclic strain
//! path, a small plate bending evolution and the SL(3) dissipation bound.

use wasm_bindgen::prelude::*;

use thinplate::evolution::{run_evolution, PlateProblem, RunOptions, SolverTolerances, TimePartition};
use thinplate::forms::{DissipationDensity, HardeningForm, IsotropicElasticity};
use thinplate::local::LocalProblem;
use thinplate::plate::{Alpha, BoundaryTrajectory, Edge, EdgeSet, Grid, TimeProfile};
use thinplate::sl3::{d_upper, d_upper_one_segment, mat_log, PathPlan, SL3Matrix};
use thinplate::tensor::{DeviatoricTensor, Mat3, Sym2};

/// Largest grid and partition accepted by the page.
pub const MAX_CELLS: usize = 12;
pub const MAX_STEPS: usize = 60;

fn material(lam: f64, mu: f64, k: f64, sigma_y: f64) -> Result<LocalProblem, String> {
    let el = IsotropicElasticity::new(lam, mu).map_err(|e| e.to_string())?;
    let h = HardeningForm::isotropic(k).map_err(|e| e.to_string())?;
    let d = DissipationDensity::von_mises(sigma_y).map_err(|e| e.to_string())?;
    LocalProblem::new(el, h, d).map_err(|e| e.to_string())
}

/// Strain `ε11` and stress `σ11` along `0 → a → −a → a` with `n` points per
/// leg, flattened as `[ε, σ, ε, σ, ...]`.
pub fn cyclic_curve(lam: f64, mu: f64, k: f64, sigma_y: f64, amplitude: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(amplitude.is_finite() && amplitude > 0.0) || !(1..=1000).contains(&n) {
        return Err("amplitude must be positive and 1 <= n <= 1000".into());
    }
    let lp = material(lam, mu, k, sigma_y)?;
    let legs = [(0.0, amplitude), (amplitude, -amplitude), (-amplitude, amplitude)];
    let mut p = DeviatoricTensor::ZERO;
    let mut out = vec![0.0, 0.0];
    for (a, b) in legs {
        for i in 1..=n {
            let eps = a + (b - a) * i as f64 / n as f64;
            let e = Sym2::new(eps, 0.0, 0.0);
            p = lp.prox_update(&e, &p).map_err(|e| e.to_string())?.p;
            let stress = lp.stiffness().stress(&(e - p.in_plane()));
            out.extend([eps, stress.xx]);
        }
    }
    Ok(out)
}

/// Outcome of a bending run: per-knot energies and the final fields.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct BendingRun {
    n: usize,
    t: Vec<f64>,
    elastic: Vec<f64>,
    dissipation: Vec<f64>,
    work: Vec<f64>,
    balance: Vec<f64>,
    plastic: Vec<f64>,
    deflection: Vec<f64>,
}

#[wasm_bindgen]
impl BendingRun {
    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }
    pub fn elastic(&self) -> Vec<f64> {
        self.elastic.clone()
    }
    pub fn dissipation(&self) -> Vec<f64> {
        self.dissipation.clone()
    }
    pub fn work(&self) -> Vec<f64> {
        self.work.clone()
    }
    pub fn balance(&self) -> Vec<f64> {
        self.balance.clone()
    }
    /// Largest `|p|` over the quadrature points of each cell, row by row.
    pub fn plastic(&self) -> Vec<f64> {
        self.plastic.clone()
    }
    /// Out-of-plane displacement `v` at the nodes, row by row.
    pub fn deflection(&self) -> Vec<f64> {
        self.deflection.clone()
    }
}

/// Unit square clamped left and right, bent by `v⁰ = t·a·x1²`.
pub fn bending(von_karman: bool, sigma_y: f64, amplitude: f64, n: usize, steps: usize) -> Result<BendingRun, String> {
    if !(2..=MAX_CELLS).contains(&n) || !(1..=MAX_STEPS).contains(&steps) {
        return Err(format!("need 2 <= n <= {MAX_CELLS} and 1 <= steps <= {MAX_STEPS}"));
    }
    let gamma = EdgeSet::new(&[Edge::Left, Edge::Right]).map_err(|e| e.to_string())?;
    let grid = Grid::new(1.0, 1.0, n, n, 4, gamma).map_err(|e| e.to_string())?;
    let alpha = if von_karman { Alpha::VonKarman } else { Alpha::Linear };
    let pb = PlateProblem::new(
        grid,
        alpha,
        material(1.0, 1.0, 0.5, sigma_y)?,
        BoundaryTrajectory::bend(amplitude, TimeProfile::linear(1.0)),
        SolverTolerances::default(),
    )
    .map_err(|e| e.to_string())?;
    let part = TimePartition::uniform(1.0, steps).map_err(|e| e.to_string())?;
    let run = run_evolution(&pb, &part, &RunOptions::default())
        .into_result()
        .map_err(|e| e.to_string())?;
    let last = run.last_state().ok_or("empty run")?;
    let per_cell = pb.grid.n_points() / pb.grid.n_cells();
    let plastic = last
        .p
        .chunks(per_cell)
        .map(|c| c.iter().map(|p| p.norm()).fold(0.0, f64::max))
        .collect();
    let rows = &run.trace.rows;
    Ok(BendingRun {
        n,
        t: rows.iter().map(|r| r.t).collect(),
        elastic: rows.iter().map(|r| r.elastic).collect(),
        dissipation: rows.iter().map(|r| r.dissipation_cum).collect(),
        work: rows.iter().map(|r| r.work_cum).collect(),
        balance: rows.iter().map(|r| r.balance_residual).collect(),
        plastic,
        deflection: (0..pb.grid.n_nodes()).map(|i| last.v(i)[0]).collect(),
    })
}

/// `[renormalized, |log F|, one-segment bound, path bound, endpoint error]`
/// for the row-major matrix `m` with Frobenius density `σ_y|·|`.
pub fn dissipation(m: &[f64], sigma_y: f64, segments: usize) -> Result<Vec<f64>, String> {
    if m.len() != 9 {
        return Err("expected 9 matrix entries".into());
    }
    let f = SL3Matrix::new(Mat3::from_row_slice(m)).map_err(|e| e.to_string())?;
    let d = DissipationDensity::von_mises(sigma_y).map_err(|e| e.to_string())?;
    let plan = PathPlan::with_segments(segments);
    let bound = d_upper(&d, &f, &plan).map_err(|e| e.to_string())?;
    let log_norm = mat_log(f.matrix()).map_or(f64::NAN, |l| l.norm());
    Ok(vec![
        if f.renormalized() { 1.0 } else { 0.0 },
        log_norm,
        d_upper_one_segment(&d, &f),
        bound.value,
        bound.endpoint_error,
    ])
}

#[wasm_bindgen(js_name = cyclicCurve)]
pub fn cyclic_curve_js(lam: f64, mu: f64, k: f64, sigma_y: f64, amplitude: f64, n: usize) -> Result<Vec<f64>, JsError> {
    cyclic_curve(lam, mu, k, sigma_y, amplitude, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bendPlate)]
pub fn bending_js(von_karman: bool, sigma_y: f64, amplitude: f64, n: usize, steps: usize) -> Result<BendingRun, JsError> {
    bending(von_karman, sigma_y, amplitude, n, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = dissipationBound)]
pub fn dissipation_js(m: Vec<f64>, sigma_y: f64, segments: usize) -> Result<Vec<f64>, JsError> {
    dissipation(&m, sigma_y, segments).map_err(|e| JsError::new(&e))
}
