//! Time-incremental quasistatic solver and its diagnostics.
//!
//! At each knot `tᵢ` the state minimizes
//! `∫Q₂(e_α) + ∫B(p) + ∫H_D(p − p(tᵢ₋₁))` over admissible `(u, v, p)`,
//! by alternating an elastic solve at frozen `p` with the pointwise plastic
//! update at frozen `(u, v)`.

mod diagnostics;
mod solver;

pub use diagnostics::{
    check_energy_balance, check_euler_lagrange, check_stability, lipschitz_report,
    rate_constant, rate_independence_test, BalanceReport, ElResidual, LipschitzReport,
    RateIndependence,
};
pub use solver::{ElasticSolve, StepResult};

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{DofMap, SpdFactor};
use crate::local::LocalProblem;
use crate::plate::assembly::ElasticAssembler;
use crate::plate::{
    apply_boundary, dissipation_increment, total_energy, work_rate, Alpha, BoundaryTrajectory,
    Grid, PlateState, Reparam, Side,
};

/// Knots `0 = t₀ < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    knots: Vec<f64>,
}

impl TimePartition {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter("a partition needs at least two knots".into()));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidParameter("the first knot must be 0".into()));
        }
        if knots.iter().any(|t| !t.is_finite()) || knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("knots must be strictly increasing".into()));
        }
        Ok(TimePartition { knots })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidParameter("uniform partition needs T > 0 and N ≥ 1".into()));
        }
        let mut knots: Vec<f64> = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
        knots[steps] = horizon;
        TimePartition::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn horizon(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.knots.len() - 1
    }

    /// Largest step.
    pub fn tau(&self) -> f64 {
        self.knots.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Image of the knots under `φ`.
    pub fn mapped(&self, r: Reparam) -> Result<Self> {
        let h = self.horizon();
        let mut knots: Vec<f64> = self.knots.iter().map(|&t| r.apply(t, h)).collect();
        let last = knots.len() - 1;
        knots[last] = h;
        TimePartition::new(knots)
    }

    /// Midpoints inserted into every step.
    pub fn refined(&self) -> Self {
        let mut knots = Vec::with_capacity(2 * self.knots.len() - 1);
        for w in self.knots.windows(2) {
            knots.push(w[0]);
            knots.push(0.5 * (w[0] + w[1]));
        }
        knots.push(self.horizon());
        TimePartition { knots }
    }

    /// Every other knot, keeping the horizon; `None` for a single step.
    pub fn coarsened(&self) -> Option<Self> {
        if self.steps() < 2 {
            return None;
        }
        let mut knots: Vec<f64> = self.knots.iter().step_by(2).copied().collect();
        if knots.last() != Some(&self.horizon()) {
            knots.push(self.horizon());
        }
        Some(TimePartition { knots })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    /// Per-step minimization slack, energy per unit time.
    pub delta: f64,
    /// Relative objective decrease ending the alternation.
    pub alt_tol: f64,
    pub alt_max: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        SolverTolerances {
            delta: 0.0,
            alt_tol: 1e-10,
            alt_max: 200,
            newton_tol: 1e-10,
            newton_max: 50,
        }
    }
}

impl SolverTolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter("delta must be >= 0".into()));
        }
        if !(self.alt_tol > 0.0) || !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be > 0".into()));
        }
        if self.alt_max == 0 || self.newton_max == 0 {
            return Err(Error::InvalidParameter("iteration caps must be > 0".into()));
        }
        Ok(())
    }
}

/// Everything fixed during an evolution: geometry, model, data, tolerances.
#[derive(Debug)]
pub struct PlateProblem {
    pub grid: Grid,
    pub alpha: Alpha,
    pub local: LocalProblem,
    pub traj: BoundaryTrajectory,
    pub tol: SolverTolerances,
    asm: ElasticAssembler,
    map: DofMap,
    linear_factor: OnceLock<SpdFactor>,
}

impl Clone for PlateProblem {
    fn clone(&self) -> Self {
        PlateProblem::new(
            self.grid.clone(),
            self.alpha,
            self.local.clone(),
            self.traj.clone(),
            self.tol,
        )
        .expect("already validated")
    }
}

impl PlateProblem {
    pub fn new(
        grid: Grid,
        alpha: Alpha,
        local: LocalProblem,
        traj: BoundaryTrajectory,
        tol: SolverTolerances,
    ) -> Result<Self> {
        tol.validate()?;
        let asm = ElasticAssembler::new(&grid, local.stiffness(), alpha);
        let map = DofMap::new(&grid.constrained_mask());
        Ok(PlateProblem {
            grid,
            alpha,
            local,
            traj,
            tol,
            asm,
            map,
            linear_factor: OnceLock::new(),
        })
    }

    /// Same problem under different boundary data.
    pub fn with_trajectory(&self, traj: BoundaryTrajectory) -> Self {
        PlateProblem {
            traj,
            ..self.clone()
        }
    }

    pub fn with_alpha(&self, alpha: Alpha) -> Self {
        PlateProblem::new(self.grid.clone(), alpha, self.local.clone(), self.traj.clone(), self.tol)
            .expect("already validated")
    }

    pub fn with_tolerances(&self, tol: SolverTolerances) -> Result<Self> {
        PlateProblem::new(self.grid.clone(), self.alpha, self.local.clone(), self.traj.clone(), tol)
    }

    pub fn assembler(&self) -> &ElasticAssembler {
        &self.asm
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.map
    }

    /// `(elastic, hardening)` energies.
    pub fn energies(&self, state: &PlateState) -> (f64, f64) {
        total_energy(
            &self.grid,
            state,
            self.local.stiffness(),
            self.local.hardening(),
            self.alpha,
        )
    }

    pub fn energy(&self, state: &PlateState) -> f64 {
        let (e, h) = self.energies(state);
        e + h
    }

    pub fn dissipation(&self, p_new: &PlateState, p_old: &PlateState) -> f64 {
        dissipation_increment(&self.grid, &p_new.p, &p_old.p, self.local.dissipation())
            .expect("states built on the problem grid")
    }

    pub fn work_rate(&self, state: &PlateState, t: f64, side: Side) -> f64 {
        work_rate(
            &self.grid,
            state,
            &self.traj,
            self.local.stiffness(),
            self.alpha,
            t,
            side,
        )
    }

    pub fn apply_boundary(&self, state: &PlateState, t: f64) -> PlateState {
        apply_boundary(&self.grid, state, &self.traj, t)
    }
}

/// One row per knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub elastic: f64,
    pub hardening: f64,
    pub dissipation_cum: f64,
    pub work_cum: f64,
    pub balance_residual: f64,
    /// `NaN` when the stability check is disabled.
    pub stability_margin: f64,
    pub el_residual: f64,
    pub inner_iters: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionTrace {
    pub rows: Vec<TraceRow>,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_balance_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.balance_residual).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_balance_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.balance_residual).fold(f64::INFINITY, f64::min)
    }

    pub fn min_stability_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.stability_margin)
            .filter(|m| !m.is_nan())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_el_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.el_residual).fold(0.0, f64::max)
    }
}

/// Which states an evolution keeps in memory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Keep {
    #[default]
    All,
    Last,
    Steps(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Random directions per knot for the stability check, 0 disables it.
    pub stability_dirs: usize,
    pub seed: u64,
    pub keep: Keep,
    pub lipschitz: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            stability_dirs: 0,
            seed: 0,
            keep: Keep::All,
            lipschitz: false,
        }
    }
}

#[derive(Debug)]
pub struct EvolutionRun {
    pub trace: EvolutionTrace,
    /// `(step, state)` pairs selected by [`Keep`].
    pub states: Vec<(usize, PlateState)>,
    pub lipschitz: Option<LipschitzReport>,
    /// The error that stopped the run, if any; the trace holds the completed knots.
    pub failure: Option<Error>,
}

impl EvolutionRun {
    pub fn state(&self, step: usize) -> Option<&PlateState> {
        self.states.iter().find(|(s, _)| *s == step).map(|(_, st)| st)
    }

    pub fn last_state(&self) -> Option<&PlateState> {
        self.states.last().map(|(_, s)| s)
    }

    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Runs the incremental scheme over the partition, starting from one step
/// at `t = 0` from the zero state.
pub fn run_evolution(problem: &PlateProblem, partition: &TimePartition, opts: &RunOptions) -> EvolutionRun {
    let knots = partition.knots();
    let mut trace = EvolutionTrace::default();
    let mut states = Vec::new();
    let mut lip = opts.lipschitz.then(LipschitzReport::default);
    let keep = |step: usize| match &opts.keep {
        Keep::All => true,
        Keep::Last => step == knots.len() - 1,
        Keep::Steps(list) => list.contains(&step),
    };

    let zero = PlateState::zeros(&problem.grid);
    let mut prev = match problem.incremental_step(&zero, knots[0], 0.0) {
        Ok(r) => r,
        Err(e) => {
            return EvolutionRun {
                trace,
                states,
                lipschitz: lip,
                failure: Some(e.at_step(0, knots[0])),
            }
        }
    };
    let (e0, h0) = problem.energies(&prev.state);
    let mut diss = 0.0;
    let mut work = 0.0;
    let mut rate_prev = problem.work_rate(&prev.state, knots[0], Side::After);

    let diagnostics = |state: &PlateState, step: usize, t: f64| -> (f64, f64) {
        let margin = if opts.stability_dirs > 0 {
            check_stability(problem, state, t, opts.stability_dirs, opts.seed.wrapping_add(step as u64))
        } else {
            f64::NAN
        };
        (margin, check_euler_lagrange(problem, state).value(problem.alpha))
    };

    let (m0, el0) = diagnostics(&prev.state, 0, knots[0]);
    trace.rows.push(TraceRow {
        step: 0,
        t: knots[0],
        elastic: e0,
        hardening: h0,
        dissipation_cum: 0.0,
        work_cum: 0.0,
        balance_residual: 0.0,
        stability_margin: m0,
        el_residual: el0,
        inner_iters: prev.inner_iters,
    });
    if keep(0) {
        states.push((0, prev.state.clone()));
    }

    for i in 1..knots.len() {
        let (t0, t1) = (knots[i - 1], knots[i]);
        let next = match problem.incremental_step(&prev.state, t1, t1 - t0) {
            Ok(r) => r,
            Err(e) => {
                if !keep(i - 1) {
                    states.push((i - 1, prev.state));
                }
                return EvolutionRun {
                    trace,
                    states,
                    lipschitz: lip,
                    failure: Some(e.at_step(i, t1)),
                };
            }
        };
        diss += problem.dissipation(&next.state, &prev.state);
        let rate = problem.work_rate(&next.state, t1, Side::Before);
        work += 0.5 * (t1 - t0) * (rate_prev + rate);
        rate_prev = problem.work_rate(&next.state, t1, Side::After);
        let (e, h) = problem.energies(&next.state);
        let (margin, el) = diagnostics(&next.state, i, t1);
        if let Some(l) = lip.as_mut() {
            l.push(&problem.grid, &prev.state, &next.state, t1 - t0);
        }
        trace.rows.push(TraceRow {
            step: i,
            t: t1,
            elastic: e,
            hardening: h,
            dissipation_cum: diss,
            work_cum: work,
            balance_residual: (e + h + diss) - (e0 + h0 + work),
            stability_margin: margin,
            el_residual: el,
            inner_iters: next.inner_iters,
        });
        if keep(i) {
            states.push((i, next.state.clone()));
        }
        prev = next;
    }
    EvolutionRun {
        trace,
        states,
        lipschitz: lip,
        failure: None,
    }
}

#[cfg(test)]
mod tests;
