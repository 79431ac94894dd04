//! A-posteriori checks on computed evolutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::plate::{field_distance, Alpha, FieldDistance, Grid, PlateState, Reparam, NODE_DOFS};
use crate::tensor::DeviatoricTensor;

use super::{run_evolution, EvolutionTrace, Keep, PlateProblem, RunOptions, SolverTolerances, TimePartition};

/// Perturbation amplitudes used by [`check_stability`].
pub const STABILITY_AMPLITUDES: [f64; 3] = [1e-3, 1e-2, 1e-1];

/// Smallest value of `J(s + ŝ) + ∫H_D(p̂) − J(s)` over sampled admissible
/// perturbations `ŝ = (û, v̂, p̂)`.
///
/// Random directions cycle through four families: random in every field,
/// random in `(u, v)` only, random in `p` only, and the radial direction `±s`
/// itself (restricted to the free DOFs). They are scaled by the size of the
/// state, so the amplitudes are relative. Two deterministic competitors are
/// always tried as well: the elastic relaxation at frozen `p`, and the
/// pointwise plastic update taking the state as the previous state.
pub fn check_stability(problem: &PlateProblem, state: &PlateState, t: f64, n_dirs: usize, seed: u64) -> f64 {
    let _ = t; // boundary data are already part of `state`
    let map = problem.dof_map();
    let j0 = problem.energy(state);
    let scale = map
        .free()
        .iter()
        .map(|&i| state.dofs[i].abs())
        .chain(state.p.iter().map(|p| p.coords().amax()))
        .fold(1e-6, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut probe = |du: &[f64], dp: &[DeviatoricTensor], scale: f64| {
        for &a in &STABILITY_AMPLITUDES {
            let mut pert = state.clone();
            map.scatter_add(du, a * scale, &mut pert.dofs);
            for (p, q) in pert.p.iter_mut().zip(dp) {
                *p = *p + (a * scale) * *q;
            }
            let margin = problem.energy(&pert) + problem.dissipation(&pert, state) - j0;
            worst = worst.min(margin);
        }
    };

    // two solver-informed competitors: elastic relaxation at frozen p and the
    // pointwise plastic update with the state itself as previous state
    if let Ok(relaxed) = problem.minimize_elastic(state) {
        let du: Vec<f64> = map.free().iter().map(|&i| relaxed.state.dofs[i] - state.dofs[i]).collect();
        probe(&du, &vec![DeviatoricTensor::ZERO; state.p.len()], 1.0);
    }
    if let Ok(updated) = problem.plastic_update(state, state) {
        let dp: Vec<DeviatoricTensor> = updated.p.iter().zip(&state.p).map(|(a, b)| *a - *b).collect();
        probe(&vec![0.0; map.n_free()], &dp, 1.0);
    }

    for d in 0..n_dirs {
        let kind = d % 4;
        let mut du = vec![0.0; map.n_free()];
        let mut dp = vec![DeviatoricTensor::ZERO; state.p.len()];
        match kind {
            3 => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                du = map.gather(&state.dofs).iter().map(|x| sign * x / scale).collect();
                dp = state.p.iter().map(|p| (sign / scale) * *p).collect();
            }
            _ => {
                if kind != 2 {
                    du.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
                }
                if kind != 1 {
                    for q in dp.iter_mut() {
                        let c = nalgebra::Vector5::from_fn(|_, _| rng.random_range(-1.0..1.0));
                        *q = DeviatoricTensor::from_coords(&c);
                    }
                }
            }
        }
        probe(&du, &dp, scale);
    }
    worst
}

/// Normalized residuals of the weak equilibrium equations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElResidual {
    /// In-plane equation, tested with `u`-DOF basis functions.
    pub u: f64,
    /// Bending equation, tested with `v`-DOF basis functions.
    pub v: f64,
}

impl ElResidual {
    /// Both equations for the linear model, the in-plane one for Von Kármán.
    pub fn value(&self, alpha: Alpha) -> f64 {
        match alpha {
            Alpha::Linear => self.u.max(self.v),
            Alpha::VonKarman => self.u,
        }
    }
}

/// `max |∫ℂ₂e : δe(ζ)| / (‖ℂ₂e‖ ‖δe(ζ)‖)` over free nodal basis functions `ζ`.
/// The quotient lies in `[0, 1]` by Cauchy–Schwarz.
pub fn check_euler_lagrange(problem: &PlateProblem, state: &PlateState) -> ElResidual {
    let asm = problem.assembler();
    let stress = asm.stress_norm(state);
    if stress == 0.0 {
        return ElResidual::default();
    }
    let g = asm.gradient(state);
    let norms = asm.variation_norms(state);
    let mut out = ElResidual::default();
    for &i in problem.dof_map().free() {
        if norms[i] <= 0.0 {
            continue;
        }
        let r = g[i].abs() / (stress * norms[i].sqrt());
        if i % NODE_DOFS < 2 {
            out.u = out.u.max(r);
        } else {
            out.v = out.v.max(r);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub residuals: Vec<f64>,
    pub max: f64,
    pub min: f64,
    /// `δ·T + C·τ`.
    pub bound: f64,
    /// Knots where the residual exceeds the bound.
    pub flagged: Vec<usize>,
}

/// Energy-balance residuals of a trace against the bound `δ·T + C·τ`.
pub fn check_energy_balance(trace: &EvolutionTrace, tol: &SolverTolerances, c: f64, tau: f64) -> BalanceReport {
    let residuals: Vec<f64> = trace.rows.iter().map(|r| r.balance_residual).collect();
    let horizon = trace.rows.last().map_or(0.0, |r| r.t);
    let bound = tol.delta * horizon + c * tau;
    let flagged = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > bound)
        .map(|(i, _)| i)
        .collect();
    BalanceReport {
        max: residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: residuals.iter().copied().fold(f64::INFINITY, f64::min),
        residuals,
        bound,
        flagged,
    }
}

/// Richardson estimate of `C` in `r ≈ C·τ` from two partitions.
pub fn rate_constant(r_coarse: f64, tau_coarse: f64, r_fine: f64, tau_fine: f64) -> f64 {
    if tau_coarse == tau_fine {
        return r_coarse.abs() / tau_coarse;
    }
    ((r_coarse - r_fine) / (tau_coarse - tau_fine)).abs()
}

/// Maximal difference quotients `‖sᵢ − sᵢ₋₁‖ / (tᵢ − tᵢ₋₁)` per field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LipschitzReport {
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

impl LipschitzReport {
    pub fn push(&mut self, grid: &Grid, a: &PlateState, b: &PlateState, dt: f64) {
        let d = field_distance(grid, a, b);
        self.u = self.u.max(d.u / dt);
        self.v = self.v.max(d.v / dt);
        self.p = self.p.max(d.p / dt);
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.u, self.v, self.p]
    }
}

pub fn lipschitz_report(grid: &Grid, knots: &[f64], states: &[PlateState]) -> LipschitzReport {
    let mut rep = LipschitzReport::default();
    for i in 1..states.len().min(knots.len()) {
        rep.push(grid, &states[i - 1], &states[i], knots[i] - knots[i - 1]);
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateIndependence {
    /// Largest field distance between corresponding knots.
    pub discrepancy: FieldDistance,
    /// Every state equal bit for bit.
    pub identical: bool,
}

/// Runs the problem on the image partition `φ(τᵢ)` and the reparametrized
/// problem `s∘φ` on `τᵢ`, and compares the states knot by knot.
pub fn rate_independence_test(
    problem: &PlateProblem,
    partition: &TimePartition,
    reparam: Reparam,
) -> Result<RateIndependence> {
    let opts = RunOptions {
        keep: Keep::All,
        ..RunOptions::default()
    };
    let original = run_evolution(problem, &partition.mapped(reparam)?, &opts).into_result()?;
    let slow = problem.with_trajectory(
        problem
            .traj
            .with_profile(problem.traj.profile.reparametrized(reparam)),
    );
    let other = run_evolution(&slow, partition, &opts).into_result()?;
    let mut worst = FieldDistance::default();
    let mut identical = true;
    for ((_, a), (_, b)) in original.states.iter().zip(&other.states) {
        identical &= a == b;
        let d = field_distance(&problem.grid, a, b);
        worst.u = worst.u.max(d.u);
        worst.v = worst.v.max(d.v);
        worst.p = worst.p.max(d.p);
    }
    Ok(RateIndependence {
        discrepancy: worst,
        identical,
    })
}
