//! Elastic solve at frozen plastic strain and the alternating incremental step.

use nalgebra_sparse::CscMatrix;

use crate::error::{Error, Result};
use crate::linalg::{shifted_solve, FreeAssembly, SpdFactor};
use crate::plate::{assemble_strain, PlateState};

use super::PlateProblem;

#[derive(Debug, Clone)]
pub struct ElasticSolve {
    pub state: PlateState,
    pub iters: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: PlateState,
    /// Alternation sweeps performed.
    pub inner_iters: usize,
    /// Incremental objective at the returned state.
    pub objective: f64,
}

impl PlateProblem {
    fn free_hessian(&self, state: &PlateState) -> CscMatrix<f64> {
        let map = self.dof_map();
        let mut fa = FreeAssembly::new(map.n_free());
        self.assembler()
            .hessian(state, |_, idx, ke| fa.add_element(map, idx, ke));
        fa.into_csc()
    }

    fn linear_factor(&self, state: &PlateState) -> Result<&SpdFactor> {
        if let Some(f) = self.linear_factor.get() {
            return Ok(f);
        }
        let f = SpdFactor::factor(&self.free_hessian(state))?;
        Ok(self.linear_factor.get_or_init(|| f))
    }

    /// Free part of the elastic gradient and the tolerance it is measured against.
    fn free_gradient(&self, state: &PlateState) -> (Vec<f64>, f64) {
        let g = self.assembler().gradient(state);
        let map = self.dof_map();
        let gf = map.gather(&g);
        let reaction: f64 = g
            .iter()
            .enumerate()
            .filter(|(i, _)| map.slot(*i).is_none())
            .map(|(_, x)| x * x)
            .sum::<f64>()
            .sqrt();
        (gf, self.tol.newton_tol * reaction.max(1.0))
    }

    /// Minimizes the elastic energy over `(u, v)` with `p` and the boundary
    /// values of `state` held fixed.
    pub fn minimize_elastic(&self, state: &PlateState) -> Result<ElasticSolve> {
        match self.alpha {
            crate::plate::Alpha::Linear => self.solve_linear(state),
            crate::plate::Alpha::VonKarman => match self.newton(state) {
                Err(Error::NewtonStall { .. }) => {
                    // one retry from a slightly perturbed iterate
                    let mut start = state.clone();
                    for (k, &i) in self.dof_map().free().iter().enumerate() {
                        let wiggle = ((k * 7919 % 1000) as f64 / 1000.0 - 0.5) * 1e-6;
                        start.dofs[i] += wiggle;
                    }
                    self.newton(&start)
                }
                other => other,
            },
        }
    }

    fn solve_linear(&self, state: &PlateState) -> Result<ElasticSolve> {
        let factor = self.linear_factor(state)?;
        let mut s = state.clone();
        let (mut gf, mut tol) = self.free_gradient(&s);
        let mut norm = l2(&gf);
        let mut iters = 0;
        while norm > tol {
            if iters == self.tol.newton_max {
                return Err(Error::NonConvergence { iters, residual: norm });
            }
            let step = factor.solve(&gf);
            let mut trial = s.clone();
            self.dof_map().scatter_add(&step, -1.0, &mut trial.dofs);
            let (g2, tol2) = self.free_gradient(&trial);
            let n2 = l2(&g2);
            iters += 1;
            if n2 >= norm {
                // rounding floor reached
                if iters > 1 {
                    break;
                }
                return Err(Error::NonConvergence { iters, residual: n2 });
            }
            s = trial;
            gf = g2;
            tol = tol2;
            norm = n2;
        }
        Ok(ElasticSolve {
            state: s,
            iters,
            gradient_norm: norm,
        })
    }

    fn newton(&self, state: &PlateState) -> Result<ElasticSolve> {
        let asm = self.assembler();
        let map = self.dof_map();
        let mut s = state.clone();
        let mut energy = asm.energy(&s);
        let (mut gf, mut tol) = self.free_gradient(&s);
        let mut norm = l2(&gf);
        let mut iters = 0;
        while norm > tol {
            if iters == self.tol.newton_max {
                return Err(Error::NonConvergence { iters, residual: norm });
            }
            iters += 1;
            let h = self.free_hessian(&s);
            let (mut dir, _) = shifted_solve(&h, &gf)?;
            dir.iter_mut().for_each(|d| *d = -*d);
            let mut slope: f64 = dir.iter().zip(&gf).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                dir = gf.iter().map(|g| -g).collect();
                slope = -norm * norm;
            }
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut trial = s.clone();
                map.scatter_add(&dir, step, &mut trial.dofs);
                let e = asm.energy(&trial);
                let floor = 1e-14 * energy.abs().max(1e-300);
                if e <= energy + 1e-4 * step * slope || (e <= energy + floor && -slope * step < floor) {
                    accepted = Some((trial, e));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, e)) = accepted else {
                return Err(Error::NewtonStall { gradient: norm });
            };
            let (g2, tol2) = self.free_gradient(&trial);
            let n2 = l2(&g2);
            if e >= energy && n2 >= norm {
                // no progress possible at this precision
                if n2 <= 1e3 * tol {
                    break;
                }
                return Err(Error::NewtonStall { gradient: norm });
            }
            s = trial;
            energy = e;
            gf = g2;
            tol = tol2;
            norm = n2;
        }
        Ok(ElasticSolve {
            state: s,
            iters,
            gradient_norm: norm,
        })
    }

    /// Incremental objective: energy plus dissipation from `prev`.
    pub fn incremental_objective(&self, state: &PlateState, prev: &PlateState) -> f64 {
        self.energy(state) + self.dissipation(state, prev)
    }

    /// Pointwise plastic update at frozen `(u, v)`, warm-started from `state.p`.
    pub fn plastic_update(&self, state: &PlateState, prev: &PlateState) -> Result<PlateState> {
        let strain = assemble_strain(&self.grid, state, self.alpha);
        let mut out = state.clone();
        for (idx, e) in strain.iter().enumerate() {
            out.p[idx] = self.local.prox_update_from(e, &prev.p[idx], &state.p[idx])?.p;
        }
        Ok(out)
    }

    /// One knot of the incremental scheme from the converged state `prev`.
    pub fn incremental_step(&self, prev: &PlateState, t: f64, dt: f64) -> Result<StepResult> {
        let start = self.apply_boundary(prev, t);
        let mut s = self.minimize_elastic(&start)?.state;
        let mut f = self.incremental_objective(&s, prev);
        let slack = self.tol.delta * dt;
        let mut sweeps = 0;
        while sweeps < self.tol.alt_max {
            sweeps += 1;
            let plastic = self.plastic_update(&s, prev)?;
            if plastic.p == s.p {
                break;
            }
            let next = self.minimize_elastic(&plastic)?.state;
            let f_next = self.incremental_objective(&next, prev);
            let guard = 1e-12 * f.abs() + 1e-300;
            if f_next > f + guard {
                return Err(Error::ObjectiveIncrease {
                    before: f,
                    after: f_next,
                });
            }
            let decrease = f - f_next;
            s = next;
            f = f_next;
            if decrease < (self.tol.alt_tol * f.abs()).max(slack) {
                break;
            }
        }
        Ok(StepResult {
            state: s,
            inner_iters: sweeps,
            objective: f,
        })
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
