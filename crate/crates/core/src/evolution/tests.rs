use super::*;
use crate::plate::{field_distance, BoundaryTrajectory, Edge, EdgeSet, ProfileKind, TimeProfile, NODE_DOFS};
use crate::scenario;
use crate::tensor::DeviatoricTensor;

fn bending(alpha: Alpha) -> PlateProblem {
    scenario::bending(alpha, 4, scenario::SIGMA_Y)
}

fn stretch_problem(gamma: EdgeSet, n: usize, sigma_y: f64) -> PlateProblem {
    let grid = Grid::new(1.0, 1.0, n, n, 2, gamma).unwrap();
    PlateProblem::new(
        grid,
        Alpha::Linear,
        scenario::material(sigma_y),
        BoundaryTrajectory::stretch(0.1, TimeProfile::linear(1.0)),
        SolverTolerances::default(),
    )
    .unwrap()
}

#[test]
fn partitions_validate_and_map() {
    assert!(TimePartition::new(vec![0.0]).is_err());
    assert!(TimePartition::new(vec![0.1, 1.0]).is_err());
    assert!(TimePartition::new(vec![0.0, 0.5, 0.5]).is_err());
    let p = TimePartition::new(vec![0.0, 0.1, 0.4, 1.0]).unwrap();
    assert!((p.tau() - 0.6).abs() < 1e-15);
    let u = TimePartition::uniform(2.0, 4).unwrap();
    assert_eq!(u.knots(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    let m = u.mapped(Reparam::Square).unwrap();
    assert_eq!(m.knots(), &[0.0, 0.125, 0.5, 1.125, 2.0]);
    assert_eq!(p.refined().knots(), &[0.0, 0.05, 0.1, 0.25, 0.4, 0.7, 1.0]);
    assert_eq!(p.coarsened().unwrap().knots(), &[0.0, 0.4, 1.0]);
    assert_eq!(u.coarsened().unwrap().knots(), &[0.0, 1.0, 2.0]);
    assert!(TimePartition::uniform(1.0, 1).unwrap().coarsened().is_none());
}

#[test]
fn elastic_solve_of_zero_data_is_zero() {
    for alpha in [Alpha::Linear, Alpha::VonKarman] {
        let pb = bending(alpha).with_trajectory(BoundaryTrajectory::zero(1.0));
        let s = pb.minimize_elastic(&PlateState::zeros(&pb.grid)).unwrap().state;
        assert!(s.dofs.iter().all(|&d| d == 0.0));
    }
}

#[test]
fn homogeneous_stretch_is_reproduced() {
    let pb = stretch_problem(EdgeSet::all(), 4, 1e3);
    let s = pb.apply_boundary(&PlateState::zeros(&pb.grid), 1.0);
    let s = pb.minimize_elastic(&s).unwrap().state;
    for n in 0..pb.grid.n_nodes() {
        let (x, _) = pb.grid.node_pos(n);
        let dofs = &s.dofs[NODE_DOFS * n..NODE_DOFS * (n + 1)];
        assert!((dofs[0] - 0.1 * x).abs() < 1e-12);
        assert!(dofs[1..].iter().all(|d| d.abs() < 1e-12));
    }
}

#[test]
fn von_karman_solve_decreases_energy_from_random_starts() {
    let pb = bending(Alpha::VonKarman);
    for seed in 0..3u64 {
        let mut s = pb.apply_boundary(&PlateState::zeros(&pb.grid), 0.7);
        for (k, &i) in pb.dof_map().free().iter().enumerate() {
            s.dofs[i] = (((k as u64 * 2654435761 + seed * 97) % 1000) as f64 / 1000.0 - 0.5) * 0.05;
        }
        let before = pb.assembler().energy(&s);
        let out = pb.minimize_elastic(&s).unwrap();
        assert!(pb.assembler().energy(&out.state) <= before);
        assert!(out.gradient_norm <= pb.tol.newton_tol);
    }
}

#[test]
fn frozen_loading_keeps_the_state() {
    let pb = bending(Alpha::Linear);
    let first = pb.incremental_step(&PlateState::zeros(&pb.grid), 0.6, 0.6).unwrap();
    let again = pb.incremental_step(&first.state, 0.6, 0.1).unwrap();
    // the alternation stops on a relative objective decrease of alt_tol, which
    // pins the state down to about sqrt(alt_tol) relative to its size
    let f = pb.incremental_objective(&first.state, &first.state);
    assert!(again.objective >= f - 2.0 * pb.tol.alt_tol * f.abs());
    let size = field_distance(&pb.grid, &first.state, &PlateState::zeros(&pb.grid)).max();
    let d = field_distance(&pb.grid, &first.state, &again.state);
    assert!(d.max() <= 10.0 * pb.tol.alt_tol.sqrt() * size, "{d:?} vs {size}");
}

#[test]
fn high_yield_stress_keeps_plastic_strain_at_zero() {
    let pb = scenario::bending(Alpha::Linear, 4, 1e3);
    let step = pb.incremental_step(&PlateState::zeros(&pb.grid), 1.0, 1.0).unwrap();
    assert!(step.state.p.iter().all(|p| *p == DeviatoricTensor::ZERO));
    let elastic = pb
        .minimize_elastic(&pb.apply_boundary(&PlateState::zeros(&pb.grid), 1.0))
        .unwrap()
        .state;
    assert_eq!(step.state, elastic);
    let strain = crate::plate::assemble_strain(&pb.grid, &step.state, pb.alpha);
    for (e, p) in strain.iter().zip(&step.state.p) {
        assert_eq!(pb.local.optimality_residual(e, p, &DeviatoricTensor::ZERO), 0.0);
    }
}

#[test]
fn single_cell_follows_the_pointwise_update() {
    // every DOF is prescribed, so the strain is the homogeneous diag(a, 0)
    let grid = Grid::new(1.0, 1.0, 1, 1, 2, EdgeSet::all()).unwrap();
    let pb = PlateProblem::new(
        grid,
        Alpha::Linear,
        scenario::material(0.05),
        BoundaryTrajectory::stretch(0.1, TimeProfile::linear(1.0)),
        SolverTolerances::default(),
    )
    .unwrap();
    let part = TimePartition::uniform(1.0, 4).unwrap();
    let run = run_evolution(&pb, &part, &RunOptions::default()).into_result().unwrap();
    let mut p_prev = DeviatoricTensor::ZERO;
    for (i, &t) in part.knots().iter().enumerate() {
        let e = crate::tensor::Sym2::new(0.1 * t, 0.0, 0.0);
        let expect = pb.local.prox_update(&e, &p_prev).unwrap().p;
        for p in &run.state(i).unwrap().p {
            assert!((*p - expect).norm() < 1e-12);
        }
        p_prev = expect;
    }
    assert!(p_prev.norm() > 0.0, "loading must pass the yield point");
}

#[test]
fn zero_loading_gives_a_zero_trace() {
    let pb = bending(Alpha::Linear).with_trajectory(BoundaryTrajectory::zero(1.0));
    let run = run_evolution(&pb, &TimePartition::uniform(1.0, 3).unwrap(), &RunOptions::default());
    assert!(run.failure.is_none());
    assert_eq!(run.trace.len(), 4);
    for r in &run.trace.rows {
        assert_eq!(
            (r.elastic, r.hardening, r.dissipation_cum, r.work_cum, r.balance_residual),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }
}

#[test]
fn elastic_regime_scales_quadratically() {
    let pb = scenario::bending(Alpha::Linear, 4, 1e3);
    let run = run_evolution(&pb, &TimePartition::uniform(1.0, 4).unwrap(), &RunOptions::default());
    let last = run.trace.rows.last().unwrap().elastic;
    for r in &run.trace.rows {
        assert!((r.elastic - last * r.t * r.t).abs() < 1e-12 * last);
        assert_eq!(r.dissipation_cum, 0.0);
        assert!(r.balance_residual.abs() < 1e-14);
    }
}

#[test]
fn runs_are_deterministic() {
    let pb = bending(Alpha::VonKarman);
    let part = TimePartition::uniform(1.0, 4).unwrap();
    let opts = RunOptions {
        stability_dirs: 4,
        seed: 9,
        ..RunOptions::default()
    };
    let a = run_evolution(&pb, &part, &opts);
    let b = run_evolution(&pb, &part, &opts);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.states, b.states);
}

#[test]
fn cumulative_dissipation_is_monotone_and_balance_is_small() {
    let pb = bending(Alpha::Linear);
    let run = run_evolution(&pb, &TimePartition::uniform(1.0, 8).unwrap(), &RunOptions::default());
    let rows = &run.trace.rows;
    assert!(rows.windows(2).all(|w| w[1].dissipation_cum >= w[0].dissipation_cum));
    assert!(rows.last().unwrap().dissipation_cum > 0.0);
    let rep = check_energy_balance(&run.trace, &pb.tol, 1e-3, 1.0 / 8.0);
    assert!(rep.flagged.is_empty(), "{rep:?}");
    assert!(rep.min >= -1e-10);
}

#[test]
fn stability_examples() {
    let pb = bending(Alpha::Linear);
    // exact elastic solution, p frozen at zero, displacement-only directions
    let s = pb
        .minimize_elastic(&pb.apply_boundary(&PlateState::zeros(&pb.grid), 0.2))
        .unwrap()
        .state;
    let mut worst = f64::INFINITY;
    for d in [1, 5, 9] {
        // direction index 1 mod 4 perturbs (u, v) only
        worst = worst.min(check_stability(&pb, &s, 0.2, d + 1, d as u64));
    }
    assert!(worst >= -1e-12);

    let step = pb.incremental_step(&PlateState::zeros(&pb.grid), 0.8, 0.8).unwrap();
    assert!(check_stability(&pb, &step.state, 0.8, 12, 3) >= -1e-8);

    let mut corrupted = step.state.clone();
    corrupted.p.iter_mut().for_each(|p| *p = 2.0 * *p);
    assert!(check_stability(&pb, &corrupted, 0.8, 12, 3) < 0.0);
}

#[test]
fn euler_lagrange_examples() {
    let pb = bending(Alpha::Linear);
    let zero = PlateState::zeros(&pb.grid);
    assert_eq!(check_euler_lagrange(&pb, &zero).value(Alpha::Linear), 0.0);

    let step = pb.incremental_step(&zero, 0.8, 0.8).unwrap();
    assert!(check_euler_lagrange(&pb, &step.state).value(Alpha::Linear) <= 1e-8);

    let mut noisy = step.state.clone();
    for (k, &i) in pb.dof_map().free().iter().enumerate() {
        noisy.dofs[i] += ((k * 37 % 19) as f64 - 9.0) * 1e-3;
    }
    let r = check_euler_lagrange(&pb, &noisy).value(Alpha::Linear);
    assert!(r > 1e-2 && r <= 1.0, "{r}");
}

#[test]
fn reparametrized_partition_gives_identical_states() {
    let pb = bending(Alpha::Linear);
    let part = TimePartition::uniform(1.0, 5).unwrap();
    for r in [Reparam::Square, Reparam::SmoothStep] {
        let rep = rate_independence_test(&pb, &part, r).unwrap();
        assert!(rep.identical);
        assert_eq!(rep.discrepancy.max(), 0.0);
    }
}

#[test]
fn lipschitz_quotients() {
    let pb = scenario::bending(Alpha::Linear, 4, 1e3);
    let frozen = pb.with_trajectory(
        pb.traj
            .with_profile(TimeProfile::new(ProfileKind::RampHold { t_ramp: 1e-3 }, 1.0).unwrap()),
    );
    let opts = RunOptions {
        lipschitz: true,
        ..RunOptions::default()
    };
    let part = TimePartition::new(vec![0.0, 0.5, 0.75, 1.0]).unwrap();
    let run = run_evolution(&frozen, &part, &opts);
    // only the first step moves: after the ramp the state is frozen
    let states: Vec<PlateState> = run.states.iter().skip(1).map(|(_, s)| s.clone()).collect();
    let rep = lipschitz_report(&pb.grid, &part.knots()[1..], &states);
    assert_eq!(rep.as_array(), [0.0; 3]);

    let mut quotients = Vec::new();
    for n in [2, 4, 8] {
        let run = run_evolution(&pb, &TimePartition::uniform(1.0, n).unwrap(), &opts);
        quotients.push(run.lipschitz.unwrap());
    }
    for q in &quotients[1..] {
        assert!((q.v - quotients[0].v).abs() < 1e-9 * q.v);
    }
}

#[test]
fn starved_alternation_fails_stability() {
    let tol = SolverTolerances { alt_max: 1, ..Default::default() };
    let pb = bending(Alpha::Linear).with_tolerances(tol).unwrap();
    let step = pb.incremental_step(&PlateState::zeros(&pb.grid), 1.0, 1.0).unwrap();
    assert!(check_stability(&pb, &step.state, 1.0, 12, 0) < -1e-7);
}

#[test]
fn gamma_d_must_be_nonempty() {
    assert!(EdgeSet::new(&[]).is_err());
    assert!(EdgeSet::new(&[Edge::Top]).is_ok());
}

