//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line, written
//! straight to stderr so that it shows up without `--nocapture`.

use std::io::Write as _;

use nalgebra::{Matrix3, Vector3, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thinplate::evolution::{
    lipschitz_report, rate_independence_test, run_evolution, EvolutionRun, LipschitzReport,
    PlateProblem, RunOptions, TimePartition,
};
use thinplate::forms::gauge::Gauge;
use thinplate::forms::{DissipationDensity, DissipationMode, HardeningForm, IsotropicElasticity};
use thinplate::local::LocalProblem;
use thinplate::plate::{assemble_strain, field_distance, Alpha, PlateState, Reparam};
use thinplate::scenario;
use thinplate::sl3::{d_upper, dissipation_distance, mat_exp, PathPlan, SL3Matrix};
use thinplate::tensor::{DeviatoricTensor, Mat2, Mat3, Sym2};

fn report(n: u32, name: &str, ok: bool, detail: &str) {
    let line = format!(
        "criterion {n:>2} {name:<28} {} {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

const STEPS: usize = 10;

fn standard(alpha: Alpha) -> PlateProblem {
    scenario::bending(alpha, 8, scenario::SIGMA_Y)
}

fn run(pb: &PlateProblem, steps: usize, opts: &RunOptions) -> EvolutionRun {
    run_evolution(pb, &TimePartition::uniform(1.0, steps).unwrap(), opts)
        .into_result()
        .unwrap()
}

#[test]
fn c01_relaxation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut brute_err, mut closed_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let lam = rng.random_range(0.1..10.0);
        let mu = rng.random_range(0.1..10.0);
        let el = IsotropicElasticity::new(lam, mu).unwrap();
        let f = Mat2::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let q2 = el.q2(&f).unwrap();

        // Q over the free third column is quadratic: fit it from a stencil
        let q = |l: &Vector3<f64>| {
            let mut m = Mat3::zeros();
            m.fixed_view_mut::<2, 2>(0, 0).copy_from(&f);
            m.set_column(2, l);
            el.q(&m)
        };
        let e = Matrix3::<f64>::identity();
        let q0 = q(&Vector3::zeros());
        let g = Vector3::from_fn(|i, _| (q(&e.column(i).into_owned()) - q(&(-e.column(i)))) / 2.0);
        let h = Matrix3::from_fn(|i, j| {
            let (a, b) = (e.column(i), e.column(j));
            (q(&(a + b)) - q(&(a - b)) - q(&(b - a)) + q(&(-a - b))) / 4.0
        });
        let l = -h.lu().solve(&g).unwrap();
        let brute = q(&l);
        // no random perturbation of the minimizer does better
        for _ in 0..4 {
            let d = Vector3::from_fn(|_, _| rng.random_range(-1e-3..1e-3));
            assert!(q(&(l + d)) >= brute - 1e-12 * q0.abs().max(1.0));
        }
        brute_err = brute_err.max((q2 - brute).abs() / brute.abs().max(1e-300));

        let s = Sym2::sym(&f);
        let closed = mu * s.norm().powi(2) + mu * lam / (lam + 2.0 * mu) * f.trace().powi(2);
        closed_err = closed_err.max((q2 - closed).abs() / closed.abs().max(1e-300));
    }
    report(
        1,
        "relaxation oracle",
        brute_err <= 1e-8 && closed_err <= 1e-10,
        &format!("brute-force rel {brute_err:.2e} (tol 1e-8), closed form rel {closed_err:.2e} (tol 1e-10)"),
    );
}

fn random_local(rng: &mut ChaCha8Rng, gauge: bool) -> LocalProblem {
    let el = IsotropicElasticity::new(rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)).unwrap();
    let h = HardeningForm::isotropic(rng.random_range(0.05..5.0)).unwrap();
    let sigma = rng.random_range(0.01..1.0);
    let mode = if gauge {
        DissipationMode::Gauge(Gauge::cross_polytope())
    } else {
        DissipationMode::Frobenius
    };
    LocalProblem::new(el, h, DissipationDensity::new(sigma, mode).unwrap()).unwrap()
}

fn random_dev(rng: &mut ChaCha8Rng, r: f64) -> DeviatoricTensor {
    DeviatoricTensor::from_coords(&Vector5::from_fn(|_, _| rng.random_range(-r..r)))
}

#[test]
fn c02_pointwise_prox_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_gap, mut worst_res) = (f64::INFINITY, 0.0f64);
    for k in 0..200 {
        let lp = random_local(&mut rng, k % 4 == 3);
        let e = Sym2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let p_prev = random_dev(&mut rng, 0.2);
        let sol = lp.prox_update(&e, &p_prev).unwrap();
        let f = lp.incremental_density(&e, &sol.p, &p_prev);
        worst_res = worst_res.max(lp.optimality_residual(&e, &sol.p, &p_prev));

        // half the samples span the region between p_prev and beyond the
        // solution, half are concentrated around the solution
        let reach = 2.0 * (sol.p - p_prev).norm() + 0.1;
        let mut best = lp.incremental_density(&e, &p_prev, &p_prev);
        for i in 0..100_000 {
            let (centre, r) = if i % 2 == 0 { (p_prev, reach) } else { (sol.p, 1e-2 * reach) };
            let q = centre + random_dev(&mut rng, r);
            best = best.min(lp.incremental_density(&e, &q, &p_prev));
        }
        worst_gap = worst_gap.min(best - f);
    }
    report(
        2,
        "pointwise prox oracle",
        worst_gap >= -1e-8 && worst_res <= 1e-10,
        &format!("min(search - prox) {worst_gap:.2e} (tol -1e-8), max residual {worst_res:.2e} (tol 1e-10)"),
    );
}

#[test]
fn c03_euler_lagrange() {
    let r = run(&standard(Alpha::Linear), STEPS, &RunOptions::default());
    let worst = r.trace.max_el_residual();
    report(3, "euler-lagrange", worst <= 1e-8, &format!("max normalized residual {worst:.2e} over {} knots (tol 1e-8)", STEPS + 1));
}

#[test]
fn c04_energy_balance() {
    let pb = standard(Alpha::Linear);
    let mut maxima = Vec::new();
    let mut lowest = f64::INFINITY;
    for n in [10, 20, 40, 80] {
        let r = run(&pb, n, &RunOptions::default());
        maxima.push(r.trace.max_balance_residual());
        lowest = lowest.min(r.trace.min_balance_residual());
    }
    let ratios: Vec<f64> = maxima.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = ratios.iter().all(|&q| q <= 0.6) && lowest >= -1e-8;
    report(
        4,
        "energy balance",
        ok,
        &format!("max r at N=10..80 {}, ratios {} (tol 0.6), min r {lowest:.2e} (tol -1e-8)", list(&maxima), list(&ratios)),
    );
}

#[test]
fn c05_stability() {
    let opts = RunOptions {
        stability_dirs: 50,
        seed: 5,
        ..RunOptions::default()
    };
    let mut worst = Vec::new();
    for alpha in [Alpha::Linear, Alpha::VonKarman] {
        worst.push(run(&standard(alpha), STEPS, &opts).trace.min_stability_margin());
    }
    report(
        5,
        "stability",
        worst.iter().all(|&m| m >= -1e-7),
        &format!("min margin linear {:.2e}, von karman {:.2e} (tol -1e-7)", worst[0], worst[1]),
    );
}

#[test]
fn c06_elastic_regime() {
    // peak driving force of the purely elastic evolution
    let probe = standard(Alpha::Linear);
    let part = TimePartition::uniform(1.0, STEPS).unwrap();
    let zeros = PlateState::zeros(&probe.grid);
    let elastic: Vec<PlateState> = part
        .knots()
        .iter()
        .map(|&t| probe.minimize_elastic(&probe.apply_boundary(&zeros, t)).unwrap().state)
        .collect();
    let peak = elastic
        .iter()
        .flat_map(|s| assemble_strain(&probe.grid, s, Alpha::Linear))
        .map(|e| probe.local.stiffness().stress(&e).norm())
        .fold(0.0, f64::max);

    let pb = scenario::bending(Alpha::Linear, 8, 1e3 * peak);
    let r = run(&pb, STEPS, &RunOptions::default());
    let dist = elastic
        .iter()
        .enumerate()
        .map(|(i, s)| field_distance(&pb.grid, r.state(i).unwrap(), s).max())
        .fold(0.0, f64::max);
    let diss = r.trace.rows.iter().map(|row| row.dissipation_cum).fold(0.0, f64::max);
    report(
        6,
        "elastic regime",
        dist <= 1e-8 && diss == 0.0,
        &format!("sigma_y {:.3e}, field distance {dist:.2e} (tol 1e-8), dissipation {diss:e}", 1e3 * peak),
    );
}

#[test]
fn c07_rate_independence() {
    let pb = standard(Alpha::Linear);
    let part = TimePartition::uniform(1.0, STEPS).unwrap();
    let identical = [Reparam::Square, Reparam::SmoothStep]
        .into_iter()
        .all(|r| rate_independence_test(&pb, &part, r).unwrap().identical);

    // final states of independent refinements converge at first order
    let finals: Vec<PlateState> = [10, 20, 40, 80]
        .into_iter()
        .map(|n| run(&pb, n, &RunOptions::default()).last_state().unwrap().clone())
        .collect();
    let gaps: Vec<f64> = finals.windows(2).map(|w| field_distance(&pb.grid, &w[0], &w[1]).max()).collect();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
    report(
        7,
        "rate independence",
        identical && ratios.iter().all(|&q| q <= 0.6),
        &format!("reparametrized bit-identical {identical}, refinement gaps {}, ratios {} (tol 0.6)", list(&gaps), list(&ratios)),
    );
}

#[test]
fn c08_lipschitz() {
    let pb = standard(Alpha::Linear);
    let opts = RunOptions {
        lipschitz: true,
        ..RunOptions::default()
    };
    let mut reports: Vec<LipschitzReport> = Vec::new();
    for n in [10, 20, 40] {
        let r = run(&pb, n, &opts);
        let states: Vec<PlateState> = r.states.iter().map(|(_, s)| s.clone()).collect();
        let direct = lipschitz_report(&pb.grid, TimePartition::uniform(1.0, n).unwrap().knots(), &states);
        assert_eq!(Some(direct), r.lipschitz);
        reports.push(direct);
    }
    // a field that does not move only shows rounding noise
    let top = reports.iter().flat_map(|r| r.as_array()).fold(0.0f64, f64::max);
    let mut worst = 0.0f64;
    for w in reports.windows(2) {
        for (a, b) in w[0].as_array().iter().zip(w[1].as_array()) {
            if a.max(b) > 1e-8 * top {
                worst = worst.max((b / a - 1.0).abs());
            }
        }
    }
    let last = reports.last().unwrap();
    report(
        8,
        "lipschitz",
        worst <= 0.1,
        &format!("quotients u {:.4e} v {:.4e} p {:.4e}, max relative change {worst:.3} (tol 0.1)", last.u, last.v, last.p),
    );
}

fn random_sl3(rng: &mut ChaCha8Rng, radius: f64) -> SL3Matrix {
    let mut m = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    m -= (m.trace() / 3.0) * Mat3::identity();
    m *= radius * rng.random_range(0.0..1.0f64) / m.norm();
    SL3Matrix::new(mat_exp(&m)).unwrap()
}

#[test]
fn c09_dissipation_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = DissipationDensity::von_mises(scenario::SIGMA_Y).unwrap();
    let plan = PathPlan::default();

    let mut excess = f64::NEG_INFINITY;
    for _ in 0..100 {
        let y = Vector5::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let q = DeviatoricTensor::from_coords(&(0.3 * rng.random_range(0.0..1.0f64) * y / y.norm()));
        let b = d_upper(&d, &SL3Matrix::exp_of(&q), &plan).unwrap();
        excess = excess.max(b.value - d.sigma_y() * q.norm());
    }

    let mut tri = f64::NEG_INFINITY;
    for _ in 0..100 {
        let f: Vec<SL3Matrix> = (0..3).map(|_| random_sl3(&mut rng, 0.3)).collect();
        let dist = |a: usize, b: usize| dissipation_distance(&d, &f[a], &f[b], &plan).unwrap().value;
        tri = tri.max(dist(0, 2) - dist(0, 1) - dist(1, 2));
    }

    // slope of the bound along F = I + εA, extrapolated in ε
    let gauge = DissipationDensity::new(scenario::SIGMA_Y, DissipationMode::Gauge(Gauge::cross_polytope())).unwrap();
    let mut slope_err = 0.0f64;
    for dens in [&d, &gauge] {
        for _ in 0..5 {
            let a = random_dev(&mut rng, 1.0);
            let slope = |eps: f64| {
                let f = SL3Matrix::new(Mat3::identity() + eps * a.to_mat()).unwrap();
                d_upper(dens, &f, &plan).unwrap().value / eps
            };
            let s: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&e| slope(e)).collect();
            let extrapolated = (10.0 * s[2] - s[1]) / 9.0;
            slope_err = slope_err.max((extrapolated / dens.eval(&a) - 1.0).abs());
        }
    }
    report(
        9,
        "dissipation distance",
        excess <= 1e-6 && tri <= 2e-6 && slope_err <= 0.05,
        &format!("bound - sigma_y|q| {excess:.2e} (tol 1e-6), triangle defect {tri:.2e} (tol 2e-6), slope rel {slope_err:.2e} (tol 0.05)"),
    );
}

#[test]
fn c10_von_karman_mechanism() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let grid = standard(Alpha::Linear).grid;
    let s = 0.7;
    let mut state = PlateState::zeros(&grid);
    for n in 0..grid.n_nodes() {
        let (x, _) = grid.node_pos(n);
        let dofs = &mut state.dofs[6 * n..6 * n + 6];
        dofs[0] = rng.random_range(-0.1..0.1);
        dofs[1] = rng.random_range(-0.1..0.1);
        dofs[2] = s * x * x;
        dofs[3] = 2.0 * s * x;
    }
    let lin = assemble_strain(&grid, &state, Alpha::Linear);
    let vk = assemble_strain(&grid, &state, Alpha::VonKarman);
    let mut worst = 0.0f64;
    for c in 0..grid.n_cells() {
        for g in 0..grid.n_inplane_points() / grid.n_cells() {
            let (x, _) = grid.inplane_position(c, g);
            // ½∇v⊗∇v with ∇v = (2sx, 0)
            let expect = Sym2::new(2.0 * s * s * x * x, 0.0, 0.0);
            for l in 0..grid.layers().len() {
                let i = grid.point_index(c, g, l);
                worst = worst.max((vk[i] - lin[i] - expect).norm());
            }
        }
    }
    report(10, "von karman mechanism", worst <= 1e-12, &format!("max pointwise deviation {worst:.2e} (tol 1e-12)"));
}
