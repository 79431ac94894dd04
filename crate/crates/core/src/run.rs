//! Orchestration of the three commands: `simulate`, `check` and
//! `dissipation`. Each writes its artifacts into the configured output
//! directory and returns an [`Outcome`] whose exit code is 0 only when no
//! step failed and every enabled check met its threshold.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, SnapshotChoice};
use crate::error::{Error, Result};
use crate::evolution::{
    check_energy_balance, check_euler_lagrange, check_stability, rate_constant,
    rate_independence_test, run_evolution, EvolutionRun, Keep, LipschitzReport, PlateProblem,
    RunOptions, TimePartition,
};
use crate::io::{self, fmt_f64, RunManifest};
use crate::plate::{Alpha, PlateState};
use crate::sl3::{d_upper, d_upper_one_segment, mat_exp, mat_log, PathBound, SL3Matrix};
use crate::tensor::{DeviatoricTensor, Mat3};

pub const EXIT_OK: i32 = 0;
/// An enabled check missed its threshold.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// The evolution stopped at a failing step.
pub const EXIT_STEP_FAILED: i32 = 2;

/// Result of one diagnostic phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub phase: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(phase: &str, value: f64, threshold: String, passed: bool, detail: String) -> Self {
        CheckResult {
            phase: phase.to_string(),
            value,
            threshold,
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub checks: Vec<CheckResult>,
    /// Phase that stopped the run or the first failing check.
    pub failed_phase: Option<String>,
    /// Error message of a failed step.
    pub failure: Option<String>,
    pub output_dir: PathBuf,
}

impl Outcome {
    fn from_checks(checks: Vec<CheckResult>, output_dir: PathBuf) -> Self {
        let failed = checks.iter().find(|c| !c.passed).map(|c| c.phase.clone());
        Outcome {
            exit_code: if failed.is_some() { EXIT_CHECK_FAILED } else { EXIT_OK },
            checks,
            failed_phase: failed,
            failure: None,
            output_dir,
        }
    }

    /// Plain-text table of the checks.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<18} {:>24}  {:<22} {:<6} detail", "phase", "value", "threshold", "status");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<18} {:>24}  {:<22} {:<6} {}",
                c.phase,
                fmt_f64(c.value),
                c.threshold,
                if c.passed { "ok" } else { "FAIL" },
                c.detail
            );
        }
        if let (Some(phase), Some(msg)) = (&self.failed_phase, &self.failure) {
            let _ = writeln!(s, "failed in phase {phase}: {msg}");
        }
        s
    }

    pub fn checks_csv(&self) -> String {
        let mut s = String::from("phase,value,threshold,passed\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{},{},{}", c.phase, fmt_f64(c.value), c.threshold, c.passed);
        }
        s
    }
}

pub fn snapshot_names(step: usize) -> (String, String) {
    (
        format!("snapshot_{step:04}_nodes.csv"),
        format!("snapshot_{step:04}_points.csv"),
    )
}

struct Phases {
    manifest: RunManifest,
    clock: Instant,
}

impl Phases {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Phases {
            manifest: RunManifest::new(command, &cfg.to_text()),
            clock: Instant::now(),
        }
    }

    fn lap(&mut self, name: &str) {
        let secs = self.clock.elapsed().as_secs_f64();
        self.manifest.phases.push((name.to_string(), secs));
        self.clock = Instant::now();
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn keep_for(choice: &SnapshotChoice) -> Keep {
    match choice {
        SnapshotChoice::None => Keep::Steps(Vec::new()),
        SnapshotChoice::Last => Keep::Last,
        SnapshotChoice::All => Keep::All,
        SnapshotChoice::Steps(v) => Keep::Steps(v.clone()),
    }
}

fn write_snapshot(
    dir: &Path,
    problem: &PlateProblem,
    step: usize,
    state: &PlateState,
    manifest: &mut RunManifest,
) -> Result<()> {
    let (nodes, points) = snapshot_names(step);
    io::write_output(dir, &nodes, &io::nodes_csv(&problem.grid, state), manifest)?;
    io::write_output(dir, &points, &io::points_csv(&problem.grid, state, problem.alpha), manifest)
}

/// Runs the evolution and the enabled diagnostics.
pub fn simulate(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outcome> {
    let dir = cfg.output_dir.clone();
    prepare_dir(&dir)?;
    let mut ph = Phases::new("simulate", cfg);
    let problem = cfg.problem()?;
    let partition = cfg.partition()?;
    for w in cfg.warnings() {
        log(&format!("warning: {w}"));
    }
    ph.lap("setup");

    let d = &cfg.diagnostics;
    let opts = RunOptions {
        stability_dirs: d.stability_dirs,
        seed: cfg.seed,
        keep: keep_for(&d.snapshots),
        lipschitz: d.lipschitz,
    };
    log(&format!(
        "simulate: {} steps on a {}x{}x{} grid ({})",
        partition.steps(),
        cfg.grid.nx,
        cfg.grid.ny,
        cfg.grid.nz,
        cfg.alpha.name()
    ));
    let run = run_evolution(&problem, &partition, &opts);
    ph.lap("evolution");

    let m = &mut ph.manifest;
    io::write_output(&dir, "trace.csv", &io::trace_csv(&run.trace), m)?;
    io::write_output(&dir, "plotdata.csv", &io::emit_plotdata(&run.trace), m)?;
    for (step, state) in &run.states {
        write_snapshot(&dir, &problem, *step, state, m)?;
    }

    let mut checks = Vec::new();
    let outcome = if let Some(err) = &run.failure {
        log(&format!("evolution failed: {err}"));
        Outcome {
            exit_code: EXIT_STEP_FAILED,
            checks,
            failed_phase: Some("evolution".into()),
            failure: Some(err.to_string()),
            output_dir: dir.clone(),
        }
    } else {
        checks.extend(simulate_checks(cfg, &problem, &partition, &run, log)?);
        ph.lap("diagnostics");
        Outcome::from_checks(checks, dir.clone())
    };

    finish(&dir, &outcome, &mut ph, "report.txt", "diagnostics.csv")?;
    Ok(outcome)
}

fn simulate_checks(
    cfg: &RunConfig,
    problem: &PlateProblem,
    partition: &TimePartition,
    run: &EvolutionRun,
    log: &mut dyn FnMut(&str),
) -> Result<Vec<CheckResult>> {
    let d = &cfg.diagnostics;
    let rows = &run.trace.rows;
    let tau = partition.tau();
    let mut out = Vec::new();

    if d.stability_dirs > 0 {
        let (worst, at) = rows
            .iter()
            .map(|r| (r.stability_margin, r.step))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
        let floor = -(d.stability_tol + cfg.solver.delta * tau);
        out.push(CheckResult::new(
            "stability",
            worst,
            format!(">= {}", fmt_f64(floor)),
            worst >= floor,
            format!("worst knot {at}, {} directions", d.stability_dirs),
        ));
    }

    if d.el_check {
        let (worst, at) = rows
            .iter()
            .map(|r| (r.el_residual, r.step))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
        out.push(CheckResult::new(
            "euler-lagrange",
            worst,
            format!("<= {}", fmt_f64(d.el_tol)),
            worst <= d.el_tol,
            format!("worst knot {at}"),
        ));
    }

    if d.energy_balance {
        let fine = check_energy_balance(&run.trace, &cfg.solver, 0.0, tau);
        let (c, how) = match (d.balance_c, partition.coarsened()) {
            (Some(c), _) => (c, "given".to_string()),
            (None, Some(coarse)) => {
                log("energy balance: coarse run for the rate constant");
                let crun = run_evolution(problem, &coarse, &RunOptions::default()).into_result()?;
                let cmax = crun.trace.max_balance_residual();
                // safety factor 2 on the two-level estimate
                let c = 2.0 * rate_constant(cmax, coarse.tau(), fine.max, tau);
                (c, format!("estimated, coarse max {}", fmt_f64(cmax)))
            }
            (None, None) => (2.0 * fine.max.abs() / tau, "single step".to_string()),
        };
        let upper = cfg.solver.delta * partition.horizon() + c * tau + d.balance_tol;
        // one-sided only for the convex energy; the Von Karman residual
        // is bracketed by two O(tau) terms of either sign
        let lower = match problem.alpha {
            Alpha::Linear => -d.balance_tol,
            Alpha::VonKarman => -upper,
        };
        let ok = fine.max <= upper && fine.min >= lower;
        out.push(CheckResult::new(
            "energy-balance",
            fine.max,
            format!("[{}, {}]", fmt_f64(lower), fmt_f64(upper)),
            ok,
            format!("min {}, C {} ({how})", fmt_f64(fine.min), fmt_f64(c)),
        ));
    }

    if let Some(reparam) = d.rate_independence {
        log(&format!("rate independence under {}", reparam.name()));
        let ri = rate_independence_test(problem, partition, reparam)?;
        out.push(CheckResult::new(
            "rate-independence",
            ri.discrepancy.max(),
            "bit-identical".into(),
            ri.identical,
            format!("reparametrization {}", reparam.name()),
        ));
    }

    if let Some(coarse) = &run.lipschitz {
        log("lipschitz: refined run");
        let opts = RunOptions {
            lipschitz: true,
            keep: Keep::Steps(Vec::new()),
            ..RunOptions::default()
        };
        let fine = run_evolution(problem, &partition.refined(), &opts).into_result()?;
        let fine = fine.lipschitz.unwrap_or_default();
        let (ratio, ok) = lipschitz_stable(coarse, &fine);
        out.push(CheckResult::new(
            "lipschitz",
            ratio,
            "|ratio - 1| <= 0.1".into(),
            ok,
            format!("u {} v {} p {}", fmt_f64(fine.u), fmt_f64(fine.v), fmt_f64(fine.p)),
        ));
    }
    Ok(out)
}

/// Largest ratio of refined to coarse quotient, and whether every field
/// changed by at most 10%. Quotients below `1e-8` of the largest one are
/// rounding noise of a field that does not move and are skipped.
pub fn lipschitz_stable(coarse: &LipschitzReport, fine: &LipschitzReport) -> (f64, bool) {
    let (c, f) = (coarse.as_array(), fine.as_array());
    let floor = 1e-8 * c.iter().chain(&f).fold(0.0f64, |m, x| m.max(*x));
    let mut worst: f64 = 1.0;
    let mut ok = true;
    for (c, f) in c.iter().zip(f) {
        if *c <= floor && f <= floor {
            continue;
        }
        let r = if *c > 0.0 { f / c } else { f64::INFINITY };
        if (r - 1.0).abs() > (worst - 1.0).abs() {
            worst = r;
        }
        ok &= (r - 1.0).abs() <= 0.1;
    }
    (worst, ok)
}

fn finish(dir: &Path, outcome: &Outcome, ph: &mut Phases, report: &str, csv: &str) -> Result<()> {
    io::write_output(dir, report, &outcome.report(), &mut ph.manifest)?;
    io::write_output(dir, csv, &outcome.checks_csv(), &mut ph.manifest)?;
    ph.lap("output");
    std::fs::write(dir.join(format!("manifest_{}.txt", ph.manifest.command)), ph.manifest.to_text())?;
    Ok(())
}

/// Diagnostics on a stored snapshot.
pub fn check(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outcome> {
    let dir = cfg.output_dir.clone();
    let mut ph = Phases::new("check", cfg);
    let problem = cfg.problem()?;
    let partition = cfg.partition()?;
    let step = cfg.check.step.unwrap_or(partition.steps());
    let t = partition.knots()[step];
    let (nodes, points) = snapshot_names(step);
    let read = |name: &str| {
        std::fs::read_to_string(dir.join(name)).map_err(|e| Error::Format {
            path: dir.join(name).display().to_string(),
            reason: e.to_string(),
        })
    };
    let state = io::read_state(&problem.grid, &read(&nodes)?, &read(&points)?, &points)?;
    ph.lap("load");
    log(&format!("check: snapshot of step {step} (t = {t})"));

    let d = &cfg.diagnostics;
    let mut checks = Vec::new();
    let bc = problem.apply_boundary(&state, t);
    let bc_err = bc
        .dofs
        .iter()
        .zip(&state.dofs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = state.dofs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    checks.push(CheckResult::new(
        "boundary",
        bc_err,
        format!("<= {}", fmt_f64(1e-12 * scale)),
        bc_err <= 1e-12 * scale,
        format!("t = {}", fmt_f64(t)),
    ));
    let dirs = if d.stability_dirs > 0 { d.stability_dirs } else { 50 };
    let margin = check_stability(&problem, &state, t, dirs, cfg.seed.wrapping_add(step as u64));
    let floor = -(d.stability_tol + cfg.solver.delta * partition.tau());
    checks.push(CheckResult::new(
        "stability",
        margin,
        format!(">= {}", fmt_f64(floor)),
        margin >= floor,
        format!("{dirs} directions"),
    ));
    let el = check_euler_lagrange(&problem, &state);
    let v = el.value(problem.alpha);
    checks.push(CheckResult::new(
        "euler-lagrange",
        v,
        format!("<= {}", fmt_f64(d.el_tol)),
        v <= d.el_tol,
        format!("u {} v {}", fmt_f64(el.u), fmt_f64(el.v)),
    ));
    ph.lap("diagnostics");
    let outcome = Outcome::from_checks(checks, dir.clone());
    finish(&dir, &outcome, &mut ph, "check_report.txt", "check.csv")?;
    Ok(outcome)
}

pub const DISSIPATION_HEADER: &str = "index,kind,dist_id,log_norm,one_segment,upper_bound,endpoint_error,growth_bound,ratio,in_compact,renormalized,budget_exhausted";

/// One row of the dissipation table.
#[derive(Debug, Clone)]
pub struct DissipationRow {
    pub kind: &'static str,
    pub f: SL3Matrix,
    /// The symmetric generator, for samples `exp(q)`.
    pub generator: Option<DeviatoricTensor>,
    pub dist_id: f64,
    pub log_norm: f64,
    pub one_segment: f64,
    pub bound: PathBound,
}

/// Sample matrices of the `dissipation` command: `exp(q)` with symmetric
/// deviatoric `q`, `exp(m)` with general trace-free `m`, then the given ones.
pub fn dissipation_samples(cfg: &RunConfig) -> Result<Vec<(&'static str, SL3Matrix, Option<DeviatoricTensor>)>> {
    let p = &cfg.dissipation;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for _ in 0..p.samples {
        let y = nalgebra::Vector5::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let r = p.radius * rng.random_range(0.0..1.0f64);
        let q = DeviatoricTensor::from_coords(&(r * y / y.norm()));
        out.push(("sym", SL3Matrix::exp_of(&q), Some(q)));
    }
    for _ in 0..p.samples {
        let mut m = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        m -= (m.trace() / 3.0) * Mat3::identity();
        m *= p.radius * rng.random_range(0.0..1.0f64) / m.norm();
        out.push(("general", SL3Matrix::new(mat_exp(&m))?, None));
    }
    for m in &p.matrices {
        out.push(("given", SL3Matrix::new(*m)?, None));
    }
    Ok(out)
}

pub fn dissipation_csv(rows: &[DissipationRow], r_k: f64, c_k: f64) -> String {
    let mut s = String::from(DISSIPATION_HEADER);
    s.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{},{},{},{}",
            r.kind,
            fmt_f64(r.dist_id),
            fmt_f64(r.log_norm),
            fmt_f64(r.one_segment),
            fmt_f64(r.bound.value),
            fmt_f64(r.bound.endpoint_error),
            fmt_f64(r_k * r.log_norm),
            fmt_f64(r.bound.value / r.dist_id),
            r.f.in_compact(c_k),
            r.f.renormalized(),
            r.bound.budget_exhausted
        );
    }
    s
}

/// Upper bounds on the dissipation distance from the identity, with the
/// growth and linear estimates checked on the symmetric samples.
pub fn dissipation(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<(Outcome, String)> {
    let dir = cfg.output_dir.clone();
    prepare_dir(&dir)?;
    let mut ph = Phases::new("dissipation", cfg);
    let d = cfg.dissipation_density()?;
    let plan = cfg.path_plan();
    let (_, r_k) = d.growth_constants();
    let samples = dissipation_samples(cfg)?;
    ph.lap("setup");
    log(&format!("dissipation: {} matrices, {} segments", samples.len(), plan.n_segments));

    let mut rows = Vec::with_capacity(samples.len());
    for (kind, f, generator) in samples {
        if f.renormalized() {
            log("warning: a given matrix was renormalized to unit determinant");
        }
        let log_norm = mat_log(f.matrix()).map_or(f64::NAN, |l| l.norm());
        let bound = d_upper(&d, &f, &plan)?;
        rows.push(DissipationRow {
            kind,
            f,
            generator,
            dist_id: (f.matrix() - Mat3::identity()).norm(),
            log_norm,
            one_segment: d_upper_one_segment(&d, &f),
            bound,
        });
    }
    ph.lap("bounds");

    let mut checks = Vec::new();
    let infeasible = rows.iter().filter(|r| !r.bound.feasible()).count();
    checks.push(CheckResult::new(
        "feasibility",
        infeasible as f64,
        "== 0".into(),
        infeasible == 0,
        format!("{} matrices", rows.len()),
    ));
    let excess = rows
        .iter()
        .filter_map(|r| r.generator.map(|q| r.bound.value - d.eval(&q)))
        .fold(f64::NEG_INFINITY, f64::max);
    if excess.is_finite() {
        checks.push(CheckResult::new(
            "subgroup-bound",
            excess,
            "<= 1e-6".into(),
            excess <= 1e-6,
            "max of bound - H_D(q) over exp(q) samples".into(),
        ));
    }
    let c7 = rows
        .iter()
        .filter(|r| r.dist_id > 0.0 && r.bound.feasible())
        .map(|r| r.bound.value / r.dist_id)
        .fold(0.0, f64::max);
    checks.push(CheckResult::new(
        "linear-estimate",
        c7,
        "finite".into(),
        c7.is_finite(),
        "max of bound / |F - Id|".into(),
    ));
    let table = dissipation_csv(&rows, r_k, cfg.dissipation.c_k);
    io::write_output(&dir, "dissipation.csv", &table, &mut ph.manifest)?;
    let outcome = Outcome::from_checks(checks, dir.clone());
    finish(&dir, &outcome, &mut ph, "dissipation_report.txt", "dissipation_checks.csv")?;
    Ok((outcome, table))
}
