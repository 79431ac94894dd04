//! Run configuration: a line-based `key = value` format with `[section]`
//! headers and `#` comments. Every key is optional; unknown keys are errors.
//!
//! ```text
//! [grid]
//! nx = 8
//! gamma_d = left, right
//!
//! [model]
//! alpha = vonkarman
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::{Matrix6, Vector5};

use crate::error::{ConfigError, Error, Result};
use crate::evolution::{PlateProblem, SolverTolerances, TimePartition};
use crate::forms::{DissipationDensity, DissipationMode, Gauge, HardeningForm, IsotropicElasticity};
use crate::local::LocalProblem;
use crate::plate::{
    Alpha, BoundaryTrajectory, Edge, EdgeSet, Grid, LoadFamily, Polynomial, ProfileKind, Reparam,
    TimeProfile,
};
use crate::sl3::PathPlan;
use crate::tensor::Mat3;

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub gamma_d: EdgeSet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DissipationChoice {
    Frobenius,
    CrossPolytope,
    Gauge(Vec<Vector5<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialConfig {
    pub lam: f64,
    pub mu: f64,
    /// Isotropic hardening modulus, ignored when `hardening_matrix` is set.
    pub k: f64,
    pub hardening_matrix: Option<Matrix6<f64>>,
    pub sigma_y: f64,
    pub dissipation: DissipationChoice,
    pub local_tol: f64,
    pub local_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadingConfig {
    pub family: LoadFamily,
    /// Coefficient of the stretch and bend families.
    pub amplitude: f64,
    /// Shapes of the mixed-poly family.
    pub u1: Polynomial,
    pub u2: Polynomial,
    pub v: Polynomial,
    pub profile: ProfileKind,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeConfig {
    Uniform(usize),
    Knots(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotChoice {
    None,
    Last,
    All,
    Steps(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    /// Random directions per knot; 0 disables the stability check.
    pub stability_dirs: usize,
    /// Smallest accepted stability margin is `-stability_tol`.
    pub stability_tol: f64,
    pub el_check: bool,
    pub el_tol: f64,
    pub energy_balance: bool,
    /// Smallest accepted balance residual is `-balance_tol`.
    pub balance_tol: f64,
    /// Constant `C` in the bound `δ·T + C·τ`; estimated from a coarser
    /// partition when absent.
    pub balance_c: Option<f64>,
    pub rate_independence: Option<Reparam>,
    pub lipschitz: bool,
    pub snapshots: SnapshotChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    /// Stored snapshot to diagnose; the last knot when absent.
    pub step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationConfig {
    pub segments: usize,
    pub max_evals: usize,
    pub restarts: usize,
    pub penalty: f64,
    /// Random samples `exp(q)` and `exp(m)` with `|q|, |m| ≤ radius`.
    pub samples: usize,
    pub radius: f64,
    /// Membership constant of the compact set, `|F| + |F⁻¹| ≤ c_k`.
    pub c_k: f64,
    /// Explicit matrices, row-major.
    pub matrices: Vec<Mat3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub alpha: Alpha,
    pub material: MaterialConfig,
    pub loading: LoadingConfig,
    pub time: TimeConfig,
    pub solver: SolverTolerances,
    pub diagnostics: DiagnosticsConfig,
    pub check: CheckConfig,
    pub dissipation: DissipationConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridConfig {
                lx: 1.0,
                ly: 1.0,
                nx: 8,
                ny: 8,
                nz: 4,
                gamma_d: EdgeSet::new(&[Edge::Left, Edge::Right]).expect("nonempty"),
            },
            alpha: Alpha::Linear,
            material: MaterialConfig {
                lam: 1.0,
                mu: 1.0,
                k: 0.5,
                hardening_matrix: None,
                sigma_y: 0.05,
                dissipation: DissipationChoice::Frobenius,
                local_tol: 1e-10,
                local_max_iter: 10_000,
            },
            loading: LoadingConfig {
                family: LoadFamily::Bend,
                amplitude: 0.1,
                u1: Polynomial::zero(),
                u2: Polynomial::zero(),
                v: Polynomial::zero(),
                profile: ProfileKind::Linear,
                horizon: 1.0,
            },
            time: TimeConfig::Uniform(10),
            solver: SolverTolerances::default(),
            diagnostics: DiagnosticsConfig {
                stability_dirs: 50,
                stability_tol: 1e-7,
                el_check: true,
                el_tol: 1e-8,
                energy_balance: true,
                balance_tol: 1e-8,
                balance_c: None,
                rate_independence: None,
                lipschitz: false,
                snapshots: SnapshotChoice::Last,
            },
            check: CheckConfig { step: None },
            dissipation: DissipationConfig {
                segments: 4,
                max_evals: 40_000,
                restarts: 8,
                penalty: 1.0,
                samples: 20,
                radius: 0.3,
                c_k: 10.0,
                matrices: Vec::new(),
            },
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn build_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.lx, g.ly, g.nx, g.ny, g.nz, g.gamma_d)
    }

    pub fn dissipation_density(&self) -> Result<DissipationDensity> {
        let mode = match &self.material.dissipation {
            DissipationChoice::Frobenius => DissipationMode::Frobenius,
            DissipationChoice::CrossPolytope => DissipationMode::Gauge(Gauge::cross_polytope()),
            DissipationChoice::Gauge(dirs) => DissipationMode::Gauge(Gauge::new(dirs.clone())?),
        };
        DissipationDensity::new(self.material.sigma_y, mode)
    }

    pub fn local_problem(&self) -> Result<LocalProblem> {
        let m = &self.material;
        let hardening = match &m.hardening_matrix {
            Some(b) => HardeningForm::tensor(*b)?,
            None => HardeningForm::isotropic(m.k)?,
        };
        LocalProblem::with_tolerance(
            IsotropicElasticity::new(m.lam, m.mu)?,
            hardening,
            self.dissipation_density()?,
            m.local_tol,
            m.local_max_iter,
        )
    }

    pub fn trajectory(&self) -> Result<BoundaryTrajectory> {
        let l = &self.loading;
        let profile = TimeProfile::new(l.profile.clone(), l.horizon)?;
        Ok(match l.family {
            LoadFamily::Stretch => BoundaryTrajectory::stretch(l.amplitude, profile),
            LoadFamily::Bend => BoundaryTrajectory::bend(l.amplitude, profile),
            LoadFamily::MixedPoly => {
                BoundaryTrajectory::mixed(l.u1.clone(), l.u2.clone(), l.v.clone(), profile)
            }
        })
    }

    pub fn problem(&self) -> Result<PlateProblem> {
        PlateProblem::new(
            self.build_grid()?,
            self.alpha,
            self.local_problem()?,
            self.trajectory()?,
            self.solver,
        )
    }

    pub fn partition(&self) -> Result<TimePartition> {
        match &self.time {
            TimeConfig::Uniform(n) => TimePartition::uniform(self.loading.horizon, *n),
            TimeConfig::Knots(k) => TimePartition::new(k.clone()),
        }
    }

    pub fn path_plan(&self) -> PathPlan {
        let d = &self.dissipation;
        PathPlan {
            n_segments: d.segments,
            max_evals: d.max_evals,
            penalty: d.penalty,
            restarts: d.restarts,
            seed: self.seed,
        }
    }

    /// Admissible but noteworthy choices.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.grid.gamma_d.is_simple_arc() {
            out.push(format!(
                "gamma_d = {} is not a single boundary arc with two endpoints",
                self.grid.gamma_d.to_config_string()
            ));
        }
        out
    }

    /// Text that parses back to an equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "[grid]");
        let _ = writeln!(s, "lx = {:?}", g.lx);
        let _ = writeln!(s, "ly = {:?}", g.ly);
        let _ = writeln!(s, "nx = {}", g.nx);
        let _ = writeln!(s, "ny = {}", g.ny);
        let _ = writeln!(s, "nz = {}", g.nz);
        let _ = writeln!(s, "gamma_d = {}", g.gamma_d.to_config_string());

        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "alpha = {}", self.alpha.name());

        let m = &self.material;
        let _ = writeln!(s, "\n[material]");
        let _ = writeln!(s, "lam = {:?}", m.lam);
        let _ = writeln!(s, "mu = {:?}", m.mu);
        let _ = writeln!(s, "k = {:?}", m.k);
        if let Some(b) = &m.hardening_matrix {
            let _ = writeln!(s, "hardening_matrix = {}", join_f64(b.transpose().as_slice()));
        }
        let _ = writeln!(s, "sigma_y = {:?}", m.sigma_y);
        match &m.dissipation {
            DissipationChoice::Frobenius => {
                let _ = writeln!(s, "dissipation = frobenius");
            }
            DissipationChoice::CrossPolytope => {
                let _ = writeln!(s, "dissipation = cross-polytope");
            }
            DissipationChoice::Gauge(dirs) => {
                let _ = writeln!(s, "dissipation = gauge");
                let groups: Vec<String> = dirs.iter().map(|d| join_f64(d.as_slice())).collect();
                let _ = writeln!(s, "gauge_directions = {}", groups.join("; "));
            }
        }
        let _ = writeln!(s, "local_tol = {:?}", m.local_tol);
        let _ = writeln!(s, "local_max_iter = {}", m.local_max_iter);

        let l = &self.loading;
        let _ = writeln!(s, "\n[loading]");
        let _ = writeln!(s, "family = {}", l.family.name());
        match l.family {
            LoadFamily::MixedPoly => {
                let _ = writeln!(s, "u1 = {}", l.u1);
                let _ = writeln!(s, "u2 = {}", l.u2);
                let _ = writeln!(s, "v = {}", l.v);
            }
            _ => {
                let _ = writeln!(s, "amplitude = {:?}", l.amplitude);
            }
        }
        match &l.profile {
            ProfileKind::Linear => {
                let _ = writeln!(s, "profile = linear");
            }
            ProfileKind::RampHold { t_ramp } => {
                let _ = writeln!(s, "profile = ramp-hold");
                let _ = writeln!(s, "t_ramp = {t_ramp:?}");
            }
            ProfileKind::Piecewise { points } => {
                let _ = writeln!(s, "profile = piecewise");
                let pts: Vec<String> = points.iter().map(|(t, v)| format!("{t:?}:{v:?}")).collect();
                let _ = writeln!(s, "breakpoints = {}", pts.join(", "));
            }
        }
        let _ = writeln!(s, "horizon = {:?}", l.horizon);

        let _ = writeln!(s, "\n[time]");
        match &self.time {
            TimeConfig::Uniform(n) => {
                let _ = writeln!(s, "steps = {n}");
            }
            TimeConfig::Knots(k) => {
                let _ = writeln!(s, "knots = {}", join_f64(k));
            }
        }

        let t = &self.solver;
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "delta = {:?}", t.delta);
        let _ = writeln!(s, "alt_tol = {:?}", t.alt_tol);
        let _ = writeln!(s, "alt_max = {}", t.alt_max);
        let _ = writeln!(s, "newton_tol = {:?}", t.newton_tol);
        let _ = writeln!(s, "newton_max = {}", t.newton_max);

        let d = &self.diagnostics;
        let _ = writeln!(s, "\n[diagnostics]");
        let _ = writeln!(s, "stability_dirs = {}", d.stability_dirs);
        let _ = writeln!(s, "stability_tol = {:?}", d.stability_tol);
        let _ = writeln!(s, "el_check = {}", d.el_check);
        let _ = writeln!(s, "el_tol = {:?}", d.el_tol);
        let _ = writeln!(s, "energy_balance = {}", d.energy_balance);
        let _ = writeln!(s, "balance_tol = {:?}", d.balance_tol);
        match d.balance_c {
            Some(c) => {
                let _ = writeln!(s, "balance_c = {c:?}");
            }
            None => {
                let _ = writeln!(s, "balance_c = auto");
            }
        }
        let _ = writeln!(
            s,
            "rate_independence = {}",
            d.rate_independence.map_or("none", |r| r.name())
        );
        let _ = writeln!(s, "lipschitz = {}", d.lipschitz);
        let snaps = match &d.snapshots {
            SnapshotChoice::None => "none".to_string(),
            SnapshotChoice::Last => "last".to_string(),
            SnapshotChoice::All => "all".to_string(),
            SnapshotChoice::Steps(v) => v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", "),
        };
        let _ = writeln!(s, "snapshots = {snaps}");

        if let Some(step) = self.check.step {
            let _ = writeln!(s, "\n[check]");
            let _ = writeln!(s, "step = {step}");
        }

        let p = &self.dissipation;
        let _ = writeln!(s, "\n[dissipation]");
        let _ = writeln!(s, "segments = {}", p.segments);
        let _ = writeln!(s, "max_evals = {}", p.max_evals);
        let _ = writeln!(s, "restarts = {}", p.restarts);
        let _ = writeln!(s, "penalty = {:?}", p.penalty);
        let _ = writeln!(s, "samples = {}", p.samples);
        let _ = writeln!(s, "radius = {:?}", p.radius);
        let _ = writeln!(s, "c_k = {:?}", p.c_k);
        if !p.matrices.is_empty() {
            let groups: Vec<String> = p
                .matrices
                .iter()
                .map(|m| join_f64(m.transpose().as_slice()))
                .collect();
            let _ = writeln!(s, "matrices = {}", groups.join("; "));
        }

        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.output_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

const SECTIONS: [&str; 10] = [
    "grid",
    "model",
    "material",
    "loading",
    "time",
    "solver",
    "diagnostics",
    "check",
    "dissipation",
    "output",
];

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

/// Typed access to the raw entries, collecting located errors.
struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn new(text: &str) -> Self {
        let mut r = Reader {
            entries: BTreeMap::new(),
            errors: Vec::new(),
        };
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    r.error(line, content, "unterminated section header");
                    continue;
                };
                let name = name.trim();
                if SECTIONS.contains(&name) {
                    section = Some(name.to_string());
                } else {
                    r.error(line, name, "unknown section");
                    section = None;
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                r.error(line, content, "expected `key = value`");
                continue;
            };
            let key = key.trim();
            let Some(sec) = &section else {
                r.error(line, key, "key outside of a known section");
                continue;
            };
            let id = (sec.clone(), key.to_string());
            if let Some(prev) = r.entries.get(&id) {
                let reason = format!("duplicate key (first set on line {})", prev.line);
                r.error(line, &format!("{sec}.{key}"), &reason);
                continue;
            }
            r.entries.insert(
                id,
                Entry {
                    line,
                    value: value.trim().to_string(),
                    used: false,
                },
            );
        }
        r
    }

    fn error(&mut self, line: usize, key: &str, reason: &str) {
        self.errors.push(ConfigError {
            line,
            key: key.to_string(),
            reason: reason.to_string(),
        });
    }

    /// Raw value with its line, marking the key as known.
    fn raw(&mut self, sec: &str, key: &str) -> Option<(usize, String)> {
        let e = self.entries.get_mut(&(sec.to_string(), key.to_string()))?;
        e.used = true;
        Some((e.line, e.value.clone()))
    }

    fn line_of(&self, sec: &str, key: &str) -> usize {
        self.entries
            .get(&(sec.to_string(), key.to_string()))
            .map_or(0, |e| e.line)
    }

    fn get<T>(&mut self, sec: &str, key: &str, default: T, parse: impl Fn(&str) -> std::result::Result<T, String>) -> T {
        match self.raw(sec, key) {
            None => default,
            Some((line, v)) => match parse(&v) {
                Ok(x) => x,
                Err(reason) => {
                    self.error(line, &format!("{sec}.{key}"), &reason);
                    default
                }
            },
        }
    }

    fn f64(&mut self, sec: &str, key: &str, default: f64) -> f64 {
        self.get(sec, key, default, parse_f64)
    }

    fn usize(&mut self, sec: &str, key: &str, default: usize) -> usize {
        self.get(sec, key, default, parse_usize)
    }

    fn bool(&mut self, sec: &str, key: &str, default: bool) -> bool {
        self.get(sec, key, default, |s| match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected true or false, got `{s}`")),
        })
    }

    /// Records a range violation against the key's line.
    fn require(&mut self, ok: bool, sec: &str, key: &str, reason: &str) {
        if !ok {
            let line = self.line_of(sec, key);
            self.error(line, &format!("{sec}.{key}"), reason);
        }
    }

    fn finish(mut self) -> Vec<ConfigError> {
        for ((sec, key), e) in &self.entries {
            if !e.used {
                self.errors.push(ConfigError {
                    line: e.line,
                    key: format!("{sec}.{key}"),
                    reason: "unknown key".into(),
                });
            }
        }
        self.errors.sort_by_key(|e| e.line);
        self.errors
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("expected a number, got `{s}`"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got `{s}`"))
    }
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split([',', ' '])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_f64)
        .collect()
}

fn parse_groups(s: &str, width: usize) -> std::result::Result<Vec<Vec<f64>>, String> {
    s.split(';')
        .map(|g| {
            let v = parse_list(g)?;
            if v.len() == width {
                Ok(v)
            } else {
                Err(format!("expected groups of {width} numbers, got {}", v.len()))
            }
        })
        .collect()
}

fn parse_edges(s: &str) -> std::result::Result<EdgeSet, String> {
    let edges = s
        .split(',')
        .map(|t| Edge::parse(t.trim()).ok_or_else(|| format!("unknown edge `{}`", t.trim())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    EdgeSet::new(&edges).map_err(|e| e.to_string())
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut r = Reader::new(text);
    let def = RunConfig::default();

    let grid = GridConfig {
        lx: r.f64("grid", "lx", def.grid.lx),
        ly: r.f64("grid", "ly", def.grid.ly),
        nx: r.usize("grid", "nx", def.grid.nx),
        ny: r.usize("grid", "ny", def.grid.ny),
        nz: r.usize("grid", "nz", def.grid.nz),
        gamma_d: r.get("grid", "gamma_d", def.grid.gamma_d, parse_edges),
    };
    r.require(grid.lx > 0.0, "grid", "lx", "lx must be > 0");
    r.require(grid.ly > 0.0, "grid", "ly", "ly must be > 0");
    r.require(grid.nx >= 4, "grid", "nx", "nx must be >= 4");
    r.require(grid.ny >= 4, "grid", "ny", "ny must be >= 4");
    r.require(grid.nz >= 2, "grid", "nz", "nz must be >= 2");

    let alpha = r.get("model", "alpha", def.alpha, |s| {
        Alpha::parse(s).ok_or_else(|| format!("expected linear or vonkarman, got `{s}`"))
    });

    let dm = &def.material;
    let dissipation_kind = r.get("material", "dissipation", "frobenius".to_string(), |s| match s {
        "frobenius" | "cross-polytope" | "gauge" => Ok(s.to_string()),
        _ => Err(format!("expected frobenius, cross-polytope or gauge, got `{s}`")),
    });
    let directions = r.get("material", "gauge_directions", None, |s| parse_groups(s, 5).map(Some));
    let dissipation = match (dissipation_kind.as_str(), directions) {
        ("gauge", Some(g)) => DissipationChoice::Gauge(g.iter().map(|v| Vector5::from_column_slice(v)).collect()),
        ("gauge", None) => {
            r.require(false, "material", "dissipation", "gauge needs gauge_directions");
            DissipationChoice::Frobenius
        }
        (kind, dirs) => {
            r.require(dirs.is_none(), "material", "gauge_directions", "only valid with dissipation = gauge");
            if kind == "cross-polytope" {
                DissipationChoice::CrossPolytope
            } else {
                DissipationChoice::Frobenius
            }
        }
    };
    let material = MaterialConfig {
        lam: r.f64("material", "lam", dm.lam),
        mu: r.f64("material", "mu", dm.mu),
        k: r.f64("material", "k", dm.k),
        hardening_matrix: r.get("material", "hardening_matrix", None, |s| {
            let v = parse_list(s)?;
            if v.len() != 36 {
                return Err(format!("expected 36 numbers, got {}", v.len()));
            }
            Ok(Some(Matrix6::from_row_slice(&v)))
        }),
        sigma_y: r.f64("material", "sigma_y", dm.sigma_y),
        dissipation,
        local_tol: r.f64("material", "local_tol", dm.local_tol),
        local_max_iter: r.usize("material", "local_max_iter", dm.local_max_iter),
    };
    r.require(material.lam > 0.0, "material", "lam", "lam must be > 0");
    r.require(material.mu > 0.0, "material", "mu", "mu must be > 0");
    r.require(material.k > 0.0, "material", "k", "k must be > 0");
    r.require(material.sigma_y > 0.0, "material", "sigma_y", "sigma_y must be > 0");
    r.require(material.local_tol > 0.0, "material", "local_tol", "local_tol must be > 0");
    r.require(material.local_max_iter >= 1, "material", "local_max_iter", "local_max_iter must be >= 1");
    if let Some(b) = &material.hardening_matrix {
        if let Err(e) = HardeningForm::tensor(*b) {
            r.require(false, "material", "hardening_matrix", &e.to_string());
        }
    }
    if let DissipationChoice::Gauge(dirs) = &material.dissipation {
        if let Err(e) = Gauge::new(dirs.clone()) {
            r.require(false, "material", "gauge_directions", &e.to_string());
        }
    }

    let dl = &def.loading;
    let family = r.get("loading", "family", dl.family, |s| {
        LoadFamily::parse(s).ok_or_else(|| format!("expected stretch, bend or mixed-poly, got `{s}`"))
    });
    let amplitude = r.f64("loading", "amplitude", dl.amplitude);
    let poly = |s: &str| Polynomial::parse(s);
    let u1 = r.get("loading", "u1", Polynomial::zero(), poly);
    let u2 = r.get("loading", "u2", Polynomial::zero(), poly);
    let v = r.get("loading", "v", Polynomial::zero(), poly);
    let mixed = family == LoadFamily::MixedPoly;
    for key in ["u1", "u2", "v"] {
        let set = r.line_of("loading", key) > 0;
        r.require(!set || mixed, "loading", key, "only valid with family = mixed-poly");
    }
    let amp_set = r.line_of("loading", "amplitude") > 0;
    r.require(!amp_set || !mixed, "loading", "amplitude", "not used by family = mixed-poly");
    let horizon = r.f64("loading", "horizon", dl.horizon);
    r.require(horizon > 0.0, "loading", "horizon", "horizon must be > 0");
    let profile_name = r.get("loading", "profile", "linear".to_string(), |s| match s {
        "linear" | "ramp-hold" | "piecewise" => Ok(s.to_string()),
        _ => Err(format!("expected linear, ramp-hold or piecewise, got `{s}`")),
    });
    let t_ramp = r.get("loading", "t_ramp", None, |s| parse_f64(s).map(Some));
    let breakpoints = r.get("loading", "breakpoints", None, |s| {
        s.split(',')
            .map(|pair| {
                let (t, v) = pair
                    .split_once(':')
                    .ok_or_else(|| format!("expected `t:s` pairs, got `{}`", pair.trim()))?;
                Ok((parse_f64(t.trim())?, parse_f64(v.trim())?))
            })
            .collect::<std::result::Result<Vec<_>, String>>()
            .map(Some)
    });
    r.require(
        t_ramp.is_none() || profile_name == "ramp-hold",
        "loading",
        "t_ramp",
        "only valid with profile = ramp-hold",
    );
    r.require(
        breakpoints.is_none() || profile_name == "piecewise",
        "loading",
        "breakpoints",
        "only valid with profile = piecewise",
    );
    let profile = match profile_name.as_str() {
        "ramp-hold" => ProfileKind::RampHold {
            t_ramp: t_ramp.unwrap_or(0.5 * horizon),
        },
        "piecewise" => {
            r.require(breakpoints.is_some(), "loading", "profile", "piecewise needs breakpoints");
            ProfileKind::Piecewise {
                points: breakpoints.unwrap_or_else(|| vec![(0.0, 0.0), (horizon, 1.0)]),
            }
        }
        _ => ProfileKind::Linear,
    };
    if horizon > 0.0 {
        if let Err(e) = TimeProfile::new(profile.clone(), horizon) {
            let key = if profile_name == "piecewise" { "breakpoints" } else { "t_ramp" };
            r.require(false, "loading", key, &e.to_string());
        }
    }
    let loading = LoadingConfig {
        family,
        amplitude,
        u1,
        u2,
        v,
        profile,
        horizon,
    };

    let steps = r.get("time", "steps", None, |s| parse_usize(s).map(Some));
    let knots = r.get("time", "knots", None, |s| parse_list(s).map(Some));
    let time = match (steps, knots) {
        (Some(_), Some(k)) => {
            r.require(false, "time", "knots", "steps and knots are mutually exclusive");
            TimeConfig::Knots(k)
        }
        (None, Some(k)) => TimeConfig::Knots(k),
        (Some(n), None) => TimeConfig::Uniform(n),
        (None, None) => def.time.clone(),
    };
    match &time {
        TimeConfig::Uniform(n) => r.require(*n >= 1, "time", "steps", "steps must be >= 1"),
        TimeConfig::Knots(k) => {
            if let Err(e) = TimePartition::new(k.clone()) {
                r.require(false, "time", "knots", &e.to_string());
            }
            r.require(
                k.last() == Some(&horizon),
                "time",
                "knots",
                "the last knot must equal loading.horizon",
            );
        }
    }

    let ds = &def.solver;
    let solver = SolverTolerances {
        delta: r.f64("solver", "delta", ds.delta),
        alt_tol: r.f64("solver", "alt_tol", ds.alt_tol),
        alt_max: r.usize("solver", "alt_max", ds.alt_max),
        newton_tol: r.f64("solver", "newton_tol", ds.newton_tol),
        newton_max: r.usize("solver", "newton_max", ds.newton_max),
    };
    r.require(solver.delta >= 0.0, "solver", "delta", "delta must be >= 0");
    r.require(solver.alt_tol > 0.0, "solver", "alt_tol", "alt_tol must be > 0");
    r.require(solver.alt_max >= 1, "solver", "alt_max", "alt_max must be >= 1");
    r.require(solver.newton_tol > 0.0, "solver", "newton_tol", "newton_tol must be > 0");
    r.require(solver.newton_max >= 1, "solver", "newton_max", "newton_max must be >= 1");

    let dd = &def.diagnostics;
    let diagnostics = DiagnosticsConfig {
        stability_dirs: r.usize("diagnostics", "stability_dirs", dd.stability_dirs),
        stability_tol: r.f64("diagnostics", "stability_tol", dd.stability_tol),
        el_check: r.bool("diagnostics", "el_check", dd.el_check),
        el_tol: r.f64("diagnostics", "el_tol", dd.el_tol),
        energy_balance: r.bool("diagnostics", "energy_balance", dd.energy_balance),
        balance_tol: r.f64("diagnostics", "balance_tol", dd.balance_tol),
        balance_c: r.get("diagnostics", "balance_c", dd.balance_c, |s| match s {
            "auto" => Ok(None),
            _ => parse_f64(s).map(Some),
        }),
        rate_independence: r.get("diagnostics", "rate_independence", dd.rate_independence, |s| match s {
            "none" => Ok(None),
            _ => Reparam::parse(s)
                .map(Some)
                .ok_or_else(|| format!("expected none, square or smoothstep, got `{s}`")),
        }),
        lipschitz: r.bool("diagnostics", "lipschitz", dd.lipschitz),
        snapshots: r.get("diagnostics", "snapshots", dd.snapshots.clone(), |s| match s {
            "none" => Ok(SnapshotChoice::None),
            "last" => Ok(SnapshotChoice::Last),
            "all" => Ok(SnapshotChoice::All),
            _ => s
                .split(',')
                .map(|t| parse_usize(t.trim()))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(SnapshotChoice::Steps),
        }),
    };
    r.require(diagnostics.stability_tol >= 0.0, "diagnostics", "stability_tol", "stability_tol must be >= 0");
    r.require(diagnostics.el_tol > 0.0, "diagnostics", "el_tol", "el_tol must be > 0");
    r.require(diagnostics.balance_tol >= 0.0, "diagnostics", "balance_tol", "balance_tol must be >= 0");
    r.require(
        diagnostics.balance_c.is_none_or(|c| c >= 0.0),
        "diagnostics",
        "balance_c",
        "balance_c must be >= 0",
    );
    let n_steps = match &time {
        TimeConfig::Uniform(n) => *n,
        TimeConfig::Knots(k) => k.len().saturating_sub(1),
    };
    if let SnapshotChoice::Steps(v) = &diagnostics.snapshots {
        r.require(
            v.iter().all(|&i| i <= n_steps),
            "diagnostics",
            "snapshots",
            &format!("snapshot steps must be <= {n_steps}"),
        );
    }

    let check = CheckConfig {
        step: r.get("check", "step", None, |s| parse_usize(s).map(Some)),
    };
    r.require(
        check.step.is_none_or(|s| s <= n_steps),
        "check",
        "step",
        &format!("step must be <= {n_steps}"),
    );

    let dp = &def.dissipation;
    let dissipation = DissipationConfig {
        segments: r.usize("dissipation", "segments", dp.segments),
        max_evals: r.usize("dissipation", "max_evals", dp.max_evals),
        restarts: r.usize("dissipation", "restarts", dp.restarts),
        penalty: r.f64("dissipation", "penalty", dp.penalty),
        samples: r.usize("dissipation", "samples", dp.samples),
        radius: r.f64("dissipation", "radius", dp.radius),
        c_k: r.f64("dissipation", "c_k", dp.c_k),
        matrices: r.get("dissipation", "matrices", Vec::new(), |s| {
            Ok(parse_groups(s, 9)?.iter().map(|v| Mat3::from_row_slice(v)).collect())
        }),
    };
    r.require(dissipation.segments >= 1, "dissipation", "segments", "segments must be >= 1");
    r.require(dissipation.max_evals >= 1, "dissipation", "max_evals", "max_evals must be >= 1");
    r.require(dissipation.penalty > 0.0, "dissipation", "penalty", "penalty must be > 0");
    r.require(
        dissipation.radius > 0.0 && dissipation.radius < 1.0,
        "dissipation",
        "radius",
        "radius must lie in (0, 1)",
    );
    r.require(dissipation.c_k > 0.0, "dissipation", "c_k", "c_k must be > 0");
    r.require(
        dissipation.matrices.iter().all(|m| m.determinant() > 0.0),
        "dissipation",
        "matrices",
        "matrices must have positive determinant",
    );

    let output_dir = r.get("output", "dir", def.output_dir.clone(), |s| {
        if s.is_empty() {
            Err("dir must not be empty".into())
        } else {
            Ok(PathBuf::from(s))
        }
    });
    if output_dir.is_file() {
        r.require(false, "output", "dir", "dir names an existing file");
    }
    let seed = r.get("output", "seed", def.seed, |s| {
        s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
    });

    let errors = r.finish();
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    Ok(RunConfig {
        grid,
        alpha,
        material,
        loading,
        time,
        solver,
        diagnostics,
        check,
        dissipation,
        output_dir,
        seed,
    })
}
