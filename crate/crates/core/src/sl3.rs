//! Dissipation distance on SL(3) for multiplicative plasticity.
//!
//! `D(Id, F)` is the infimum of `∫H(ċc⁻¹)` over paths from `Id` to `F`. It is
//! bounded from above by restricting to piecewise one-parameter subgroups
//! `c = exp(q_n)···exp(q_1)` with symmetric deviatoric `q_k`, whose cost is
//! exactly `Σ H_D(q_k)`. The endpoint constraint is enforced by a quadratic
//! penalty with continuation, followed by a Gauss–Newton feasibility polish.

use std::ops::Mul;

use nalgebra::{DMatrix, DVector, Matrix6, SymmetricEigen, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::DissipationDensity;
use crate::tensor::{DeviatoricTensor, Mat3};

type V5 = Vector5<f64>;

/// Largest determinant defect accepted without renormalization.
pub const DET_TOL: f64 = 1e-10;
/// Endpoint error below which a path counts as feasible.
pub const ENDPOINT_TOL: f64 = 1e-8;
/// Tolerance for a logarithm to count as symmetric and trace free.
pub const ADMISSIBLE_TOL: f64 = 1e-8;

/// A 3×3 matrix with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SL3Matrix {
    m: Mat3,
    renormalized: bool,
}

impl SL3Matrix {
    /// Accepts `m` with `|det m − 1| ≤ DET_TOL`; other positive determinants
    /// are renormalized by `det^(1/3)` and flagged.
    pub fn new(m: Mat3) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        let det = m.determinant();
        if !(det > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "determinant must be positive, got {det:e}"
            )));
        }
        if (det - 1.0).abs() <= DET_TOL {
            return Ok(SL3Matrix { m, renormalized: false });
        }
        Ok(SL3Matrix {
            m: m / det.cbrt(),
            renormalized: true,
        })
    }

    pub fn identity() -> Self {
        SL3Matrix {
            m: Mat3::identity(),
            renormalized: false,
        }
    }

    /// `exp(q)` for a deviatoric `q`; unit determinant by Jacobi's formula.
    pub fn exp_of(q: &DeviatoricTensor) -> Self {
        SL3Matrix {
            m: mat_exp(&q.to_mat()),
            renormalized: false,
        }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    /// Whether construction had to rescale the input.
    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn inverse(&self) -> Self {
        // the adjugate of a unimodular matrix is its inverse
        let inv = self.m.try_inverse().expect("unit determinant");
        SL3Matrix {
            m: inv,
            renormalized: false,
        }
    }

    /// `|F| + |F⁻¹|`, the quantity bounded by `c_k` on the compact set `K`.
    pub fn compact_measure(&self) -> f64 {
        self.m.norm() + self.inverse().m.norm()
    }

    pub fn in_compact(&self, c_k: f64) -> bool {
        self.compact_measure() <= c_k
    }
}

impl Mul for SL3Matrix {
    type Output = SL3Matrix;

    fn mul(self, o: SL3Matrix) -> SL3Matrix {
        SL3Matrix {
            m: self.m * o.m,
            renormalized: false,
        }
    }
}

pub fn mat_exp(q: &Mat3) -> Mat3 {
    q.exp()
}

/// Principal logarithm for `|F − Id| < 1`, by repeated square roots
/// (Denman–Beavers) and the series `log X = 2 Σ z^(2j+1)/(2j+1)`,
/// `z = (X − I)(X + I)⁻¹`.
pub fn mat_log(f: &Mat3) -> Result<Mat3> {
    let id = Mat3::identity();
    let dist = (f - id).norm();
    if !(dist < 1.0) {
        return Err(Error::LogOutOfDomain(dist));
    }
    let mut x = *f;
    let mut halvings = 0;
    while (x - id).norm() > 0.05 {
        x = sqrt_denman_beavers(&x);
        halvings += 1;
    }
    let z = (x - id) * (x + id).try_inverse().ok_or(Error::LogOutOfDomain(dist))?;
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for j in 1..60 {
        term *= z2;
        let add = term / (2 * j + 1) as f64;
        sum += add;
        if add.norm() <= 1e-18 * sum.norm() {
            break;
        }
    }
    Ok(sum * 2f64.powi(halvings + 1))
}

fn sqrt_denman_beavers(a: &Mat3) -> Mat3 {
    let mut y = *a;
    let mut z = Mat3::identity();
    for _ in 0..60 {
        let (Some(yi), Some(zi)) = (y.try_inverse(), z.try_inverse()) else {
            break;
        };
        let y_next = 0.5 * (y + zi);
        z = 0.5 * (z + yi);
        let change = (y_next - y).norm();
        y = y_next;
        if change <= 1e-16 * y.norm() {
            break;
        }
    }
    y
}

/// The deviatoric tensor represented by `m`, if `m` is symmetric and trace free.
fn admissible(m: &Mat3) -> Option<DeviatoricTensor> {
    let skew = 0.5 * (m - m.transpose());
    if skew.norm() > ADMISSIBLE_TOL || m.trace().abs() > ADMISSIBLE_TOL {
        return None;
    }
    let s = 0.5 * (m + m.transpose());
    Some(DeviatoricTensor::new(s[(0, 0)], s[(1, 1)], s[(0, 1)], s[(0, 2)], s[(1, 2)]))
}

/// Cost of the single subgroup `exp(t log F)`, or `+∞` when `log F` is not
/// symmetric deviatoric (or does not exist on the principal branch).
pub fn d_upper_one_segment(d: &DissipationDensity, f: &SL3Matrix) -> f64 {
    match mat_log(&f.m).ok().as_ref().and_then(admissible) {
        Some(q) => d.eval(&q),
        None => f64::INFINITY,
    }
}

/// Discretization and budget of the path optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    pub n_segments: usize,
    /// Function evaluations shared by all starts.
    pub max_evals: usize,
    /// Initial penalty weight, relative to `σ_y`.
    pub penalty: f64,
    /// Random starts in addition to the deterministic one.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PathPlan {
    fn default() -> Self {
        PathPlan {
            n_segments: 4,
            max_evals: 40_000,
            penalty: 1.0,
            restarts: 8,
            seed: 0,
        }
    }
}

impl PathPlan {
    pub fn with_segments(n_segments: usize) -> Self {
        PathPlan {
            n_segments,
            ..PathPlan::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::InvalidParameter("n_segments must be >= 1".into()));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidParameter("max_evals must be >= 1".into()));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(Error::InvalidParameter("penalty must be > 0".into()));
        }
        Ok(())
    }
}

/// Upper bound on `D(Id, F)` with the path that certifies it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBound {
    /// `Σ H_D(q_k)` of the best feasible path, `+∞` if none was found.
    pub value: f64,
    /// Increments `q_1, …, q_n`, applied right to left.
    pub segments: Vec<DeviatoricTensor>,
    /// `|exp(q_n)···exp(q_1) − F|`.
    pub endpoint_error: f64,
    pub budget_exhausted: bool,
    pub evals: usize,
}

impl PathBound {
    pub fn feasible(&self) -> bool {
        self.value.is_finite() && self.endpoint_error <= ENDPOINT_TOL
    }

    fn infeasible() -> Self {
        PathBound {
            value: f64::INFINITY,
            segments: Vec::new(),
            endpoint_error: f64::INFINITY,
            budget_exhausted: false,
            evals: 0,
        }
    }

    /// The bound, or an error when the budget ran out before a feasible
    /// path was found.
    pub fn into_result(self) -> Result<Self> {
        if self.budget_exhausted && !self.feasible() {
            return Err(Error::OptimizerBudgetExceeded {
                best: self.value,
                endpoint_error: self.endpoint_error,
            });
        }
        Ok(self)
    }
}

/// Upper bound on `D(Id, F)` over paths of `plan.n_segments` subgroups.
pub fn d_upper(d: &DissipationDensity, f: &SL3Matrix, plan: &PathPlan) -> Result<PathBound> {
    plan.validate()?;
    let mut opt = PathOptimizer::new(d, f, plan);
    Ok(opt.solve(&[]))
}

/// Bounds for `1, 2, …, n_max` segments. Each level is warm-started from the
/// previous best path with its largest segment halved, so the sequence is
/// non-increasing.
pub fn d_upper_refinement(
    d: &DissipationDensity,
    f: &SL3Matrix,
    plan: &PathPlan,
    n_max: usize,
) -> Result<Vec<PathBound>> {
    plan.validate()?;
    let mut out: Vec<PathBound> = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let level = PathPlan {
            n_segments: n,
            ..plan.clone()
        };
        let mut opt = PathOptimizer::new(d, f, &level);
        let warm: Vec<Vec<V5>> = match out.last() {
            Some(prev) if prev.feasible() => vec![split_largest(d, &prev.segments)],
            _ => Vec::new(),
        };
        out.push(opt.solve(&warm));
    }
    Ok(out)
}

/// `D(F₁, F₂) = D(Id, F₂F₁⁻¹)`.
pub fn dissipation_distance(
    d: &DissipationDensity,
    f1: &SL3Matrix,
    f2: &SL3Matrix,
    plan: &PathPlan,
) -> Result<PathBound> {
    d_upper(d, &(*f2 * f1.inverse()), plan)
}

fn split_largest(d: &DissipationDensity, segs: &[DeviatoricTensor]) -> Vec<V5> {
    let mut ys: Vec<V5> = segs.iter().map(|q| q.coords()).collect();
    let k = (0..ys.len())
        .max_by(|&a, &b| d.eval_coords(&ys[a]).total_cmp(&d.eval_coords(&ys[b])))
        .unwrap_or(0);
    let half = 0.5 * ys[k];
    ys[k] = half;
    ys.insert(k, half);
    ys
}

struct PathOptimizer<'a> {
    d: &'a DissipationDensity,
    target: Mat3,
    n: usize,
    plan: &'a PathPlan,
    basis: [Mat3; 5],
    evals: usize,
}

impl<'a> PathOptimizer<'a> {
    fn new(d: &'a DissipationDensity, f: &SL3Matrix, plan: &'a PathPlan) -> Self {
        let basis = std::array::from_fn(|j| {
            let mut e = V5::zeros();
            e[j] = 1.0;
            DeviatoricTensor::from_coords(&e).to_mat()
        });
        PathOptimizer {
            d,
            target: f.m,
            n: plan.n_segments,
            plan,
            basis,
            evals: 0,
        }
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.plan.max_evals
    }

    fn coords_to_mat(&self, y: &V5) -> Mat3 {
        (0..5).map(|j| y[j] * self.basis[j]).sum()
    }

    fn segments(&self, z: &DVector<f64>) -> Vec<V5> {
        (0..self.n).map(|k| z.fixed_rows::<5>(5 * k).into_owned()).collect()
    }

    fn pack(ys: &[V5]) -> DVector<f64> {
        DVector::from_iterator(5 * ys.len(), ys.iter().flat_map(|y| y.iter().copied()))
    }

    fn endpoint(&self, z: &DVector<f64>) -> Mat3 {
        self.segments(z)
            .iter()
            .fold(Mat3::identity(), |acc, y| mat_exp(&self.coords_to_mat(y)) * acc)
    }

    fn cost(&self, z: &DVector<f64>) -> f64 {
        self.segments(z).iter().map(|y| self.d.eval_coords(y)).sum()
    }

    /// Endpoint and its 9 × 5n Jacobian (column-major vectorization).
    fn endpoint_jacobian(&self, z: &DVector<f64>) -> (Mat3, DMatrix<f64>) {
        let qs: Vec<Mat3> = self.segments(z).iter().map(|y| self.coords_to_mat(y)).collect();
        let xs: Vec<Mat3> = qs.iter().map(mat_exp).collect();
        // prefix[k] = X_{k-1}···X_1, suffix[k] = X_n···X_{k+1}
        let mut prefix = vec![Mat3::identity(); self.n + 1];
        for k in 0..self.n {
            prefix[k + 1] = xs[k] * prefix[k];
        }
        let mut suffix = vec![Mat3::identity(); self.n + 1];
        for k in (0..self.n).rev() {
            suffix[k] = suffix[k + 1] * xs[k];
        }
        let mut jac = DMatrix::zeros(9, 5 * self.n);
        for k in 0..self.n {
            for (j, b) in self.basis.iter().enumerate() {
                let col = suffix[k + 1] * exp_frechet(&qs[k], b) * prefix[k];
                jac.column_mut(5 * k + j).copy_from_slice(col.as_slice());
            }
        }
        (prefix[self.n], jac)
    }

    /// Penalized objective with a smoothed `H_D` and its gradient.
    fn penalized(&mut self, z: &DVector<f64>, rho: f64, eta: f64) -> (f64, DVector<f64>) {
        self.evals += 1;
        let (e, jac) = self.endpoint_jacobian(z);
        let r = e - self.target;
        let rv = DVector::from_column_slice(r.as_slice());
        let mut g = rho * jac.transpose() * rv;
        let mut val = 0.5 * rho * r.norm_squared();
        for (k, y) in self.segments(z).iter().enumerate() {
            let (h, gh) = smooth_h(self.d, y, eta);
            val += h;
            let mut rows = g.fixed_rows_mut::<5>(5 * k);
            rows += gh;
        }
        (val, g)
    }

    fn bfgs(&mut self, z0: DVector<f64>, rho: f64, eta: f64, iters: usize) -> DVector<f64> {
        let m = z0.len();
        let mut z = z0;
        let (mut f, mut g) = self.penalized(&z, rho, eta);
        let mut hinv = DMatrix::<f64>::identity(m, m) / (1.0 + rho);
        for _ in 0..iters {
            if g.norm() <= 1e-13 * (1.0 + f.abs()) || self.exhausted() {
                break;
            }
            let mut dir = -(&hinv * &g);
            let mut slope = dir.dot(&g);
            if !(slope < 0.0) {
                hinv = DMatrix::identity(m, m) / (1.0 + rho);
                dir = -(&hinv * &g);
                slope = dir.dot(&g);
            }
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial = &z + step * &dir;
                let (ft, gt) = self.penalized(&trial, rho, eta);
                if ft <= f + 1e-4 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                step *= 0.5;
            }
            let Some((zn, fnew, gn)) = accepted else {
                break;
            };
            let s = &zn - &z;
            let y = &gn - &g;
            let sy = s.dot(&y);
            if sy > 1e-16 * s.norm() * y.norm() {
                let hy = &hinv * &y;
                let yhy = y.dot(&hy);
                hinv += ((sy + yhy) / (sy * sy)) * (&s * s.transpose())
                    - (1.0 / sy) * (&hy * s.transpose() + &s * hy.transpose());
            }
            let decrease = f - fnew;
            z = zn;
            f = fnew;
            g = gn;
            if decrease <= 1e-16 * f.abs() {
                break;
            }
        }
        z
    }

    /// Gauss–Newton minimum-norm corrections onto the endpoint constraint.
    fn polish(&mut self, mut z: DVector<f64>) -> (DVector<f64>, f64) {
        let mut err = (self.endpoint(&z) - self.target).norm();
        for _ in 0..30 {
            if err <= 1e-15 {
                break;
            }
            self.evals += 1;
            let (e, jac) = self.endpoint_jacobian(&z);
            let r = DVector::from_column_slice((e - self.target).as_slice());
            let Ok(pinv) = jac.pseudo_inverse(1e-12) else {
                break;
            };
            let trial = &z - pinv * r;
            let e2 = (self.endpoint(&trial) - self.target).norm();
            if !(e2 < err) {
                break;
            }
            z = trial;
            err = e2;
        }
        (z, err)
    }

    fn optimize(&mut self, z0: DVector<f64>, scale: f64) -> (DVector<f64>, f64) {
        let sigma = self.d.sigma_y();
        // reach the constraint first; a weak initial penalty would let the
        // cost collapse the path onto the saddle at q = 0
        let (mut z, _) = self.polish(z0);
        for round in 0..12 {
            let rho = self.plan.penalty * sigma / (1e-2 * scale) * 10f64.powi(round);
            let eta = (1e-2 * scale * 10f64.powi(-round)).max(1e-12);
            z = self.bfgs(z, rho, eta, 400);
            let err = (self.endpoint(&z) - self.target).norm();
            if (err <= 1e-7 && round >= 3) || self.exhausted() {
                break;
            }
        }
        self.polish(z)
    }

    fn solve(&mut self, warm: &[Vec<V5>]) -> PathBound {
        let mut best = PathBound::infeasible();
        let consider = |this: &Self, z: &DVector<f64>, err: f64, best: &mut PathBound| {
            if err > ENDPOINT_TOL {
                return;
            }
            let value = this.cost(z);
            if value < best.value {
                *best = PathBound {
                    value,
                    segments: this
                        .segments(z)
                        .iter()
                        .map(DeviatoricTensor::from_coords)
                        .collect(),
                    endpoint_error: err,
                    budget_exhausted: false,
                    evals: 0,
                };
            }
        };

        if (self.target - Mat3::identity()).norm() == 0.0 {
            let z = DVector::zeros(5 * self.n);
            consider(self, &z, 0.0, &mut best);
            best.evals = self.evals;
            return best;
        }

        let log = mat_log(&self.target).ok();
        // the exact subgroup path, split evenly
        if let Some(q) = log.as_ref().and_then(admissible) {
            let y = q.coords() / self.n as f64;
            let z = Self::pack(&vec![y; self.n]);
            let err = (self.endpoint(&z) - self.target).norm();
            consider(self, &z, err, &mut best);
        }
        for w in warm.iter().filter(|w| w.len() == self.n) {
            let z = Self::pack(w);
            let err = (self.endpoint(&z) - self.target).norm();
            consider(self, &z, err, &mut best);
        }

        // symmetric part of the logarithm, or of the stretch when the
        // principal logarithm does not exist
        let (base, skew) = match &log {
            Some(l) => (sym_dev_coords(l), 0.5 * (l - l.transpose()).norm()),
            None => (stretch_log_coords(&self.target), (self.target - Mat3::identity()).norm()),
        };
        // a skew part of size θ is generated by commutators of increments of size √θ
        let scale = base.norm().max(skew.sqrt()).max(1e-3);
        let mut starts: Vec<DVector<f64>> = warm
            .iter()
            .filter(|w| w.len() == self.n)
            .map(|w| Self::pack(w))
            .collect();
        starts.push(Self::pack(&vec![base / self.n as f64; self.n]));
        let mut rng = ChaCha8Rng::seed_from_u64(self.plan.seed);
        for _ in 0..self.plan.restarts {
            let ys: Vec<V5> = (0..self.n)
                .map(|_| {
                    let noise = V5::from_fn(|_, _| rng.random_range(-1.0..1.0));
                    base / self.n as f64 + (scale / (self.n as f64).sqrt()) * noise
                })
                .collect();
            starts.push(Self::pack(&ys));
        }

        for z0 in starts {
            if self.exhausted() {
                best.budget_exhausted = true;
                break;
            }
            let (z, err) = self.optimize(z0, scale);
            consider(self, &z, err, &mut best);
        }
        best.budget_exhausted |= self.exhausted();
        best.evals = self.evals;
        best
    }
}

/// Fréchet derivative of `exp` at `q` in direction `b`, from the block
/// identity `exp([[q, b], [0, q]]) = [[e^q, L(q, b)], [0, e^q]]`.
fn exp_frechet(q: &Mat3, b: &Mat3) -> Mat3 {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(q);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(q);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(b);
    m.exp().fixed_view::<3, 3>(0, 3).into_owned()
}

/// Smoothed `H_D` and its gradient: `σ(√(|y|² + η²) − η)` for the Frobenius
/// norm, a log-sum-exp of the support values for a gauge.
fn smooth_h(d: &DissipationDensity, y: &V5, eta: f64) -> (f64, V5) {
    let sigma = d.sigma_y();
    match d.mode() {
        crate::forms::DissipationMode::Frobenius => {
            let r = (y.norm_squared() + eta * eta).sqrt();
            (sigma * (r - eta), (sigma / r) * y)
        }
        crate::forms::DissipationMode::Gauge(g) => {
            let vals: Vec<f64> = g.directions().iter().map(|s| s.dot(y)).collect();
            let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = vals.iter().map(|v| ((v - top) / eta).exp()).collect();
            let total: f64 = weights.iter().sum();
            let grad = g
                .directions()
                .iter()
                .zip(&weights)
                .map(|(s, w)| (w / total) * s)
                .sum::<V5>();
            (sigma * (top + eta * total.ln()), sigma * grad)
        }
    }
}

fn sym_dev_coords(m: &Mat3) -> V5 {
    let s = 0.5 * (m + m.transpose());
    let tr = s.trace() / 3.0;
    DeviatoricTensor::new(s[(0, 0)] - tr, s[(1, 1)] - tr, s[(0, 1)], s[(0, 2)], s[(1, 2)]).coords()
}

/// `log U` with `F = RU`, from the spectral decomposition of `FᵀF`.
fn stretch_log_coords(f: &Mat3) -> V5 {
    let eig = SymmetricEigen::new(f.transpose() * f);
    let logs = eig.eigenvalues.map(|l| 0.5 * l.max(1e-300).ln());
    let m = eig.eigenvectors * Mat3::from_diagonal(&logs) * eig.eigenvectors.transpose();
    sym_dev_coords(&m)
}
