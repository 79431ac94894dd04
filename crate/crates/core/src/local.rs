//! Pointwise incremental plastic update.
//!
//! At every quadrature point the plastic strain solves
//!
//! ```text
//! min_p  Q₂(E − p') + B(p) + H_D(p − p_prev)      over deviatoric p
//! ```
//!
//! The smooth part is a strictly convex quadratic in the five orthonormal
//! deviatoric coordinates `y`, `g(y) = ½yᵀAy − bᵀy + const`. The problem is
//! solved by accelerated proximal gradient with fixed step `1/λ_max(A)`.
//! In Frobenius mode the proximal map is the exact ball shrinkage and, once
//! the iteration has settled, the stationarity system is solved exactly
//! through its one-dimensional secular equation.

use nalgebra::{DMatrix, DVector, Matrix3x5, Matrix5, SymmetricEigen, Vector5};

use crate::error::{Error, Result};
use crate::forms::gauge::{min_norm_point, Gauge};
use crate::forms::{
    DissipationDensity, DissipationMode, HardeningForm, IsotropicElasticity, ReducedStiffness,
};
use crate::tensor::{DeviatoricTensor, Sym2};

type V5 = Vector5<f64>;

/// Total in-plane strain at one quadrature point (before subtracting `p'`).
pub type DrivingStrain = Sym2;

#[derive(Debug, Clone)]
pub struct LocalProblem {
    el: IsotropicElasticity,
    h: HardeningForm,
    d: DissipationDensity,
    pub tol: f64,
    pub max_iter: usize,
    stiffness: ReducedStiffness,
    /// `y ↦ p'` in Mandel coordinates.
    proj: Matrix3x5<f64>,
    /// `projᵀ M`.
    load: nalgebra::Matrix5x3<f64>,
    hessian: Matrix5<f64>,
    hard: Matrix5<f64>,
    eig_vectors: Matrix5<f64>,
    eig_values: V5,
    lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSolution {
    pub p: DeviatoricTensor,
    pub residual: f64,
    pub iters: usize,
}

impl LocalProblem {
    pub fn new(el: IsotropicElasticity, h: HardeningForm, d: DissipationDensity) -> Result<Self> {
        Self::with_tolerance(el, h, d, 1e-10, 10_000)
    }

    pub fn with_tolerance(
        el: IsotropicElasticity,
        h: HardeningForm,
        d: DissipationDensity,
        tol: f64,
        max_iter: usize,
    ) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("local tolerance must be > 0".into()));
        }
        if max_iter == 0 {
            return Err(Error::InvalidParameter("local iteration cap must be > 0".into()));
        }
        let stiffness = ReducedStiffness::new(&el)?;
        let mut proj = Matrix3x5::zeros();
        for j in 0..5 {
            let mut e = V5::zeros();
            e[j] = 1.0;
            proj.set_column(j, &DeviatoricTensor::from_coords(&e).in_plane().mandel());
        }
        let load = proj.transpose() * stiffness.matrix();
        let hard = h.deviatoric_hessian();
        let hessian = load * proj + hard;
        let hessian = 0.5 * (hessian + hessian.transpose());
        let eig = SymmetricEigen::new(hessian);
        let lipschitz = eig.eigenvalues.max();
        if !(eig.eigenvalues.min() > 0.0) {
            return Err(Error::Singular("local Hessian not positive definite".into()));
        }
        Ok(LocalProblem {
            el,
            h,
            d,
            tol,
            max_iter,
            stiffness,
            proj,
            load,
            hessian,
            hard,
            eig_vectors: eig.eigenvectors,
            eig_values: eig.eigenvalues,
            lipschitz,
        })
    }

    pub fn elasticity(&self) -> &IsotropicElasticity {
        &self.el
    }

    pub fn hardening(&self) -> &HardeningForm {
        &self.h
    }

    pub fn dissipation(&self) -> &DissipationDensity {
        &self.d
    }

    pub fn stiffness(&self) -> &ReducedStiffness {
        &self.stiffness
    }

    /// Operator norm of the Hessian of the smooth part (the step is its inverse).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `Q₂(E − p') + B(p) + H_D(p − p_prev)` evaluated through the forms layer.
    pub fn incremental_density(
        &self,
        e: &DrivingStrain,
        p: &DeviatoricTensor,
        p_prev: &DeviatoricTensor,
    ) -> f64 {
        let q2 = self
            .el
            .q2(&(*e - p.in_plane()).to_mat())
            .expect("relaxation of a valid isotropic elasticity");
        q2 + self.h.eval(p) + self.d.eval(&(*p - *p_prev))
    }

    /// Objective in coordinates, using the precomputed quadratic.
    fn objective(&self, e: &DrivingStrain, y: &V5, y_prev: &V5) -> f64 {
        let el = *e - Sym2::from_mandel(&(self.proj * y));
        self.stiffness.energy(&el)
            + 0.5 * y.dot(&(self.hard * y))
            + self.d.eval_coords(&(y - y_prev))
    }

    fn smooth_grad(&self, b: &V5, y: &V5) -> V5 {
        self.hessian * y - b
    }

    /// Distance from `-∇g` to `σ_y ∂h(p − p_prev)`; zero exactly at the minimizer.
    pub fn optimality_residual(
        &self,
        e: &DrivingStrain,
        p: &DeviatoricTensor,
        p_prev: &DeviatoricTensor,
    ) -> f64 {
        let b = self.load * e.mandel();
        self.residual_coords(&b, &p.coords(), &p_prev.coords())
    }

    fn residual_coords(&self, b: &V5, y: &V5, y_prev: &V5) -> f64 {
        let g = self.smooth_grad(b, y);
        let sigma = self.d.sigma_y();
        let dlt = y - y_prev;
        match self.d.mode() {
            DissipationMode::Frobenius => {
                let n = dlt.norm();
                if n > 0.0 {
                    (g + sigma * dlt / n).norm()
                } else {
                    (g.norm() - sigma).max(0.0)
                }
            }
            DissipationMode::Gauge(gauge) => Self::gauge_residual(gauge, sigma, &g, &dlt),
        }
    }

    fn gauge_residual(gauge: &Gauge, sigma: f64, g: &V5, d: &V5) -> f64 {
        let n = d.norm();
        let active = if n > 0.0 {
            gauge.active(d, 1e-8 * n * gauge.circumradius())
        } else {
            gauge.directions().to_vec()
        };
        let pts: Vec<V5> = active.iter().map(|s| sigma * s + g).collect();
        min_norm_point(&pts).norm()
    }

    /// Minimizer of the incremental density starting from `p_prev`.
    pub fn prox_update(&self, e: &DrivingStrain, p_prev: &DeviatoricTensor) -> Result<LocalSolution> {
        self.prox_update_from(e, p_prev, p_prev)
    }

    /// Same as [`prox_update`](Self::prox_update) with a warm start; the
    /// returned objective never exceeds the one at `start` or at `p_prev`.
    pub fn prox_update_from(
        &self,
        e: &DrivingStrain,
        p_prev: &DeviatoricTensor,
        start: &DeviatoricTensor,
    ) -> Result<LocalSolution> {
        let b = self.load * e.mandel();
        let y_prev = p_prev.coords();
        let sigma = self.d.sigma_y();

        if sigma == 0.0 {
            let y = self.solve_hessian(&b);
            return Ok(self.finish(y, &b, p_prev, 0));
        }

        if let DissipationMode::Frobenius = self.d.mode() {
            // below yield: p_prev itself satisfies the first-order condition
            let c = b - self.hessian * y_prev;
            if c.norm() <= sigma {
                return Ok(LocalSolution {
                    p: *p_prev,
                    residual: self.residual_coords(&b, &y_prev, &y_prev),
                    iters: 0,
                });
            }
        }

        let step = 1.0 / self.lipschitz;
        let mut start_y = start.coords();
        let f_start = self.objective(e, &start_y, &y_prev);
        let f_prev = self.objective(e, &y_prev, &y_prev);
        if f_prev < f_start {
            start_y = y_prev;
        }
        let mut best = start_y;
        let mut f_best = f_start.min(f_prev);
        let mut res_best = self.residual_coords(&b, &best, &y_prev);

        let mut x = start_y;
        let mut z = start_y;
        let mut t = 1.0f64;
        let mut f_x = f_best;
        let mut next_polish = 8;

        for k in 1..=self.max_iter {
            if k >= next_polish {
                next_polish *= 2;
                if let Some((y, res)) = self.polish(&b, &y_prev, &best) {
                    let f_y = self.objective(e, &y, &y_prev);
                    if f_y <= f_best + 1e-15 * f_best.abs().max(1.0) && res <= self.tol {
                        let mut sol = self.finish(y, &b, p_prev, k);
                        sol.residual = res;
                        return Ok(sol);
                    }
                }
            }
            let w = z - step * self.smooth_grad(&b, &z);
            let x_new = self.prox(&w, &y_prev, sigma * step);
            let f_new = self.objective(e, &x_new, &y_prev);
            if f_new > f_x {
                // function-value restart
                t = 1.0;
                z = x;
                continue;
            }
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = x_new + ((t - 1.0) / t_new) * (x_new - x);
            x = x_new;
            t = t_new;
            f_x = f_new;
            let res_x = self.residual_coords(&b, &x, &y_prev);
            // near the minimizer objective differences drown in rounding, so
            // ties are broken by the optimality residual
            let noise = 4.0 * f64::EPSILON * f_best.abs().max(f64::MIN_POSITIVE);
            if f_x < f_best - noise || (f_x <= f_best + noise && res_x < res_best) {
                f_best = f_best.min(f_x);
                best = x;
                res_best = res_x;
            }
            if res_best <= self.tol {
                return Ok(self.finish(best, &b, p_prev, k));
            }
        }
        let residual = self.residual_coords(&b, &best, &y_prev);
        Err(Error::NonConvergence {
            iters: self.max_iter,
            residual,
        })
    }

    fn finish(&self, y: V5, b: &V5, p_prev: &DeviatoricTensor, iters: usize) -> LocalSolution {
        let y_prev = p_prev.coords();
        LocalSolution {
            p: if y == y_prev {
                *p_prev
            } else {
                DeviatoricTensor::from_coords(&y)
            },
            residual: self.residual_coords(b, &y, &y_prev),
            iters,
        }
    }

    fn solve_hessian(&self, b: &V5) -> V5 {
        let bh = self.eig_vectors.transpose() * b;
        let yh = bh.component_div(&self.eig_values);
        self.eig_vectors * yh
    }

    /// Proximal map of `scale·h(· − y_prev)`.
    fn prox(&self, w: &V5, y_prev: &V5, scale: f64) -> V5 {
        let v = w - y_prev;
        match self.d.mode() {
            DissipationMode::Frobenius => {
                let n = v.norm();
                if n <= scale {
                    *y_prev
                } else {
                    y_prev + (1.0 - scale / n) * v
                }
            }
            DissipationMode::Gauge(g) => y_prev + v - g.project_scaled(&v, scale),
        }
    }

    fn polish(&self, b: &V5, y_prev: &V5, current: &V5) -> Option<(V5, f64)> {
        match self.d.mode() {
            DissipationMode::Frobenius => self.secular_polish(b, y_prev),
            DissipationMode::Gauge(g) => self.face_polish(g, b, y_prev, &(current - y_prev)),
        }
    }

    /// Exact stationary point on the face of the gauge selected by the
    /// current increment `d`: with `c = b − A y_prev`, solves
    /// `A d + σ Σ λᵢsᵢ = c`, `⟨sᵢ, d⟩ = η`, `Σ λᵢ = 1` over the nearly
    /// active directions, dropping those that receive a negative weight.
    fn face_polish(&self, gauge: &Gauge, b: &V5, y_prev: &V5, d: &V5) -> Option<(V5, f64)> {
        let n = d.norm();
        if n == 0.0 {
            return None;
        }
        let sigma = self.d.sigma_y();
        let c = b - self.hessian * y_prev;
        let mut active = gauge.active(d, 1e-6 * n * gauge.circumradius());
        for _ in 0..active.len() {
            let m = active.len();
            let dim = 5 + m + 1;
            let mut k = DMatrix::<f64>::zeros(dim, dim);
            let mut rhs = DVector::<f64>::zeros(dim);
            k.view_mut((0, 0), (5, 5)).copy_from(&self.hessian);
            for (j, s) in active.iter().enumerate() {
                for i in 0..5 {
                    k[(i, 5 + j)] = sigma * s[i];
                    k[(5 + j, i)] = s[i];
                }
                k[(5 + j, 5 + m)] = -1.0;
                k[(5 + m, 5 + j)] = 1.0;
            }
            rhs.rows_mut(0, 5).copy_from(&c);
            rhs[5 + m] = 1.0;
            let sol = k.svd(true, true).solve(&rhs, 1e-12).ok()?;
            let lam = sol.rows(5, m);
            let neg: Vec<usize> = (0..m).filter(|&j| lam[j] < -1e-14).collect();
            if neg.is_empty() {
                let d = V5::from_fn(|i, _| sol[i]);
                let res = Self::gauge_residual(gauge, sigma, &(self.hessian * d - c), &d);
                return Some((y_prev + d, res));
            }
            if neg.len() == m {
                return None;
            }
            active = active
                .into_iter()
                .enumerate()
                .filter(|(j, _)| !neg.contains(j))
                .map(|(_, s)| s)
                .collect();
        }
        None
    }

    /// Exact stationary point off the kink in Frobenius mode: with
    /// `c = b − A y_prev` and `A = VΛVᵀ`, the increment is
    /// `d = V r ĉ/(Λr + σ)` where `r = |d|` solves `Σ ĉᵢ²/(λᵢr + σ)² = 1`.
    /// The residual is measured on `d` itself, since `y_prev + d` cancels
    /// most of its digits when the increment is tiny.
    fn secular_polish(&self, b: &V5, y_prev: &V5) -> Option<(V5, f64)> {
        let sigma = self.d.sigma_y();
        let c = b - self.hessian * y_prev;
        let cn = c.norm();
        if cn <= sigma {
            return None;
        }
        let ch = self.eig_vectors.transpose() * c;
        let lam = &self.eig_values;
        let phi = |r: f64| -> f64 {
            (0..5)
                .map(|i| (ch[i] / (lam[i] * r + sigma)).powi(2))
                .sum::<f64>()
                - 1.0
        };
        let lo = (cn - sigma) / lam.max();
        let hi = (cn - sigma) / lam.min();
        // a root on the bracket ends shows up as a rounding-level sign error
        let r = if phi(lo) <= 0.0 {
            lo
        } else if phi(hi) >= 0.0 {
            hi
        } else {
            Self::secular_root(&phi, &ch, lam, sigma, lo, hi)
        };
        let dh = V5::from_fn(|i, _| r * ch[i] / (lam[i] * r + sigma));
        let d = self.eig_vectors * dh;
        let res = match d.norm() {
            n if n > 0.0 => (self.hessian * d - c + sigma * d / n).norm(),
            _ => (cn - sigma).max(0.0),
        };
        Some((y_prev + d, res))
    }

    fn secular_root(phi: &dyn Fn(f64) -> f64, ch: &V5, lam: &V5, sigma: f64, mut lo: f64, mut hi: f64) -> f64 {
        let mut r = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = phi(r);
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let df: f64 = (0..5)
                .map(|i| -2.0 * ch[i] * ch[i] * lam[i] / (lam[i] * r + sigma).powi(3))
                .sum();
            let newton = r - f / df;
            r = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::Gauge;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(lam: f64, mu: f64, k: f64, sigma: f64) -> LocalProblem {
        LocalProblem::new(
            IsotropicElasticity::new(lam, mu).unwrap(),
            HardeningForm::isotropic(k).unwrap(),
            DissipationDensity::von_mises(sigma).unwrap(),
        )
        .unwrap()
    }

    fn unit() -> LocalProblem {
        // σ_y = 0 path through the crate-internal constructor
        LocalProblem::new(
            IsotropicElasticity::new(1.0, 1.0).unwrap(),
            HardeningForm::isotropic(1.0).unwrap(),
            DissipationDensity::frictionless(),
        )
        .unwrap()
    }

    #[test]
    fn isotropic_lipschitz_constant_is_two_mu_plus_k() {
        for (lam, mu, k) in [(1.0, 1.0, 1.0), (10.0, 0.1, 3.0), (0.1, 10.0, 0.1)] {
            let lp = problem(lam, mu, k, 1.0);
            assert!((lp.lipschitz() - (2.0 * mu + k)).abs() < 1e-12 * (2.0 * mu + k));
        }
    }

    #[test]
    fn density_examples() {
        let lp = unit();
        let z = DeviatoricTensor::ZERO;
        assert_eq!(lp.incremental_density(&Sym2::ZERO, &z, &z), 0.0);
        let e = 0.19 * Sym2::identity();
        let p = DeviatoricTensor::new(0.1, 0.1, 0.0, 0.0, 0.0);
        let expect = 10.0 / 3.0 * 0.09f64.powi(2) + 3.0 * 0.01;
        assert!((lp.incremental_density(&e, &p, &z) - expect).abs() < 1e-14);
    }

    #[test]
    fn density_is_sum_of_forms() {
        let lp = problem(2.0, 0.5, 1.5, 0.7);
        let e = Sym2::new(0.1, -0.2, 0.05);
        let p = DeviatoricTensor::new(0.01, 0.02, -0.03, 0.04, 0.0);
        let pp = DeviatoricTensor::new(-0.01, 0.0, 0.01, 0.0, 0.02);
        let sum = lp.elasticity().q2(&(e - p.in_plane()).to_mat()).unwrap()
            + lp.hardening().eval(&p)
            + lp.dissipation().eval(&(p - pp));
        assert_eq!(lp.incremental_density(&e, &p, &pp), sum);
    }

    #[test]
    fn below_yield_returns_previous() {
        let lp = problem(1.0, 1.0, 1.0, 10.0);
        let sol = lp
            .prox_update(&(0.01 * Sym2::identity()), &DeviatoricTensor::ZERO)
            .unwrap();
        assert!(sol.p.is_zero());
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn frictionless_matches_one_dimensional_reduction() {
        let lp = unit();
        let sol = lp
            .prox_update(&(0.19 * Sym2::identity()), &DeviatoricTensor::ZERO)
            .unwrap();
        let expect = DeviatoricTensor::new(0.1, 0.1, 0.0, 0.0, 0.0);
        assert!((sol.p - expect).norm() < 1e-14);
        assert!((sol.p.p33() + 0.2).abs() < 1e-14);
    }

    #[test]
    fn large_yield_stress_freezes_plastic_strain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lp = problem(1.0, 1.0, 1.0, 1e3);
        for _ in 0..20 {
            let e = Sym2::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let pp = DeviatoricTensor::from_coords(&V5::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let sol = lp.prox_update(&e, &pp).unwrap();
            assert_eq!(sol.p, pp);
        }
    }

    #[test]
    fn residual_examples() {
        let lp = problem(1.0, 1.0, 1.0, 1.0);
        let z = DeviatoricTensor::ZERO;
        assert_eq!(lp.optimality_residual(&Sym2::ZERO, &z, &z), 0.0);
        let e = Sym2::new(2.0, -1.0, 0.5);
        let sol = lp.prox_update(&e, &z).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(lp.optimality_residual(&e, &sol.p, &z) <= 1e-10);
        let far = sol.p + DeviatoricTensor::new(0.3, -0.2, 0.1, 0.2, -0.4);
        assert!(lp.optimality_residual(&e, &far, &z) > 1e-3);
    }

    #[test]
    fn gauge_mode_beats_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut dirs = Gauge::cross_polytope().directions().to_vec();
        dirs.extend((0..8).map(|_| V5::from_fn(|_, _| rng.random_range(-1.0..1.0))));
        for (k, gauge) in [Gauge::cross_polytope(), Gauge::new(dirs).unwrap()].into_iter().cycle().take(40).enumerate() {
            let el = IsotropicElasticity::new(1.0 + k as f64 * 0.2, 2.0).unwrap();
            let d = DissipationDensity::new(0.3, DissipationMode::Gauge(gauge)).unwrap();
            let lp = LocalProblem::new(el, HardeningForm::isotropic(0.5).unwrap(), d).unwrap();
            let e = Sym2::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let pp = DeviatoricTensor::from_coords(&V5::from_fn(|_, _| rng.random_range(-0.2..0.2)));
            let sol = lp.prox_update(&e, &pp).unwrap();
            assert!(sol.residual <= 1e-10 && sol.iters < 200, "{sol:?}");
            let f0 = lp.incremental_density(&e, &sol.p, &pp);
            for _ in 0..100 {
                let dp = DeviatoricTensor::from_coords(&V5::from_fn(|_, _| rng.random_range(-1e-3..1e-3)));
                assert!(lp.incremental_density(&e, &(sol.p + dp), &pp) >= f0 - 1e-12);
            }
        }
    }
}
