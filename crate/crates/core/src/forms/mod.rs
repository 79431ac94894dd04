//! Constitutive forms: the elasticity tensor and its quadratic form, the
//! plate relaxation operator with the reduced form and tensor, quadratic
//! hardening, and the positively 1-homogeneous dissipation density.

pub mod gauge;

use nalgebra::{Matrix3, Matrix5, Matrix6, SymmetricEigen, Vector3, Vector5};

use crate::error::{Error, Result};
use crate::tensor::{DeviatoricTensor, Mat2, Mat3, Sym2, Sym3};
pub use gauge::Gauge;

/// A symmetric elasticity tensor acting on symmetric 3×3 matrices.
///
/// Implementors only need `apply`; the relaxation and reduced quantities
/// are derived generically from it.
pub trait ElasticTensor {
    fn apply(&self, e: &Sym3) -> Sym3;
}

/// Isotropic elasticity given by the Lamé pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicElasticity {
    lam: f64,
    mu: f64,
}

impl IsotropicElasticity {
    pub fn new(lam: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter("mu must be > 0".into()));
        }
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be > 0".into()));
        }
        Ok(IsotropicElasticity { lam, mu })
    }

    pub fn lam(&self) -> f64 {
        self.lam
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Sharp constants `(r, R)` with `r|F|² ≤ Q(F) ≤ R|F|²` on symmetric `F`.
    pub fn growth_constants(&self) -> (f64, f64) {
        (self.mu, self.mu + 1.5 * self.lam)
    }

    /// `2μ sym F + λ tr F Id`.
    pub fn apply_c(&self, f: &Mat3) -> Sym3 {
        self.apply(&Sym3::sym(f))
    }

    /// `½ ℂF : F`.
    pub fn q(&self, f: &Mat3) -> f64 {
        0.5 * self.apply_c(f).ddot_mat(f)
    }

    pub fn relax_a(&self, f: &Mat2) -> Result<Sym3> {
        relax(self, f)
    }

    pub fn q2(&self, f: &Mat2) -> Result<f64> {
        let a = self.relax_a(f)?;
        Ok(self.q(&a.to_mat()))
    }

    pub fn apply_c2(&self, f: &Mat2) -> Result<Sym3> {
        Ok(self.apply(&self.relax_a(f)?))
    }

    /// Closed form of the reduced coefficient `μλ/(λ+2μ)` multiplying `(tr F)²`.
    pub fn reduced_trace_coefficient(&self) -> f64 {
        self.mu * self.lam / (self.lam + 2.0 * self.mu)
    }
}

impl ElasticTensor for IsotropicElasticity {
    fn apply(&self, e: &Sym3) -> Sym3 {
        let tr = e.trace();
        let mut s = (2.0 * self.mu) * *e;
        s.xx += self.lam * tr;
        s.yy += self.lam * tr;
        s.zz += self.lam * tr;
        s
    }
}

/// Relaxation operator: completes `sym F` with the out-of-plane column
/// `(λ1, λ2, λ3)` minimizing `Q`, by solving the stationarity system
/// `ℂA : G_i = 0` for the three out-of-plane directions `G_i`.
pub fn relax<C: ElasticTensor + ?Sized>(c: &C, f: &Mat2) -> Result<Sym3> {
    let base = Sym2::sym(f).embed();
    let dirs = [
        Sym3::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        Sym3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0),
        Sym3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0),
    ];
    let cdirs: Vec<Sym3> = dirs.iter().map(|g| c.apply(g)).collect();
    let cbase = c.apply(&base);
    let mut m = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = cdirs[j].ddot(&dirs[i]);
        }
        rhs[i] = -cbase.ddot(&dirs[i]);
    }
    let lambda = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("relaxation system".into()))?;
    let mut a = base;
    a.xz = lambda[0];
    a.yz = lambda[1];
    a.zz = lambda[2];
    Ok(a)
}

/// Matrix of `ℂ₂` on symmetric 2×2 strains in Mandel coordinates, so that
/// `Q₂(E) = ½ eᵀ M e` with `e = E.mandel()`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedStiffness {
    m: Matrix3<f64>,
}

impl ReducedStiffness {
    pub fn new<C: ElasticTensor + ?Sized>(c: &C) -> Result<Self> {
        let basis = [
            Sym2::new(1.0, 0.0, 0.0),
            Sym2::new(0.0, 1.0, 0.0),
            Sym2::new(0.0, 0.0, std::f64::consts::FRAC_1_SQRT_2),
        ];
        let mut m = Matrix3::zeros();
        for (j, bj) in basis.iter().enumerate() {
            let s = c.apply(&relax(c, &bj.to_mat())?);
            for (i, bi) in basis.iter().enumerate() {
                m[(i, j)] = s.ddot(&bi.embed());
            }
        }
        // exact symmetry
        let m = 0.5 * (m + m.transpose());
        Ok(ReducedStiffness { m })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// In-plane block of `ℂ₂E`.
    pub fn stress(&self, e: &Sym2) -> Sym2 {
        Sym2::from_mandel(&(self.m * e.mandel()))
    }

    pub fn energy(&self, e: &Sym2) -> f64 {
        let v = e.mandel();
        0.5 * v.dot(&(self.m * v))
    }
}

/// Quadratic hardening `B(p) = ½𝔹p:p`.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum HardeningForm {
    Isotropic { k: f64 },
    /// 6×6 symmetric positive definite matrix in Mandel coordinates.
    Tensor { b: Matrix6<f64>, c6: f64 },
}

impl HardeningForm {
    pub fn isotropic(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter("hardening modulus k must be > 0".into()));
        }
        Ok(HardeningForm::Isotropic { k })
    }

    pub fn tensor(b: Matrix6<f64>) -> Result<Self> {
        if (b - b.transpose()).norm() > 1e-12 * b.norm() {
            return Err(Error::InvalidParameter("hardening tensor must be symmetric".into()));
        }
        let c6 = SymmetricEigen::new(b).eigenvalues.min();
        if !(c6 > 0.0) {
            return Err(Error::InvalidParameter(
                "hardening tensor must be positive definite".into(),
            ));
        }
        Ok(HardeningForm::Tensor { b, c6 })
    }

    /// Smallest eigenvalue `c₆` of 𝔹, so that `B(F) ≥ (c₆/2)|F|²`.
    pub fn c6(&self) -> f64 {
        match self {
            HardeningForm::Isotropic { k } => *k,
            HardeningForm::Tensor { c6, .. } => *c6,
        }
    }

    pub fn eval(&self, p: &DeviatoricTensor) -> f64 {
        match self {
            HardeningForm::Isotropic { k } => 0.5 * k * p.ddot(p),
            HardeningForm::Tensor { b, .. } => {
                let y = p.to_sym3().mandel();
                0.5 * y.dot(&(b * y))
            }
        }
    }

    pub fn grad(&self, p: &DeviatoricTensor) -> Sym3 {
        match self {
            HardeningForm::Isotropic { k } => *k * p.to_sym3(),
            HardeningForm::Tensor { b, .. } => Sym3::from_mandel(&(b * p.to_sym3().mandel())),
        }
    }

    /// Hessian restricted to deviatoric coordinates.
    pub fn deviatoric_hessian(&self) -> Matrix5<f64> {
        let mut h = Matrix5::zeros();
        for j in 0..5 {
            let mut e = Vector5::zeros();
            e[j] = 1.0;
            let g = self.grad(&DeviatoricTensor::from_coords(&e));
            let gd = g.deviatoric().coords();
            h.set_column(j, &gd);
        }
        0.5 * (h + h.transpose())
    }
}

/// Dissipation density `H_D` on deviatoric tensors.
#[derive(Debug, Clone, PartialEq)]
pub enum DissipationMode {
    Frobenius,
    Gauge(Gauge),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationDensity {
    sigma_y: f64,
    mode: DissipationMode,
}

impl DissipationDensity {
    pub fn von_mises(sigma_y: f64) -> Result<Self> {
        Self::new(sigma_y, DissipationMode::Frobenius)
    }

    pub fn new(sigma_y: f64, mode: DissipationMode) -> Result<Self> {
        if !(sigma_y > 0.0 && sigma_y.is_finite()) {
            return Err(Error::InvalidParameter("sigma_y must be > 0".into()));
        }
        Ok(DissipationDensity { sigma_y, mode })
    }

    /// Frobenius mode without the positivity check on `sigma_y`; only used
    /// where a rate-free (purely elastic-hardening) local problem is wanted.
    #[cfg(test)]
    pub(crate) fn frictionless() -> Self {
        DissipationDensity {
            sigma_y: 0.0,
            mode: DissipationMode::Frobenius,
        }
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y
    }

    pub fn mode(&self) -> &DissipationMode {
        &self.mode
    }

    pub fn eval(&self, q: &DeviatoricTensor) -> f64 {
        self.eval_coords(&q.coords())
    }

    pub fn eval_coords(&self, y: &Vector5<f64>) -> f64 {
        match &self.mode {
            DissipationMode::Frobenius => self.sigma_y * y.norm(),
            DissipationMode::Gauge(g) => self.sigma_y * g.eval(y),
        }
    }

    /// `(r_K, R_K)` with `r_K|q| ≤ H_D(q) ≤ R_K|q|`.
    pub fn growth_constants(&self) -> (f64, f64) {
        match &self.mode {
            DissipationMode::Frobenius => (self.sigma_y, self.sigma_y),
            DissipationMode::Gauge(g) => {
                (self.sigma_y * g.inradius(), self.sigma_y * g.circumradius())
            }
        }
    }
}
