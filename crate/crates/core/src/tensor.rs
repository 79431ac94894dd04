//! Small dense tensors used by the constitutive layer.
//!
//! `Mat2`/`Mat3` are plain nalgebra matrices. The symmetric and deviatoric
//! types store only independent components, so symmetry and trace-freeness
//! hold by construction.

use nalgebra::{Matrix2, Matrix3, Vector3, Vector5, Vector6};
use std::ops::{Add, Mul, Neg, Sub};

pub type Mat2 = Matrix2<f64>;
pub type Mat3 = Matrix3<f64>;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        yy: 0.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Sym2 { xx, yy, xy }
    }

    pub fn identity() -> Self {
        Sym2::new(1.0, 1.0, 0.0)
    }

    pub fn sym(m: &Mat2) -> Self {
        Sym2::new(m[(0, 0)], m[(1, 1)], 0.5 * (m[(0, 1)] + m[(1, 0)]))
    }

    /// Symmetric part of `a ⊗ b`.
    pub fn sym_outer(a: [f64; 2], b: [f64; 2]) -> Self {
        Sym2::new(a[0] * b[0], a[1] * b[1], 0.5 * (a[0] * b[1] + a[1] * b[0]))
    }

    pub fn to_mat(self) -> Mat2 {
        Mat2::new(self.xx, self.xy, self.xy, self.yy)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn ddot(&self, o: &Sym2) -> f64 {
        self.xx * o.xx + self.yy * o.yy + 2.0 * self.xy * o.xy
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    /// Orthonormal (Mandel) coordinates `(xx, yy, √2·xy)`.
    pub fn mandel(&self) -> Vector3<f64> {
        Vector3::new(self.xx, self.yy, SQRT2 * self.xy)
    }

    pub fn from_mandel(v: &Vector3<f64>) -> Self {
        Sym2::new(v[0], v[1], v[2] / SQRT2)
    }

    /// Pads with zeros to a 3×3 symmetric matrix.
    pub fn embed(&self) -> Sym3 {
        Sym3::new(self.xx, self.yy, 0.0, self.xy, 0.0, 0.0)
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.yy + o.yy, self.xy + o.xy)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.yy - o.yy, self.xy - o.xy)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, s: Sym2) -> Sym2 {
        Sym2::new(self * s.xx, self * s.yy, self * s.xy)
    }
}

impl Neg for Sym2 {
    type Output = Sym2;
    fn neg(self) -> Sym2 {
        -1.0 * self
    }
}

/// Symmetric 3×3 matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sym3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl Sym3 {
    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        Sym3 {
            xx,
            yy,
            zz,
            xy,
            xz,
            yz,
        }
    }

    pub fn sym(m: &Mat3) -> Self {
        Sym3::new(
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            0.5 * (m[(0, 1)] + m[(1, 0)]),
            0.5 * (m[(0, 2)] + m[(2, 0)]),
            0.5 * (m[(1, 2)] + m[(2, 1)]),
        )
    }

    pub fn identity() -> Self {
        Sym3::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    }

    pub fn to_mat(self) -> Mat3 {
        Mat3::new(
            self.xx, self.xy, self.xz, self.xy, self.yy, self.yz, self.xz, self.yz, self.zz,
        )
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn ddot(&self, o: &Sym3) -> f64 {
        self.mandel().dot(&o.mandel())
    }

    pub fn ddot_mat(&self, m: &Mat3) -> f64 {
        self.to_mat().component_mul(m).sum()
    }

    pub fn norm(&self) -> f64 {
        self.mandel().norm()
    }

    /// Upper-left 2×2 block.
    pub fn upper_left(&self) -> Sym2 {
        Sym2::new(self.xx, self.yy, self.xy)
    }

    /// Orthonormal (Mandel) coordinates `(xx, yy, zz, √2·xy, √2·xz, √2·yz)`.
    pub fn mandel(&self) -> Vector6<f64> {
        Vector6::new(
            self.xx,
            self.yy,
            self.zz,
            SQRT2 * self.xy,
            SQRT2 * self.xz,
            SQRT2 * self.yz,
        )
    }

    pub fn from_mandel(v: &Vector6<f64>) -> Self {
        Sym3::new(
            v[0],
            v[1],
            v[2],
            v[3] / SQRT2,
            v[4] / SQRT2,
            v[5] / SQRT2,
        )
    }

    /// Orthogonal projection onto the trace-free subspace.
    pub fn deviatoric(&self) -> DeviatoricTensor {
        let m = self.trace() / 3.0;
        DeviatoricTensor::new(self.xx - m, self.yy - m, self.xy, self.xz, self.yz)
    }
}

impl Add for Sym3 {
    type Output = Sym3;
    fn add(self, o: Sym3) -> Sym3 {
        Sym3::from_mandel(&(self.mandel() + o.mandel()))
    }
}

impl Sub for Sym3 {
    type Output = Sym3;
    fn sub(self, o: Sym3) -> Sym3 {
        Sym3::from_mandel(&(self.mandel() - o.mandel()))
    }
}

impl Mul<Sym3> for f64 {
    type Output = Sym3;
    fn mul(self, s: Sym3) -> Sym3 {
        Sym3::from_mandel(&(self * s.mandel()))
    }
}

/// Symmetric trace-free 3×3 matrix; `p33 = -p11 - p22`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeviatoricTensor {
    pub p11: f64,
    pub p22: f64,
    pub p12: f64,
    pub p13: f64,
    pub p23: f64,
}

const INV_SQRT6: f64 = 0.408_248_290_463_863;

impl DeviatoricTensor {
    pub const ZERO: DeviatoricTensor = DeviatoricTensor {
        p11: 0.0,
        p22: 0.0,
        p12: 0.0,
        p13: 0.0,
        p23: 0.0,
    };

    pub fn new(p11: f64, p22: f64, p12: f64, p13: f64, p23: f64) -> Self {
        DeviatoricTensor {
            p11,
            p22,
            p12,
            p13,
            p23,
        }
    }

    pub fn p33(&self) -> f64 {
        -self.p11 - self.p22
    }

    pub fn to_sym3(self) -> Sym3 {
        Sym3::new(self.p11, self.p22, self.p33(), self.p12, self.p13, self.p23)
    }

    pub fn to_mat(self) -> Mat3 {
        self.to_sym3().to_mat()
    }

    /// Upper-left 2×2 block `p'`.
    pub fn in_plane(&self) -> Sym2 {
        Sym2::new(self.p11, self.p22, self.p12)
    }

    /// Coordinates in the orthonormal basis
    /// `diag(1,-1,0)/√2, diag(1,1,-2)/√6, (e1e2+e2e1)/√2, (e1e3+e3e1)/√2, (e2e3+e3e2)/√2`.
    pub fn coords(&self) -> Vector5<f64> {
        Vector5::new(
            (self.p11 - self.p22) / SQRT2,
            3.0 * (self.p11 + self.p22) * INV_SQRT6,
            SQRT2 * self.p12,
            SQRT2 * self.p13,
            SQRT2 * self.p23,
        )
    }

    pub fn from_coords(y: &Vector5<f64>) -> Self {
        let diff = SQRT2 * y[0];
        let sum = 2.0 * y[1] * INV_SQRT6;
        DeviatoricTensor::new(
            0.5 * (sum + diff),
            0.5 * (sum - diff),
            y[2] / SQRT2,
            y[3] / SQRT2,
            y[4] / SQRT2,
        )
    }

    pub fn ddot(&self, o: &DeviatoricTensor) -> f64 {
        self.to_sym3().ddot(&o.to_sym3())
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        *self == DeviatoricTensor::ZERO
    }
}

impl Add for DeviatoricTensor {
    type Output = DeviatoricTensor;
    fn add(self, o: Self) -> Self {
        DeviatoricTensor::new(
            self.p11 + o.p11,
            self.p22 + o.p22,
            self.p12 + o.p12,
            self.p13 + o.p13,
            self.p23 + o.p23,
        )
    }
}

impl Sub for DeviatoricTensor {
    type Output = DeviatoricTensor;
    fn sub(self, o: Self) -> Self {
        DeviatoricTensor::new(
            self.p11 - o.p11,
            self.p22 - o.p22,
            self.p12 - o.p12,
            self.p13 - o.p13,
            self.p23 - o.p23,
        )
    }
}

impl Mul<DeviatoricTensor> for f64 {
    type Output = DeviatoricTensor;
    fn mul(self, p: DeviatoricTensor) -> DeviatoricTensor {
        DeviatoricTensor::new(
            self * p.p11,
            self * p.p22,
            self * p.p12,
            self * p.p13,
            self * p.p23,
        )
    }
}
