//! Shape functions: bilinear for the in-plane displacement, bicubic Hermite
//! (Bogner–Fox–Schmit) for the deflection.
//!
//! Local node order is (0,0), (1,0), (0,1), (1,1); Hermite DOF kinds per
//! node are `v, ∂1v, ∂2v, ∂12v`.

use super::grid::Grid;

/// Cubic Hermite basis on [0,1]: `(value, d/dξ, d²/dξ²)` of the function
/// attached to end `end` (0 or 1), either the value (`slope = false`) or the
/// slope (`slope = true`, unscaled).
fn hermite_1d(xi: f64, end: usize, slope: bool) -> [f64; 3] {
    let (x, x2, x3) = (xi, xi * xi, xi * xi * xi);
    match (end, slope) {
        (0, false) => [1.0 - 3.0 * x2 + 2.0 * x3, -6.0 * x + 6.0 * x2, -6.0 + 12.0 * x],
        (0, true) => [x - 2.0 * x2 + x3, 1.0 - 4.0 * x + 3.0 * x2, -4.0 + 6.0 * x],
        (1, false) => [3.0 * x2 - 2.0 * x3, 6.0 * x - 6.0 * x2, 6.0 - 12.0 * x],
        (1, true) => [-x2 + x3, -2.0 * x + 3.0 * x2, -2.0 + 6.0 * x],
        _ => unreachable!(),
    }
}

fn linear_1d(xi: f64, end: usize) -> [f64; 2] {
    if end == 0 {
        [1.0 - xi, -1.0]
    } else {
        [xi, 1.0]
    }
}

/// Bilinear shape function data at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearShape {
    pub val: f64,
    pub dx: f64,
    pub dy: f64,
}

/// Hermite shape function data at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct HermiteShape {
    pub val: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dyy: f64,
    pub dxy: f64,
}

pub fn linear_shapes(xi: f64, eta: f64, hx: f64, hy: f64) -> [LinearShape; 4] {
    let mut out = [LinearShape::default(); 4];
    for (a, s) in out.iter_mut().enumerate() {
        let fx = linear_1d(xi, a % 2);
        let fy = linear_1d(eta, a / 2);
        *s = LinearShape {
            val: fx[0] * fy[0],
            dx: fx[1] * fy[0] / hx,
            dy: fx[0] * fy[1] / hy,
        };
    }
    out
}

/// Sixteen Hermite shapes indexed `4 * corner + kind`.
pub fn hermite_shapes(xi: f64, eta: f64, hx: f64, hy: f64) -> [HermiteShape; 16] {
    let mut out = [HermiteShape::default(); 16];
    for corner in 0..4 {
        let (ex, ey) = (corner % 2, corner / 2);
        for kind in 0..4 {
            let (sx, sy) = (kind == 1 || kind == 3, kind == 2 || kind == 3);
            let fx = hermite_1d(xi, ex, sx);
            let fy = hermite_1d(eta, ey, sy);
            // slope functions carry a length factor so the DOF is a physical derivative
            let cx = if sx { hx } else { 1.0 };
            let cy = if sy { hy } else { 1.0 };
            let c = cx * cy;
            out[4 * corner + kind] = HermiteShape {
                val: c * fx[0] * fy[0],
                dx: c * fx[1] * fy[0] / hx,
                dy: c * fx[0] * fy[1] / hy,
                dxx: c * fx[2] * fy[0] / (hx * hx),
                dyy: c * fx[0] * fy[2] / (hy * hy),
                dxy: c * fx[1] * fy[1] / (hx * hy),
            };
        }
    }
    out
}

/// Shape data at every in-plane quadrature point of a (uniform) cell.
#[derive(Debug, Clone)]
pub struct ShapeTable {
    pub linear: Vec<[LinearShape; 4]>,
    pub hermite: Vec<[HermiteShape; 16]>,
}

impl ShapeTable {
    pub fn new(grid: &Grid) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut linear = Vec::new();
        let mut hermite = Vec::new();
        for g in 0..grid.points_per_cell() {
            let (xi, eta) = grid.local_point(g);
            linear.push(linear_shapes(xi, eta, hx, hy));
            hermite.push(hermite_shapes(xi, eta, hx, hy));
        }
        ShapeTable { linear, hermite }
    }
}
