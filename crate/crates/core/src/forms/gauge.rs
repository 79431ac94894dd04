//! Polyhedral gauges on the 5-dimensional space of deviatoric tensors.
//!
//! A gauge is the support function `h(y) = max_i <s_i, y>` of the convex
//! hull of a finite point set. Positivity requires the origin to lie in
//! the interior of the hull; the sharp lower growth constant is then the
//! inradius of the hull, found by enumerating its facets.

use nalgebra::{DMatrix, DVector, Matrix4, Vector5};

use crate::error::{Error, Result};

pub type V5 = Vector5<f64>;

/// Support-direction set with its sharp growth constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    directions: Vec<V5>,
    inradius: f64,
    circumradius: f64,
}

impl Gauge {
    pub fn new(directions: Vec<V5>) -> Result<Self> {
        if directions.len() < 6 {
            return Err(Error::InvalidParameter(
                "a gauge on 5 dimensions needs at least 6 support directions".into(),
            ));
        }
        if directions.iter().any(|d| !d.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidParameter("non-finite support direction".into()));
        }
        let inradius = hull_inradius(&directions).ok_or_else(|| {
            Error::InvalidParameter(
                "support directions must surround the origin (gauge not positive)".into(),
            )
        })?;
        let circumradius = directions.iter().map(|d| d.norm()).fold(0.0, f64::max);
        Ok(Gauge {
            directions,
            inradius,
            circumradius,
        })
    }

    /// `±e_i` for the five coordinate axes: `h(y) = max_i |y_i|`.
    pub fn cross_polytope() -> Self {
        let mut dirs = Vec::with_capacity(10);
        for i in 0..5 {
            let mut e = V5::zeros();
            e[i] = 1.0;
            dirs.push(e);
            dirs.push(-e);
        }
        Gauge {
            directions: dirs,
            inradius: 1.0 / 5f64.sqrt(),
            circumradius: 1.0,
        }
    }

    pub fn directions(&self) -> &[V5] {
        &self.directions
    }

    pub fn eval(&self, y: &V5) -> f64 {
        self.directions
            .iter()
            .map(|s| s.dot(y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_{|y|=1} h(y)`.
    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// `max_{|y|=1} h(y)`.
    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    /// Euclidean projection of `w` onto `scale · conv{s_i}`.
    pub fn project_scaled(&self, w: &V5, scale: f64) -> V5 {
        let shifted: Vec<V5> = self.directions.iter().map(|s| scale * s - w).collect();
        min_norm_point(&shifted) + w
    }

    /// Points `s_i` attaining the maximum in `h(d)` up to `tol`.
    pub fn active(&self, d: &V5, tol: f64) -> Vec<V5> {
        let h = self.eval(d);
        self.directions
            .iter()
            .filter(|s| s.dot(d) >= h - tol)
            .copied()
            .collect()
    }
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
pub fn min_norm_point(points: &[V5]) -> V5 {
    assert!(!points.is_empty());
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-14 * scale;

    let start = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm_squared().total_cmp(&b.1.norm_squared()))
        .map(|(i, _)| i)
        .unwrap();
    let mut set: Vec<usize> = vec![start];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut x = points[start];

    for _major in 0..(50 * points.len() + 50) {
        let (j, xp) = points
            .iter()
            .enumerate()
            .map(|(j, p)| (j, x.dot(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if x.norm_squared() - xp <= eps || set.contains(&j) {
            return x;
        }
        set.push(j);
        lambda.push(0.0);

        loop {
            let Some(mu) = affine_min_norm(points, &set) else {
                // affinely dependent corral: drop the newest point
                set.pop();
                lambda.pop();
                return x;
            };
            if mu.iter().all(|&m| m > 1e-15) {
                lambda = mu;
                x = combine(points, &set, &lambda);
                break;
            }
            let mut theta = 1.0f64;
            for (l, m) in lambda.iter().zip(&mu) {
                if *m <= 1e-15 {
                    let denom = l - m;
                    if denom > 0.0 {
                        theta = theta.min(l / denom);
                    }
                }
            }
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let mut k = 0;
            while k < set.len() {
                if lambda[k] <= 1e-15 {
                    set.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            x = combine(points, &set, &lambda);
            if set.len() == 1 {
                break;
            }
        }
    }
    x
}

fn combine(points: &[V5], set: &[usize], w: &[f64]) -> V5 {
    set.iter().zip(w).fold(V5::zeros(), |acc, (&i, &l)| acc + l * points[i])
}

/// Weights of the minimum-norm point of the affine hull of `points[set]`.
fn affine_min_norm(points: &[V5], set: &[usize]) -> Option<Vec<f64>> {
    let n = set.len();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] = points[set[a]].dot(&points[set[b]]);
        }
        m[(a, n)] = 1.0;
        m[(n, a)] = 1.0;
    }
    rhs[n] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(sol.iter().take(n).copied().collect())
}

/// Inradius of `conv(points)` around the origin, or `None` when the origin
/// is not an interior point. Facets are enumerated over all 5-subsets.
fn hull_inradius(points: &[V5]) -> Option<f64> {
    let m = points.len();
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let tol = 1e-10 * scale;
    let mut best = f64::INFINITY;
    let mut found = false;
    let mut idx = [0usize, 1, 2, 3, 4];
    loop {
        if let Some((n, b)) = hyperplane(points, &idx) {
            let mut pos = false;
            let mut neg = false;
            for p in points {
                let s = n.dot(p) - b;
                if s > tol {
                    pos = true;
                }
                if s < -tol {
                    neg = true;
                }
            }
            if !(pos && neg) {
                // supporting hyperplane; orient so the hull is below
                let (n, b) = if pos { (-n, -b) } else { (n, b) };
                let dist = b / n.norm();
                if dist <= tol {
                    return None;
                }
                found = true;
                best = best.min(dist);
            }
        }
        // next combination
        let mut i = 5;
        loop {
            if i == 0 {
                return if found { Some(best) } else { None };
            }
            i -= 1;
            if idx[i] < m - 5 + i {
                idx[i] += 1;
                for k in i + 1..5 {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Hyperplane `n·x = b` through five points, `None` when degenerate.
fn hyperplane(points: &[V5], idx: &[usize; 5]) -> Option<(V5, f64)> {
    let p0 = points[idx[0]];
    let diffs: Vec<V5> = idx[1..].iter().map(|&i| points[i] - p0).collect();
    let mut n = V5::zeros();
    for k in 0..5 {
        let mut minor = Matrix4::<f64>::zeros();
        for (r, d) in diffs.iter().enumerate() {
            let mut c = 0;
            for col in 0..5 {
                if col != k {
                    minor[(r, c)] = d[col];
                    c += 1;
                }
            }
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        n[k] = sign * minor.determinant();
    }
    let norm = n.norm();
    let scale: f64 = diffs.iter().map(|d| d.norm()).product();
    if norm <= 1e-12 * scale.max(1e-300) {
        return None;
    }
    let n = n / norm;
    Some((n, n.dot(&p0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_polytope_constants_match_facet_enumeration() {
        let g = Gauge::cross_polytope();
        let g2 = Gauge::new(g.directions().to_vec()).unwrap();
        assert!((g2.inradius() - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((g2.circumradius() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_sided_directions_are_rejected() {
        let mut dirs = Vec::new();
        for i in 0..5 {
            let mut e = V5::zeros();
            e[i] = 1.0;
            dirs.push(e);
        }
        dirs.push(V5::from_element(0.5));
        assert!(Gauge::new(dirs).is_err());
    }

    #[test]
    fn min_norm_point_of_simplex_face() {
        // hull of e1, e2 shifted away from origin; nearest point is midpoint
        let mut a = V5::zeros();
        a[0] = 1.0;
        a[2] = 1.0;
        let mut b = V5::zeros();
        b[1] = 1.0;
        b[2] = 1.0;
        let x = min_norm_point(&[a, b]);
        assert!((x - V5::new(0.5, 0.5, 1.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn projection_onto_cross_polytope() {
        let g = Gauge::cross_polytope();
        // inside: unchanged
        let w = V5::new(0.1, -0.2, 0.05, 0.0, 0.1);
        assert!((g.project_scaled(&w, 1.0) - w).norm() < 1e-14);
        // far along an axis: clipped to the vertex
        let w = V5::new(3.0, 0.0, 0.0, 0.0, 0.0);
        let p = g.project_scaled(&w, 2.0);
        assert!((p - V5::new(2.0, 0.0, 0.0, 0.0, 0.0)).norm() < 1e-13);
    }
}
