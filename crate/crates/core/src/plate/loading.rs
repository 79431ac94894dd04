//! Time-dependent Dirichlet data `u⁰(t,x') = s(t)·U(x')`, `v⁰(t,x') = s(t)·V(x')`
//! with polynomial shapes and a scalar time profile.

use std::fmt;

use crate::error::{Error, Result};

/// Polynomial in `(x1, x2)` stored as `(coefficient, power of x1, power of x2)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: Vec<(f64, u32, u32)>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn new(terms: Vec<(f64, u32, u32)>) -> Self {
        Polynomial {
            terms: terms.into_iter().filter(|t| t.0 != 0.0).collect(),
        }
    }

    pub fn monomial(c: f64, px: u32, py: u32) -> Self {
        Polynomial::new(vec![(c, px, py)])
    }

    pub fn terms(&self) -> &[(f64, u32, u32)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_degree(&self) -> (u32, u32) {
        self.terms
            .iter()
            .fold((0, 0), |(a, b), t| (a.max(t.1), b.max(t.2)))
    }

    /// Mixed derivative `∂1^dx ∂2^dy` at `(x, y)`.
    pub fn deriv(&self, dx: u32, dy: u32, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, px, py)| {
                if px < dx || py < dy {
                    return 0.0;
                }
                let fx: f64 = (0..dx).map(|k| (px - k) as f64).product();
                let fy: f64 = (0..dy).map(|k| (py - k) as f64).product();
                c * fx * fy * x.powi((px - dx) as i32) * y.powi((py - dy) as i32)
            })
            .sum()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.deriv(0, 0, x, y)
    }

    /// Parses sums of terms like `0.5*x1^2*x2 - 3e-2*x2 + 1`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() || compact == "0" {
            return Ok(Polynomial::zero());
        }
        let mut terms = Vec::new();
        let mut start = 0;
        let bytes = compact.as_bytes();
        let mut pieces = Vec::new();
        for i in 1..bytes.len() {
            let prev = bytes[i - 1];
            if (bytes[i] == b'+' || bytes[i] == b'-') && prev != b'e' && prev != b'E' && prev != b'^' {
                pieces.push(&compact[start..i]);
                start = i;
            }
        }
        pieces.push(&compact[start..]);
        for piece in pieces {
            let (sign, body) = match piece.as_bytes()[0] {
                b'+' => (1.0, &piece[1..]),
                b'-' => (-1.0, &piece[1..]),
                _ => (1.0, piece),
            };
            if body.is_empty() {
                return Err(format!("empty term in '{s}'"));
            }
            let mut coef = sign;
            let (mut px, mut py) = (0u32, 0u32);
            for factor in body.split('*') {
                let (base, pow) = match factor.split_once('^') {
                    Some((b, p)) => (
                        b,
                        p.parse::<u32>()
                            .map_err(|_| format!("bad exponent in '{factor}'"))?,
                    ),
                    None => (factor, 1),
                };
                match base {
                    "x1" | "x" => px += pow,
                    "x2" | "y" => py += pow,
                    num => {
                        let v: f64 = num
                            .parse()
                            .map_err(|_| format!("bad factor '{factor}'"))?;
                        coef *= v.powi(pow as i32);
                    }
                }
            }
            terms.push((coef, px, py));
        }
        Ok(Polynomial::new(terms))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, &(c, px, py)) in self.terms.iter().enumerate() {
            match (k, c < 0.0) {
                (0, _) => write!(f, "{c:e}")?,
                (_, true) => write!(f, " - {:e}", -c)?,
                (_, false) => write!(f, " + {c:e}")?,
            }
            if px > 0 {
                write!(f, "*x1^{px}")?;
            }
            if py > 0 {
                write!(f, "*x2^{py}")?;
            }
        }
        Ok(())
    }
}

/// One-sided evaluation of time derivatives at breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `s(t) = t / T`.
    Linear,
    /// `s(t) = min(t / t_ramp, 1)`.
    RampHold { t_ramp: f64 },
    /// Linear interpolation through `(t_k, s_k)`, constant outside.
    Piecewise { points: Vec<(f64, f64)> },
}

/// Monotone reparametrization `φ : [0,T] → [0,T]` of the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reparam {
    Square,
    SmoothStep,
}

impl Reparam {
    pub fn name(self) -> &'static str {
        match self {
            Reparam::Square => "square",
            Reparam::SmoothStep => "smoothstep",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "square" | "t2" => Some(Reparam::Square),
            "smoothstep" | "smooth-step" => Some(Reparam::SmoothStep),
            _ => None,
        }
    }

    pub fn apply(self, t: f64, horizon: f64) -> f64 {
        let x = t / horizon;
        match self {
            Reparam::Square => horizon * x * x,
            Reparam::SmoothStep => horizon * x * x * (3.0 - 2.0 * x),
        }
    }

    pub fn derivative(self, t: f64, horizon: f64) -> f64 {
        let x = t / horizon;
        match self {
            Reparam::Square => 2.0 * x,
            Reparam::SmoothStep => 6.0 * x * (1.0 - x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeProfile {
    pub kind: ProfileKind,
    pub horizon: f64,
    pub reparam: Option<Reparam>,
}

impl TimeProfile {
    pub fn new(kind: ProfileKind, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter("horizon T must be > 0".into()));
        }
        match &kind {
            ProfileKind::RampHold { t_ramp } if !(*t_ramp > 0.0) => {
                return Err(Error::InvalidParameter("t_ramp must be > 0".into()))
            }
            ProfileKind::Piecewise { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidParameter("piecewise profile needs points".into()));
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidParameter(
                        "piecewise breakpoints must be strictly increasing".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(TimeProfile {
            kind,
            horizon,
            reparam: None,
        })
    }

    pub fn linear(horizon: f64) -> Self {
        TimeProfile::new(ProfileKind::Linear, horizon).expect("positive horizon")
    }

    pub fn reparametrized(&self, r: Reparam) -> Self {
        TimeProfile {
            reparam: Some(r),
            ..self.clone()
        }
    }

    fn base(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Linear => t / self.horizon,
            ProfileKind::RampHold { t_ramp } => (t / t_ramp).min(1.0),
            ProfileKind::Piecewise { points } => {
                if t <= points[0].0 {
                    return points[0].1;
                }
                for w in points.windows(2) {
                    let ((t0, s0), (t1, s1)) = (w[0], w[1]);
                    if t <= t1 {
                        return s0 + (s1 - s0) * (t - t0) / (t1 - t0);
                    }
                }
                points[points.len() - 1].1
            }
        }
    }

    fn base_rate(&self, t: f64, side: Side) -> f64 {
        let after = side == Side::After;
        match &self.kind {
            ProfileKind::Linear => 1.0 / self.horizon,
            ProfileKind::RampHold { t_ramp } => {
                if t < *t_ramp || (t == *t_ramp && !after) {
                    1.0 / t_ramp
                } else {
                    0.0
                }
            }
            ProfileKind::Piecewise { points } => {
                for w in points.windows(2) {
                    let ((t0, s0), (t1, s1)) = (w[0], w[1]);
                    let inside = if after {
                        t >= t0 && t < t1
                    } else {
                        t > t0 && t <= t1
                    };
                    if inside {
                        return (s1 - s0) / (t1 - t0);
                    }
                }
                0.0
            }
        }
    }

    pub fn s(&self, t: f64) -> f64 {
        match self.reparam {
            Some(r) => self.base(r.apply(t, self.horizon)),
            None => self.base(t),
        }
    }

    pub fn ds(&self, t: f64, side: Side) -> f64 {
        match self.reparam {
            Some(r) => {
                self.base_rate(r.apply(t, self.horizon), side) * r.derivative(t, self.horizon)
            }
            None => self.base_rate(t, side),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadFamily {
    Stretch,
    Bend,
    MixedPoly,
}

impl LoadFamily {
    pub fn name(self) -> &'static str {
        match self {
            LoadFamily::Stretch => "stretch",
            LoadFamily::Bend => "bend",
            LoadFamily::MixedPoly => "mixed-poly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stretch" => Some(LoadFamily::Stretch),
            "bend" => Some(LoadFamily::Bend),
            "mixed-poly" | "mixed" => Some(LoadFamily::MixedPoly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrajectory {
    pub family: LoadFamily,
    pub u1: Polynomial,
    pub u2: Polynomial,
    pub v: Polynomial,
    pub profile: TimeProfile,
}

impl BoundaryTrajectory {
    /// `u⁰ = s(t)·(a·x1, 0)`.
    pub fn stretch(a: f64, profile: TimeProfile) -> Self {
        BoundaryTrajectory {
            family: LoadFamily::Stretch,
            u1: Polynomial::monomial(a, 1, 0),
            u2: Polynomial::zero(),
            v: Polynomial::zero(),
            profile,
        }
    }

    /// `v⁰ = s(t)·a·x1²`.
    pub fn bend(a: f64, profile: TimeProfile) -> Self {
        BoundaryTrajectory {
            family: LoadFamily::Bend,
            u1: Polynomial::zero(),
            u2: Polynomial::zero(),
            v: Polynomial::monomial(a, 2, 0),
            profile,
        }
    }

    pub fn mixed(u1: Polynomial, u2: Polynomial, v: Polynomial, profile: TimeProfile) -> Self {
        BoundaryTrajectory {
            family: LoadFamily::MixedPoly,
            u1,
            u2,
            v,
            profile,
        }
    }

    pub fn zero(horizon: f64) -> Self {
        BoundaryTrajectory::mixed(
            Polynomial::zero(),
            Polynomial::zero(),
            Polynomial::zero(),
            TimeProfile::linear(horizon),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.u1.is_zero() && self.u2.is_zero() && self.v.is_zero()
    }

    pub fn with_profile(&self, profile: TimeProfile) -> Self {
        BoundaryTrajectory {
            profile,
            ..self.clone()
        }
    }

    /// Nodal DOFs `(U1, U2, V, ∂1V, ∂2V, ∂12V)` of the spatial shape.
    pub fn shape_dofs(&self, x: f64, y: f64) -> [f64; 6] {
        [
            self.u1.eval(x, y),
            self.u2.eval(x, y),
            self.v.eval(x, y),
            self.v.deriv(1, 0, x, y),
            self.v.deriv(0, 1, x, y),
            self.v.deriv(1, 1, x, y),
        ]
    }
}
