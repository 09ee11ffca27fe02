//! Equation parameters, initial profiles and the diagnostics run on them
//! before a simulation starts.

use std::fmt;
use std::sync::Arc;

use crate::mesh::Grid;
use crate::{Error, Result};

/// Exponents and coefficients of `u_t = u_xx + a |u|^(p-1) u - b |u_x|^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeParams {
    pub p: f64,
    pub q: f64,
    /// Reaction coefficient.
    pub a: f64,
    /// Gradient coefficient; zero turns the gradient term off.
    pub b: f64,
}

impl PdeParams {
    /// Parameters with `a = b = 1`, unvalidated.
    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q, a: 1.0, b: 1.0 }
    }

    pub fn with_coefficients(self, a: f64, b: f64) -> Self {
        Self { a, b, ..self }
    }

    /// Largest admissible gradient exponent, `2p / (p + 1)`.
    pub fn q_max(&self) -> f64 {
        2.0 * self.p / (self.p + 1.0)
    }

    /// `r = (2p - q(p+1)) / (2 - q)`, nonnegative on the admissible range.
    pub fn growth_exponent(&self) -> f64 {
        (2.0 * self.p - self.q * (self.p + 1.0)) / (2.0 - self.q)
    }

    /// Theoretical blow-up rate exponent `1 / (p - 1)`.
    pub fn rate_exponent(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    pub fn validate(self) -> Result<Self> {
        let Self { p, q, a, b } = self;
        for (name, v) in [("p", p), ("q", q), ("a", a), ("b", b)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite (got {v})")));
            }
        }
        if p <= 1.0 {
            return Err(Error::InvalidParameter(format!("p > 1 violated (got p = {p})")));
        }
        let q_max = self.q_max();
        if q < 1.0 || q > q_max {
            return Err(Error::InvalidParameter(format!(
                "1 <= q <= 2p/(p+1) = {q_max} violated (got q = {q})"
            )));
        }
        if a < 0.0 {
            return Err(Error::InvalidParameter(format!("a >= 0 violated (got a = {a})")));
        }
        if b < 0.0 {
            return Err(Error::InvalidParameter(format!("b >= 0 violated (got b = {b})")));
        }
        Ok(self)
    }
}

impl Default for PdeParams {
    fn default() -> Self {
        Self::new(3.0, 1.3)
    }
}

/// Initial profile `u_0` on `[-1, 1]`.
#[derive(Clone)]
pub enum InitialData {
    /// `amplitude * sin(pi (x + 1) / 2)`.
    Sine { amplitude: f64 },
    /// Piecewise-linear through `(x, u)` pairs sorted by `x`.
    Tabulated { x: Vec<f64>, u: Vec<f64> },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sine { amplitude } => f.debug_struct("Sine").field("amplitude", amplitude).finish(),
            Self::Tabulated { x, .. } => f.debug_struct("Tabulated").field("points", &x.len()).finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

pub fn build_sine_profile(amplitude: f64) -> Result<InitialData> {
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "amplitude > 0 violated (got {amplitude})"
        )));
    }
    Ok(InitialData::Sine { amplitude })
}

impl InitialData {
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::from_fn(|_| 0.0)
    }

    /// Builds a tabulated profile; `x` must be strictly increasing and span `[-1, 1]`.
    pub fn tabulated(x: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if x.len() != u.len() {
            return Err(Error::LengthMismatch { expected: x.len(), got: u.len() });
        }
        if x.len() < 2 {
            return Err(Error::InvalidParameter("profile needs at least two points".into()));
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("profile x values must be strictly increasing".into()));
        }
        if x[0] > -1.0 || x[x.len() - 1] < 1.0 {
            return Err(Error::InvalidParameter("profile x values must cover [-1, 1]".into()));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("profile values must be finite".into()));
        }
        Ok(Self::Tabulated { x, u })
    }

    pub fn amplitude(&self) -> Option<f64> {
        match self {
            Self::Sine { amplitude } => Some(*amplitude),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            // cos(pi x / 2) is the same function; it is exactly even in
            // floating point and vanishes exactly at the boundary here.
            Self::Sine { amplitude } => {
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (std::f64::consts::FRAC_PI_2 * x).cos()
                }
            }
            Self::Tabulated { x: xs, u } => {
                let k = xs.partition_point(|&xi| xi <= x);
                if k == 0 {
                    u[0]
                } else if k == xs.len() {
                    u[xs.len() - 1]
                } else {
                    let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                    u[k - 1] + w * (u[k] - u[k - 1])
                }
            }
            Self::Function(f) => f(x),
        }
    }

    /// Samples the profile at every node of `grid`, boundary included.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().map(|x| self.eval(x)).collect()
    }
}

/// Outcome of checking (A1)-(A5) on sampled nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    /// (A1) nonnegative and nonconstant.
    pub nonnegative_nonconstant: bool,
    /// (A2) `u(x) = u(-x)`.
    pub symmetric: bool,
    /// (A3) strictly increasing on `[-1, 0]`.
    pub increasing_left: bool,
    /// (A4) sup norm at or above the largeness threshold.
    pub large: bool,
    /// (A5) zero at both boundary nodes.
    pub boundary_zero: bool,
    pub sup_norm: f64,
    pub large_threshold: f64,
}

impl AssumptionReport {
    /// (A1)-(A3) and (A5): what the discrete invariants need.
    pub fn structural_ok(&self) -> bool {
        self.nonnegative_nonconstant && self.symmetric && self.increasing_left && self.boundary_zero
    }

    pub fn all_ok(&self) -> bool {
        self.structural_ok() && self.large
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.nonnegative_nonconstant {
            out.push("(A1) nonnegative and nonconstant");
        }
        if !self.symmetric {
            out.push("(A2) symmetric");
        }
        if !self.increasing_left {
            out.push("(A3) strictly increasing on [-1,0]");
        }
        if !self.large {
            out.push("(A4) large data");
        }
        if !self.boundary_zero {
            out.push("(A5) zero boundary values");
        }
        out
    }
}

pub const DEFAULT_LARGE_THRESHOLD: f64 = 1e2;

pub fn check_assumptions(data: &InitialData, grid: &Grid) -> AssumptionReport {
    check_assumptions_with(data, grid, DEFAULT_LARGE_THRESHOLD)
}

pub fn check_assumptions_with(data: &InitialData, grid: &Grid, large_threshold: f64) -> AssumptionReport {
    let u = data.sample(grid);
    let k = grid.intervals();
    let m = grid.mid();
    let sup = u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-12 * sup.max(f64::MIN_POSITIVE);

    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nonnegative_nonconstant = min >= 0.0 && max > min;
    let symmetric = (0..=m).all(|j| (u[j] - u[k - j]).abs() <= tol);
    let increasing_left = u[..=m].windows(2).all(|w| w[0] < w[1]);
    let boundary_zero = u[0].abs() <= tol && u[k].abs() <= tol;

    AssumptionReport {
        nonnegative_nonconstant,
        symmetric,
        increasing_left,
        large: sup >= large_threshold,
        boundary_zero,
        sup_norm: sup,
        large_threshold,
    }
}

/// Discrete energy `1/2 ||u_x||^2 - 1/(p+1) ||u||_{p+1}^{p+1}` with forward
/// differences and node quadrature. Negative values satisfy the
/// blow-up-sufficient energy condition.
pub fn discrete_energy(values: &[f64], grid: &Grid, params: &PdeParams) -> Result<f64> {
    let n = grid.node_count();
    if values.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: values.len() });
    }
    let h = grid.spacing();
    let gradient: f64 = values
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) / h;
            d * d
        })
        .sum::<f64>()
        * h
        / 2.0;
    let potential: f64 =
        values.iter().map(|v| v.abs().powf(params.p + 1.0)).sum::<f64>() * h / (params.p + 1.0);
    Ok(gradient - potential)
}
