//! Adaptive step laws and the uniform, midpoint-pinned grids they produce.
//!
//! Both step sizes are recomputed every iteration from the current maximum
//! `M_n`:
//!
//! ```text
//! tau_n = tau * min(1, M_n^(1-p))
//! h_n   = min(h, (2 M_n^(1-q))^(1/(2-q)))
//! ```
//!
//! The spatial candidate is then rounded down to a grid with an even number
//! of intervals so that `x = 0` is always a node.

use crate::problem::PdeParams;
use crate::{Error, Result};

/// Upper bound (exclusive) on the base ratio `tau / h^2`.
pub const LAMBDA_MAX: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshControl {
    /// Base time unit.
    pub tau: f64,
    /// Base space unit.
    pub h: f64,
    /// Blow-up threshold on `M_n`.
    pub m_stop: f64,
    /// Smallest admissible `tau_n`.
    pub tau_floor: f64,
    /// Iteration cap.
    pub n_max: usize,
}

impl Default for MeshControl {
    fn default() -> Self {
        Self {
            tau: 1e-4,
            h: 0.2,
            m_stop: 1e6,
            tau_floor: 1e-16,
            n_max: 500_000,
        }
    }
}

impl MeshControl {
    /// `tau / h^2`, always recomputed from the base steps.
    pub fn lambda(&self) -> f64 {
        self.tau / (self.h * self.h)
    }

    /// Checks every field except the iteration cap.
    pub fn validate_resolution(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("h", self.h),
            ("M_stop", self.m_stop),
            ("tau_floor", self.tau_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} > 0 violated (got {v})")));
            }
        }
        if self.h > 1.0 {
            return Err(Error::InvalidParameter(format!("h <= 1 violated (got h = {})", self.h)));
        }
        let lambda = self.lambda();
        if !(lambda < LAMBDA_MAX) {
            return Err(Error::InvalidParameter(format!(
                "lambda = tau/h^2 < 1/16 violated (got {lambda})"
            )));
        }
        Ok(())
    }

    pub fn validate(self) -> Result<Self> {
        self.validate_resolution()?;
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max >= 1 violated (got 0)".into()));
        }
        Ok(self)
    }
}

/// `tau_n = tau * min(1, M^(1-p))`. Non-increasing in `m`.
pub fn adapt_time_step(m: f64, control: &MeshControl, params: &PdeParams) -> f64 {
    if m <= 1.0 {
        control.tau
    } else {
        control.tau * m.powf(1.0 - params.p)
    }
}

/// `min(h, (2 M^(1-q))^(1/(2-q)))`, the spacing bound that keeps the
/// gradient coefficients below the diffusion ratio.
pub fn adapt_space_step(m: f64, control: &MeshControl, params: &PdeParams) -> f64 {
    if m <= 0.0 {
        return control.h;
    }
    let bound = (2.0 * m.powf(1.0 - params.q)).powf(1.0 / (2.0 - params.q));
    control.h.min(bound)
}

/// Uniform grid on `[-1, 1]` with an even number `K` of intervals.
///
/// Nodes are `x_j = (2j - K) / K`, so `x_{K/2} = 0` and `x_{K-j} = -x_j`
/// hold exactly in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    intervals: usize,
}

impl Grid {
    pub fn with_intervals(k: usize) -> Result<Self> {
        if k < 4 || k % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid needs an even interval count >= 4 (got {k})"
            )));
        }
        Ok(Self { intervals: k })
    }

    /// `K`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// `h_n = 2 / K`.
    pub fn spacing(&self) -> f64 {
        2.0 / self.intervals as f64
    }

    /// Midpoint index `m = K / 2`.
    pub fn mid(&self) -> usize {
        self.intervals / 2
    }

    /// Interior node count `N_n = K - 1`.
    pub fn interior(&self) -> usize {
        self.intervals - 1
    }

    pub fn node_count(&self) -> usize {
        self.intervals + 1
    }

    pub fn node(&self, j: usize) -> f64 {
        let k = self.intervals as f64;
        (2.0 * j as f64 - k) / k
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(move |j| self.node(j))
    }
}

/// Rounds a spacing candidate to the grid with `K = 2 ceil(1 / h)` intervals
/// (at least 4), so the realized spacing never exceeds the candidate.
pub fn build_grid(h_candidate: f64) -> Result<Grid> {
    if !(h_candidate > 0.0 && h_candidate <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "grid spacing candidate must lie in (0, 1] (got {h_candidate})"
        )));
    }
    let half = (1.0 / h_candidate).ceil();
    if half > (usize::MAX / 4) as f64 {
        return Err(Error::InvalidParameter(format!(
            "grid spacing candidate {h_candidate} is too small"
        )));
    }
    Grid::with_intervals((2 * half as usize).max(4))
}

/// Transfers node values to `new_grid` by linear interpolation.
///
/// Only the left half `[-1, 0]` of the old values is read; the result is
/// mirrored onto `(0, 1]` and its boundary values are set to zero. Positions
/// are located with integer arithmetic, so nodes shared by both grids
/// (always including `x = 0`) are copied exactly.
pub fn regrid(old_values: &[f64], old_grid: &Grid, new_grid: &Grid) -> Result<Vec<f64>> {
    let ko = old_grid.intervals();
    if old_values.len() != ko + 1 {
        return Err(Error::LengthMismatch { expected: ko + 1, got: old_values.len() });
    }
    let kn = new_grid.intervals();
    let mn = new_grid.mid();
    let mut out = vec![0.0; kn + 1];
    for j in 1..=mn {
        // position in old-interval units: j * ko / kn
        let num = j * ko;
        let i = num / kn;
        let r = num % kn;
        out[j] = if r == 0 {
            old_values[i]
        } else {
            let w = r as f64 / kn as f64;
            old_values[i] + w * (old_values[i + 1] - old_values[i])
        };
    }
    for j in 1..mn {
        out[kn - j] = out[j];
    }
    Ok(out)
}
