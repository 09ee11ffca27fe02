//! One step of the semi-implicit scheme
//!
//! ```text
//! (u_j' - u_j)/tau_n = (u_{j+1}' - 2u_j' + u_{j-1}')/h_n^2 + a u_j^p
//!                      - b/(2h_n)^q |u_{j+1} - u_{j-1}|^(q-1) |u_{j+1}' - u_{j-1}'|
//! ```
//!
//! where primes mark the new time level. The absolute value of the implicit
//! central difference is resolved with the sign of the explicit one, which
//! turns every step into a single tridiagonal solve. On monotone symmetric
//! states the resulting matrix is strictly diagonally dominant with margin
//! exactly one and has nonpositive off-diagonals.

use crate::mesh::{adapt_space_step, adapt_time_step, build_grid, regrid, Grid, MeshControl};
use crate::problem::{InitialData, PdeParams};
use crate::{CompensatedSum, Error, Result};

/// Relative tolerance (against `M_n`) used when checking the discrete invariants.
pub const INVARIANT_RTOL: f64 = 1e-12;

/// Solution at time level `n`, boundary nodes included.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    n: usize,
    time: CompensatedSum,
    grid: Grid,
    values: Vec<f64>,
    max: f64,
}

impl State {
    /// Samples `data` on `grid` at `t = 0`; boundary values are set to zero.
    pub fn initial(data: &InitialData, grid: Grid) -> Self {
        let mut values = data.sample(&grid);
        values[0] = 0.0;
        values[grid.intervals()] = 0.0;
        Self::assemble(0, CompensatedSum::new(), grid, values)
    }

    /// A state at step 0 from explicit node values, which must carry zero
    /// boundary values.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch { expected: grid.node_count(), got: values.len() });
        }
        if values[0] != 0.0 || values[grid.intervals()] != 0.0 {
            return Err(Error::InvalidParameter("boundary values must be zero".into()));
        }
        Ok(Self::assemble(0, CompensatedSum::new(), grid, values))
    }

    fn assemble(n: usize, time: CompensatedSum, grid: Grid, values: Vec<f64>) -> Self {
        let max = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Self { n, time, grid, values, max }
    }

    pub fn step(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.time.value()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `M_n = max_j |u_j^n|`.
    pub fn max_norm(&self) -> f64 {
        self.max
    }

    pub fn midpoint_value(&self) -> f64 {
        self.values[self.grid.mid()]
    }

    /// Same step and time, values transferred onto `grid`.
    pub fn regridded(&self, grid: Grid) -> Result<Self> {
        let values = regrid(&self.values, &self.grid, &grid)?;
        Ok(Self::assemble(self.n, self.time, grid, values))
    }

    pub fn defects(&self) -> InvariantDefects {
        let u = &self.values;
        let k = self.grid.intervals();
        let m = self.grid.mid();
        let min_value = u.iter().copied().fold(f64::INFINITY, f64::min);
        let symmetry = (1..m).map(|i| (u[m - i] - u[m + i]).abs()).fold(0.0, f64::max);
        let monotonicity = u[1..=m].windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let peak_gap = u.iter().map(|v| v - u[m]).fold(f64::NEG_INFINITY, f64::max);
        InvariantDefects {
            min_value,
            symmetry,
            monotonicity: if monotonicity.is_finite() { monotonicity } else { 0.0 },
            peak_gap,
            boundary: u[0].abs().max(u[k].abs()),
            scale: self.max,
        }
    }

    /// Positivity, symmetry, left-half monotonicity, maximum at the midpoint
    /// and zero boundary values, each to `INVARIANT_RTOL * M_n`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let d = self.defects();
        let tol = INVARIANT_RTOL * d.scale;
        if d.boundary != 0.0 {
            return Err(format!("boundary value {:e} is not zero", d.boundary));
        }
        if d.min_value < -tol {
            return Err(format!("positivity: min u = {:e} (M_n = {:e})", d.min_value, d.scale));
        }
        if d.symmetry > tol {
            return Err(format!("symmetry defect {:e} (M_n = {:e})", d.symmetry, d.scale));
        }
        if d.monotonicity < -tol {
            return Err(format!("monotonicity: left-half increment {:e} (M_n = {:e})", d.monotonicity, d.scale));
        }
        if d.peak_gap > tol {
            return Err(format!("maximum not at midpoint: exceeds u_m by {:e}", d.peak_gap));
        }
        Ok(())
    }
}

/// Measured departures from the discrete invariants, in absolute units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantDefects {
    /// Smallest node value.
    pub min_value: f64,
    /// `max_i |u_{m-i} - u_{m+i}|`.
    pub symmetry: f64,
    /// Smallest increment `u_{j+1} - u_j` for `1 <= j <= m-1`.
    pub monotonicity: f64,
    /// `max_j u_j - u_m`; nonpositive when the maximum sits at the midpoint.
    pub peak_gap: f64,
    pub boundary: f64,
    /// `M_n`.
    pub scale: f64,
}

/// Gradient coefficients `alpha_i`, one per interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCoeffs {
    pub alpha: Vec<f64>,
}

/// `alpha_i = b tau_n / (2 h_n)^q |u_{i+1} - u_{i-1}|^(q-1)`; zero wherever the
/// explicit central difference vanishes (this also fixes `|0|^0` for `q = 1`).
pub fn gradient_coefficients(state: &State, tau_n: f64, params: &PdeParams) -> GradientCoeffs {
    let u = state.values();
    let h = state.grid().spacing();
    let scale = params.b * tau_n / (2.0 * h).powf(params.q);
    let alpha = (1..u.len() - 1)
        .map(|i| {
            let d = (u[i + 1] - u[i - 1]).abs();
            if d == 0.0 || params.b == 0.0 {
                0.0
            } else {
                scale * d.powf(params.q - 1.0)
            }
        })
        .collect();
    GradientCoeffs { alpha }
}

/// Tridiagonal system `Q U' = V` over the interior nodes.
///
/// `sub[0]` and `sup[n-1]` hold the couplings to the two boundary nodes.
/// They multiply zero Dirichlet values, so the solver ignores them, but they
/// belong to the row stencil and count toward its dominance margin.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `|q_ii| - |sub_i| - |sup_i|` for each row stencil.
    pub fn dominance_margins(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.diag[i].abs() - self.sub[i].abs() - self.sup[i].abs())
            .collect()
    }

    /// `Q x` with the boundary couplings dropped.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }
}

pub fn assemble_system(
    state: &State,
    tau_n: f64,
    coeffs: &GradientCoeffs,
    params: &PdeParams,
) -> Result<TridiagonalSystem> {
    let u = state.values();
    let n = state.grid().interior();
    if coeffs.alpha.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: coeffs.alpha.len() });
    }
    let h = state.grid().spacing();
    let lambda = tau_n / (h * h);

    let mut sys = TridiagonalSystem {
        sub: Vec::with_capacity(n),
        diag: vec![1.0 + 2.0 * lambda; n],
        sup: Vec::with_capacity(n),
        rhs: Vec::with_capacity(n),
    };
    for (row, &alpha) in coeffs.alpha.iter().enumerate() {
        let j = row + 1;
        if alpha > lambda {
            return Err(Error::MeshLawViolated { row: j, alpha, lambda });
        }
        // |u'_{j+1} - u'_{j-1}| ~ s (u'_{j+1} - u'_{j-1}), s from the explicit difference
        let s = match (u[j + 1] - u[j - 1]).partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => -1.0,
            _ => 0.0,
        };
        sys.sub.push(-lambda - s * alpha);
        sys.sup.push(-lambda + s * alpha);
        let uj = u[j].max(0.0);
        sys.rhs.push(u[j] + tau_n * params.a * uj.powf(params.p));
    }
    Ok(sys)
}

/// Thomas algorithm. Stable without pivoting for diagonally dominant rows.
pub fn solve_tridiagonal(system: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = system.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    for v in [&system.sub, &system.sup, &system.rhs] {
        if v.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: v.len() });
        }
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = system.diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = system.diag[i] - system.sub[i] * c[i - 1];
        }
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::ZeroPivot(i));
        }
        c[i] = system.sup[i] / pivot;
        d[i] = if i > 0 {
            (system.rhs[i] - system.sub[i] * d[i - 1]) / pivot
        } else {
            system.rhs[0] / pivot
        };
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// One step on the state's own grid with a given `tau_n`, no adaptation.
pub fn advance_fixed_grid(state: &State, tau_n: f64, params: &PdeParams) -> Result<State> {
    let coeffs = gradient_coefficients(state, tau_n, params);
    let system = assemble_system(state, tau_n, &coeffs, params)?;
    let interior = solve_tridiagonal(&system)?;

    let mut values = Vec::with_capacity(interior.len() + 2);
    values.push(0.0);
    values.extend(interior);
    values.push(0.0);

    let mut time = state.time;
    time.add(tau_n);
    Ok(State::assemble(state.n + 1, time, state.grid, values))
}

/// Step sizes and grid chosen for the step leaving a state with maximum `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub tau_n: f64,
    pub h_candidate: f64,
    pub grid: Grid,
}

impl StepPlan {
    /// `lambda_n = tau_n / h_n^2` on the realized grid.
    pub fn lambda(&self) -> f64 {
        let h = self.grid.spacing();
        self.tau_n / (h * h)
    }
}

pub fn plan_step(m: f64, control: &MeshControl, params: &PdeParams) -> Result<StepPlan> {
    let tau_n = adapt_time_step(m, control, params);
    let h_candidate = adapt_space_step(m, control, params);
    let grid = build_grid(h_candidate)?;
    Ok(StepPlan { tau_n, h_candidate, grid })
}

/// Adapt the steps from `M_n`, move to the new grid, solve, and check the
/// discrete invariants on the result.
pub fn advance_step(state: &State, control: &MeshControl, params: &PdeParams) -> Result<State> {
    let plan = plan_step(state.max_norm(), control, params)?;
    advance_with_plan(state, &plan, control, params)
}

pub(crate) fn advance_with_plan(
    state: &State,
    plan: &StepPlan,
    control: &MeshControl,
    params: &PdeParams,
) -> Result<State> {
    if plan.tau_n < control.tau_floor {
        return Err(Error::ResolutionExhausted { tau: plan.tau_n, floor: control.tau_floor });
    }
    let staged = state.regridded(plan.grid)?;
    let next = advance_fixed_grid(&staged, plan.tau_n, params)?;
    next.check_invariants()
        .map_err(|what| Error::InvariantViolation { step: next.step(), what })?;
    Ok(next)
}
