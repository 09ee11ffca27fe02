//! Time loop and post-processing of a run.

use std::fmt;

use crate::mesh::{build_grid, MeshControl};
use crate::problem::{InitialData, PdeParams};
use crate::scheme::{advance_with_plan, plan_step, State};
use crate::{Error, Result};

/// One row of the run history: the state at step `n` and the steps chosen
/// to leave it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t_n: f64,
    pub tau_n: f64,
    pub h_n: f64,
    /// Interior node count `N_n`.
    pub n_interior: usize,
    pub m_n: f64,
}

impl StepRecord {
    pub fn lambda(&self) -> f64 {
        self.tau_n / (self.h_n * self.h_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Blowup,
    Decay,
    Inconclusive,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Blowup => "blow-up",
            Outcome::Decay => "decay",
            Outcome::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    /// `M_n >= M_stop`.
    ThresholdReached,
    /// `M_n < decay_fraction * M_0` after a non-increasing window.
    Decayed,
    IterationCap,
    /// The next `tau_n` would fall below the floor.
    ResolutionExhausted { tau: f64 },
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::ThresholdReached => f.write_str("M_n reached M_stop"),
            StopReason::Decayed => f.write_str("M_n decayed below the decay threshold"),
            StopReason::IterationCap => f.write_str("iteration cap reached"),
            StopReason::ResolutionExhausted { tau } => {
                write!(f, "time step {tau:e} fell below tau_floor")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Decay is declared once `M_n < decay_fraction * M_0`...
    pub decay_fraction: f64,
    /// ...and the last `decay_window` records are non-increasing.
    pub decay_window: usize,
    /// Keep a full profile every this many steps (0 keeps none). The final
    /// state is always kept when snapshots are on.
    pub snapshot_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            decay_fraction: 0.1,
            decay_window: 100,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub history: Vec<StepRecord>,
    pub final_state: State,
    pub outcome: Outcome,
    pub stop: StopReason,
    pub snapshots: Vec<State>,
    /// `M_0`.
    pub initial_max: f64,
}

impl RunResult {
    /// Step index and time at which the loop stopped.
    pub fn n_stop(&self) -> usize {
        self.final_state.step()
    }

    pub fn t_stop(&self) -> f64 {
        self.final_state.time()
    }
}

/// Samples `data` on the grid that the step laws pick for its maximum.
pub fn initial_state(data: &InitialData, params: &PdeParams, control: &MeshControl) -> Result<State> {
    let probe = State::initial(data, build_grid(control.h)?);
    let plan = plan_step(probe.max_norm(), control, params)?;
    Ok(State::initial(data, plan.grid))
}

pub fn run(data: &InitialData, params: &PdeParams, control: &MeshControl) -> Result<RunResult> {
    run_with(data, params, control, &RunOptions::default())
}

pub fn run_with(
    data: &InitialData,
    params: &PdeParams,
    control: &MeshControl,
    options: &RunOptions,
) -> Result<RunResult> {
    let params = params.validate()?;
    control.validate_resolution()?;

    let mut state = initial_state(data, &params, control)?;
    let m0 = state.max_norm();
    let mut history: Vec<StepRecord> = Vec::new();
    let mut snapshots = Vec::new();

    let (outcome, stop) = loop {
        let n = state.step();
        if n >= control.n_max {
            break (Outcome::Inconclusive, StopReason::IterationCap);
        }
        let plan = plan_step(state.max_norm(), control, &params)?;
        history.push(StepRecord {
            n,
            t_n: state.time(),
            tau_n: plan.tau_n,
            h_n: plan.grid.spacing(),
            n_interior: plan.grid.interior(),
            m_n: state.max_norm(),
        });
        if options.snapshot_every > 0 && n % options.snapshot_every == 0 {
            snapshots.push(state.clone());
        }
        if state.max_norm() >= control.m_stop {
            break (Outcome::Blowup, StopReason::ThresholdReached);
        }
        if has_decayed(&history, m0, options) {
            break (Outcome::Decay, StopReason::Decayed);
        }
        match advance_with_plan(&state, &plan, control, &params) {
            Ok(next) => state = next,
            Err(Error::ResolutionExhausted { tau, .. }) => {
                break (Outcome::Inconclusive, StopReason::ResolutionExhausted { tau });
            }
            Err(e) => return Err(e),
        }
    };

    if options.snapshot_every > 0 && snapshots.last().map(State::step) != Some(state.step()) {
        snapshots.push(state.clone());
    }

    Ok(RunResult {
        history,
        final_state: state,
        outcome,
        stop,
        snapshots,
        initial_max: m0,
    })
}

fn has_decayed(history: &[StepRecord], m0: f64, options: &RunOptions) -> bool {
    let Some(last) = history.last() else {
        return false;
    };
    if !(last.m_n < options.decay_fraction * m0) || history.len() < options.decay_window {
        return false;
    }
    history[history.len() - options.decay_window..]
        .windows(2)
        .all(|w| w[1].m_n <= w[0].m_n)
}

/// Geometric growth ratio `rho = (1 + tau) / (1 + tau 2^(-q/(2-q)) M_0^(-r))`
/// guaranteed per step for large data with unit reaction coefficient.
pub fn guaranteed_growth_ratio(m0: f64, params: &PdeParams, control: &MeshControl) -> Result<f64> {
    if params.a != 1.0 {
        return Err(Error::GrowthHypothesis(format!(
            "the growth ratio assumes a = 1 (got a = {})",
            params.a
        )));
    }
    if !(m0 >= 1.0) {
        return Err(Error::GrowthHypothesis(format!("M_0 >= 1 required (got {m0})")));
    }
    let q = params.q;
    let damping = 2f64.powf(-q / (2.0 - q)) * m0.powf(-params.growth_exponent());
    if damping >= 1.0 {
        return Err(Error::GrowthHypothesis(format!(
            "M_0 = {m0} too small: 2^(-q/(2-q)) M_0^(-r) = {damping} >= 1"
        )));
    }
    Ok((1.0 + control.tau) / (1.0 + control.tau * damping))
}

/// Minimum number of records needed by the blow-up time estimate and the rate fit.
pub const MIN_RECORDS: usize = 10;

/// Accumulated time plus the geometric tail of the remaining steps.
///
/// The last record's `tau_n` is the first step not yet taken, and successive
/// steps shrink by `rho^(-(p-1))` where `rho` is the last observed growth
/// ratio of `M_n`.
pub fn estimate_blowup_time(history: &[StepRecord], params: &PdeParams) -> Result<f64> {
    if history.len() < MIN_RECORDS {
        return Err(Error::NoBlowup(format!(
            "history has {} records, need at least {MIN_RECORDS}",
            history.len()
        )));
    }
    let last = history[history.len() - 1];
    let prev = history[history.len() - 2];
    let rho = last.m_n / prev.m_n;
    if !(rho > 1.0) || !rho.is_finite() || !(last.m_n > history[0].m_n) {
        return Err(Error::NoBlowup(format!("terminal growth ratio {rho} is not above 1")));
    }
    let shrink = rho.powf(-(params.p - 1.0));
    Ok(last.t_n + last.tau_n / (1.0 - shrink))
}

/// Closed range of `M_n` values used by the rate fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl FitWindow {
    /// `[10 M_0, M_stop / 10]`.
    pub fn for_run(m0: f64, m_stop: f64) -> Self {
        Self { lo: 10.0 * m0, hi: m_stop / 10.0 }
    }

    pub fn all() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, m: f64) -> bool {
        self.lo <= m && m <= self.hi
    }
}

/// `M(t) ~ C (T* - t)^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub c: f64,
    pub exponent: f64,
    pub points: usize,
}

impl RateFit {
    pub fn eval(&self, t_star: f64, t: f64) -> f64 {
        self.c * (t_star - t).powf(-self.exponent)
    }
}

/// Least-squares line through `(ln(T* - t_n), ln M_n)` over the window.
pub fn fit_blowup_rate(history: &[StepRecord], t_star: f64, window: FitWindow) -> Result<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = history
        .iter()
        .filter(|r| window.contains(r.m_n) && t_star > r.t_n && r.m_n > 0.0)
        .map(|r| ((t_star - r.t_n).ln(), r.m_n.ln()))
        .unzip();
    if xs.len() < MIN_RECORDS {
        return Err(Error::FitWindowTooSmall { got: xs.len(), need: MIN_RECORDS });
    }
    let (slope, intercept) = least_squares_line(&xs, &ys)
        .ok_or_else(|| Error::NoBlowup("degenerate fit abscissae".into()))?;
    Ok(RateFit {
        c: intercept.exp(),
        exponent: -slope,
        points: xs.len(),
    })
}

fn least_squares_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Per-run summary of the blow-up analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub outcome: Outcome,
    pub stop: StopReason,
    pub params: PdeParams,
    pub m0: f64,
    pub m_final: f64,
    pub n_stop: usize,
    pub t_stop: f64,
    pub t_star: Option<f64>,
    pub rate: Option<RateFit>,
    pub rho_min: Option<f64>,
    /// `(2p - q(p+1)) / (2 - q)`.
    pub r_exponent: f64,
    /// `1 / ((p-1) M_0^(p-1))`.
    pub t_star_lower_bound: f64,
    /// Why `t_star`, `rate` or `rho_min` is missing, if one is.
    pub notes: Vec<String>,
}

impl BlowupReport {
    pub fn from_run(result: &RunResult, params: &PdeParams, control: &MeshControl) -> Self {
        let m0 = result.initial_max;
        let mut notes = Vec::new();
        let (mut t_star, mut rate, mut rho_min) = (None, None, None);
        if result.outcome == Outcome::Blowup {
            match estimate_blowup_time(&result.history, params) {
                Ok(t) => {
                    t_star = Some(t);
                    let window = FitWindow::for_run(m0, control.m_stop);
                    match fit_blowup_rate(&result.history, t, window) {
                        Ok(f) => rate = Some(f),
                        Err(e) => notes.push(format!("rate fit skipped: {e}")),
                    }
                }
                Err(e) => notes.push(format!("blow-up time not estimated: {e}")),
            }
            match guaranteed_growth_ratio(m0, params, control) {
                Ok(r) => rho_min = Some(r),
                Err(e) => notes.push(format!("growth ratio unavailable: {e}")),
            }
        }
        Self {
            outcome: result.outcome,
            stop: result.stop,
            params: *params,
            m0,
            m_final: result.final_state.max_norm(),
            n_stop: result.n_stop(),
            t_stop: result.t_stop(),
            t_star,
            rate,
            rho_min,
            r_exponent: params.growth_exponent(),
            t_star_lower_bound: 1.0 / ((params.p - 1.0) * m0.powf(params.p - 1.0)),
            notes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DampingComparison {
    pub damped: RunResult,
    pub undamped: RunResult,
    pub damped_report: BlowupReport,
    pub undamped_report: BlowupReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingVerdict {
    /// Without the gradient term the run blows up in no more iterations and
    /// no more time.
    Confirmed,
    /// Both blow up but the ordering fails.
    Contradicted,
    OnlyUndampedBlowsUp,
    OnlyDampedBlowsUp,
    NoBlowupEither,
}

impl fmt::Display for DampingVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DampingVerdict::Confirmed => "damping confirmed: the gradient-free run blows up first",
            DampingVerdict::Contradicted => "damping not observed: the gradient-free run is not faster",
            DampingVerdict::OnlyUndampedBlowsUp => "only the gradient-free run blows up",
            DampingVerdict::OnlyDampedBlowsUp => "only the damped run blows up",
            DampingVerdict::NoBlowupEither => "no blow-up either",
        })
    }
}

impl DampingComparison {
    pub fn verdict(&self) -> DampingVerdict {
        match (self.damped.outcome, self.undamped.outcome) {
            (Outcome::Blowup, Outcome::Blowup) => {
                if self.fewer_iterations() && self.less_time() {
                    DampingVerdict::Confirmed
                } else {
                    DampingVerdict::Contradicted
                }
            }
            (Outcome::Blowup, _) => DampingVerdict::OnlyDampedBlowsUp,
            (_, Outcome::Blowup) => DampingVerdict::OnlyUndampedBlowsUp,
            _ => DampingVerdict::NoBlowupEither,
        }
    }

    /// `n_stop(b=0) <= n_stop(b)`.
    pub fn fewer_iterations(&self) -> bool {
        self.undamped.n_stop() <= self.damped.n_stop()
    }

    /// `T*(b=0) <= T*(b)`, falling back to accumulated time when either
    /// estimate is missing.
    pub fn less_time(&self) -> bool {
        match (self.undamped_report.t_star, self.damped_report.t_star) {
            (Some(u), Some(d)) => u <= d,
            _ => self.undamped.t_stop() <= self.damped.t_stop(),
        }
    }
}

/// Runs `params` as given and again with `b = 0`, concurrently.
pub fn compare_damping(
    data: &InitialData,
    params: &PdeParams,
    control: &MeshControl,
    options: &RunOptions,
) -> Result<DampingComparison> {
    let undamped_params = params.with_coefficients(params.a, 0.0);
    let (damped, undamped) = std::thread::scope(|s| {
        let h = s.spawn(|| run_with(data, &undamped_params, control, options));
        let damped = run_with(data, params, control, options);
        (damped, h.join().expect("undamped run panicked"))
    });
    let (damped, undamped) = (damped?, undamped?);
    Ok(DampingComparison {
        damped_report: BlowupReport::from_run(&damped, params, control),
        undamped_report: BlowupReport::from_run(&undamped, &undamped_params, control),
        damped,
        undamped,
    })
}

/// One independent run per initial profile, each on its own thread.
pub fn sweep(
    profiles: &[InitialData],
    params: &PdeParams,
    control: &MeshControl,
    options: &RunOptions,
) -> Vec<Result<RunResult>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = profiles
            .iter()
            .map(|d| s.spawn(move || run_with(d, params, control, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep run panicked"))
            .collect()
    })
}
