//! Adaptive finite-difference solver for the one-dimensional Chipot-Weissler
//! equation
//!
//! ```text
//! u_t = u_xx + a |u|^(p-1) u - b |u_x|^q   on (-1, 1),   u(t, ±1) = 0
//! ```
//!
//! The solver uses a semi-implicit tridiagonal scheme whose time step and
//! grid spacing shrink with the running maximum of the solution. Under
//! nonnegative, symmetric, unimodal initial data the discrete solution stays
//! positive, symmetric and monotone on each half-interval, and its maximum
//! (always at `x = 0`) blows up in finite time for large data.
//!
//! Modules:
//! - [`problem`]: equation parameters, initial profiles, assumption checks, energy.
//! - [`mesh`]: adaptive step laws, midpoint-pinned grids, grid transfer.
//! - [`scheme`]: assembly and solution of one time step.
//! - [`driver`]: the time loop, blow-up time estimate, rate fit, damping comparison.
//! - [`cli`]: configuration and file output used by the `blowup` binary.

pub mod cli;
pub mod driver;
mod error;
pub mod mesh;
pub mod problem;
pub mod scheme;
mod sum;

pub use error::{Error, Result};
pub use sum::CompensatedSum;
