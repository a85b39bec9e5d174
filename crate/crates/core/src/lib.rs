//! Control-variate variance reduction for reversible MCMC samplers.
//!
//! Given a chain `X_0..X_{n-1}` and basis functions `G_j` whose one-step
//! expectations `PG_j` are known in closed form, the control variates
//! `U_j = G_j - PG_j` have mean zero under the target. Subtracting an
//! estimated linear combination of their averages from the ergodic average
//! of `F` reduces variance, and when the span of the `G_j` contains the
//! solution of the Poisson equation for `F` the asymptotic variance vanishes.
//!
//! * [`panel`] holds chain output and the evaluated control-variate panel.
//! * [`gaussian`] solves the Poisson equation exactly for random-scan Gibbs
//!   on a Gaussian target.
//! * [`coeff`] estimates the coefficients (`K`, `Gamma` and batch-means).
//! * [`samplers`] provides reversible kernels with bundled `PG` evaluators.
//! * [`experiments`] runs replications and reports variance-reduction factors.

// `!(x > 0.0)` is used on purpose so that NaN fails validation; index loops
// walk several parallel row buffers at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coeff;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod io;
pub mod linalg;
pub mod panel;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
pub use panel::{
    ergodic_average, evaluate_panel, BasisFunction, BasisSet, ControlVariatePanel, Functional, State, Trajectory,
};
pub use rng::RngStream;
