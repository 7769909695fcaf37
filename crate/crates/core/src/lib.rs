//! Growth-rate solvers for risk-sensitive reward maximization on finite
//! controlled Markov chains.
//!
//! The objective is the exponential growth rate
//!
//! ```text
//! λ = sup_x sup_controls liminf (1/N) log E[ exp(Σ_{m<N} r(X_m, U_m, X_{m+1})) | X_0 = x ]
//! ```
//!
//! Two independent routes compute it:
//!
//! - [`eigen`]: the nonlinear Perron–Frobenius eigenvalue ρ of the
//!   one-homogeneous operator `Tf(x) = max_u Σ_y p(y|x,u) e^{r(x,u,y)} f(y)`,
//!   with Collatz–Wielandt brackets as certificates; λ = log ρ.
//! - [`variational`]: the supremum over stationary occupation measures η of
//!   the concave objective `Ψ₀(η) = -Σ η̃(x,u) D(η₂(·|x,u) ‖ e^r p(·|x,u))`,
//!   together with the dual bound `max_x [log (T e^g)(x) - g(x)]`.
//!
//! [`montecarlo`] gives a statistical cross-check and [`generators`] builds the
//! three standard example families: path counting on directed graphs,
//! risk-adjusted portfolio growth, and slowest exit from a subset of states.
//!
//! Rewards are stored as weights `W = e^r`, so `r = -∞` is the exact value 0.
//!
//! The crate is `no_std` and needs only `alloc`. File formats and the
//! command-line front end live in the `riskgrowth-cli` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod ext;
pub mod linalg;

pub mod eigen;
pub mod generators;
pub mod model;
pub mod montecarlo;
pub mod variational;

pub use error::{Error, Result};
pub use ext::ExtReal;

pub use eigen::{
    apply_t, apply_tn, cw_bounds, enumerate_policy_gains, fixed_policy_gain, solve_eigen,
    EigenOptions, EigenSolution, PolicyTable,
};
pub use model::{validate, FeasibilityReport, MdpModel, Policy, PolicyKind, RowViolation};
pub use montecarlo::{estimate_growth, simulate, GrowthEstimate, McOptions, Trajectory};
pub use variational::{
    dual_bound, epsilon_model, epsilon_sweep, maximize, objective_psi0, random_feasible,
    relative_entropy, stationarity_residual, twisted_occupation, Certificate, EpsilonParams,
    MaximizeOptions, MaximizeOutcome, OccupationMeasure, SweepPoint,
};
