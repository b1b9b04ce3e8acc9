//! Deterministic solver for optimal execution schedules under quadratic
//! temporary impact and quadratic inventory risk, with time-varying
//! coefficients.
//!
//! The central object is a [`Scenario`]: a liquidation horizon `[t0, T]`, an
//! initial position `x0`, a risk-aversion weight `lambda`, and two positive
//! coefficient curves — the impact coefficient `eta(s)` and the volatility
//! `sigma(s)`. The solver minimises
//!
//! ```text
//!     C[x] = ∫ ( eta(s) x'(s)^2 + lambda sigma(s)^2 x(s)^2 ) ds
//! ```
//!
//! over schedules with `x(t0) = x0` and `x(T) = 0`, and returns both the
//! optimal trajectory and its cost. Three solution methods are provided and
//! cross-checked against each other:
//!
//! * **Closed form** ([`closed_form`]) — a catalogue of coefficient families
//!   (constant, cosh-shaped, exponential, and product families in the
//!   trader's clock) whose optimisers are hyperbolic-function expressions.
//! * **Riccati reduction** ([`riccati`]) — after reparametrising time so the
//!   impact coefficient is one, the Euler–Lagrange equation becomes
//!   `x'' = W(τ) x`; its Riccati form is integrated backward from the
//!   liquidation endpoint and the schedule is reconstructed by quadrature.
//! * **Variational oracle** ([`oracle`]) — a direct second-order finite
//!   difference minimisation of the discretised cost, used as an independent
//!   check on everything else.
//!
//! Supporting modules: [`normal_form`] maps schedules to the normal form
//! `u = x sqrt(eta)` and evaluates costs from boundary data alone,
//! [`reparam`] builds monotone time reparametrisations ("clocks"),
//! [`invariants`] tracks an Ermakov–Lewis conserved quantity as an on-line
//! sanity check, and [`solve`] dispatches between methods. The `optexec`
//! binary (see [`cli`]) exposes `solve`, `verify`, and `sweep` subcommands.
//!
//! All computations are deterministic: rerunning any entry point on the same
//! input yields byte-identical output.

pub mod cli;
pub mod closed_form;
mod error;
pub mod invariants;
pub mod model;
pub mod normal_form;
pub mod num;
pub mod oracle;
pub mod reparam;
pub mod riccati;
pub mod solve;

pub use error::Error;
pub use model::{
    el_residual, evaluate_cost, CoefficientFunction, CostBreakdown, CostReport, FrameLabel,
    Scenario, Trajectory,
};
pub use solve::{solve_scenario, Method, SolveOutcome};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
