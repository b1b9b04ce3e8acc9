//! Normal form of the optimality equation and boundary-data cost
//! evaluation.
//!
//! Substituting `u = x sqrt(eta)` removes the first-derivative term from
//! the Euler–Lagrange equation, leaving `u'' = V(s) u` with the potential
//!
//! ```text
//!     V = eta''/(2 eta) + lambda sigma^2 / eta - eta'^2 / (4 eta^2).
//! ```
//!
//! For an optimal schedule, integrating the cost density by parts against
//! the equation collapses the whole integral onto boundary data:
//! `C = -eta(t0) x(t0) x'(t0)` (the liquidation end contributes nothing
//! since `x(T) = 0`). [`boundary_cost`] evaluates that in three frames and
//! guards it with an on-shell residual check — the collapse is *only* valid
//! for optimisers, so handing it a suboptimal schedule is an error, not a
//! wrong number.

use std::sync::Arc;

use crate::model::{el_residual, CoefficientFunction, CostReport, Func, Scenario, Trajectory};
use crate::reparam::{pull_back_trajectory, Clock};
use crate::{Error, Result};

/// Residual gate for boundary-data evaluation: sup-norm limit relative to
/// `max(1, |x(t0)|)`.
pub const ON_SHELL_LIMIT: f64 = 1e-4;
/// Grid used for the on-shell residual check.
const ON_SHELL_GRID: usize = 1001;

/// The potential `V(s)` of the normal form, with its three ingredients
/// exposed separately for diagnostics.
#[derive(Debug, Clone)]
pub struct NormalFormPotential {
    eta: CoefficientFunction,
    sigma: CoefficientFunction,
    lambda: f64,
    span: (f64, f64),
    tabulated_warning: bool,
}

impl NormalFormPotential {
    /// `eta''/(2 eta)` — impact curvature term.
    pub fn eta_curvature(&self, s: f64) -> f64 {
        self.eta.second_derivative(s) / (2.0 * self.eta.value(s))
    }

    /// `lambda sigma^2 / eta` — risk term.
    pub fn risk(&self, s: f64) -> f64 {
        let sig = self.sigma.value(s);
        self.lambda * sig * sig / self.eta.value(s)
    }

    /// `eta'^2 / (4 eta^2)` — squared logarithmic slope of the impact.
    pub fn eta_slope_sq(&self, s: f64) -> f64 {
        let e = self.eta.value(s);
        let ep = self.eta.derivative(s);
        ep * ep / (4.0 * e * e)
    }

    /// `V(s)` itself.
    pub fn value(&self, s: f64) -> f64 {
        self.eta_curvature(s) + self.risk(s) - self.eta_slope_sq(s)
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// True when a tabulated coefficient is involved: its second derivative
    /// comes from a piecewise-cubic interpolant and is only approximate.
    pub fn tabulated_warning(&self) -> bool {
        self.tabulated_warning
    }
}

/// Builds the normal-form potential of a scenario.
pub fn potential(scenario: &Scenario) -> NormalFormPotential {
    NormalFormPotential {
        eta: scenario.eta().clone(),
        sigma: scenario.sigma().clone(),
        lambda: scenario.lambda(),
        span: scenario.span(),
        tabulated_warning: scenario.eta().is_tabulated() || scenario.sigma().is_tabulated(),
    }
}

/// The same potential written through logarithmic coefficient profiles
/// `zeta1 = ln sqrt(eta/eta0)` and `zeta2 = ln (sigma/sigma0)`:
///
/// ```text
///     V = zeta1'' + zeta1'^2 + (lambda sigma0^2 / eta0) e^{2(zeta2 - zeta1)}.
/// ```
///
/// Algebraically identical to [`NormalFormPotential::value`]; computing both
/// and comparing is a useful cross-check of coefficient derivatives. The
/// normalisation requires `sigma(t0) > 0`.
pub fn potential_log_form(scenario: &Scenario) -> Result<Func> {
    let eta = scenario.eta().clone();
    let sigma = scenario.sigma().clone();
    let lambda = scenario.lambda();
    let t0 = scenario.t0();
    let eta0 = eta.value(t0);
    let sigma0 = sigma.value(t0);
    if sigma0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "the logarithmic form normalises by sigma(t0), which must be positive, got {sigma0}"
        )));
    }
    Ok(Arc::new(move |s: f64| {
        let e = eta.value(s);
        let ep = eta.derivative(s);
        let epp = eta.second_derivative(s);
        let zeta1_p = ep / (2.0 * e);
        let zeta1_pp = epp / (2.0 * e) - ep * ep / (2.0 * e * e);
        let sig = sigma.value(s);
        // e^{2(zeta2 - zeta1)} = (sigma/sigma0)^2 * (eta0/eta)
        let envelope = (sig / sigma0) * (sig / sigma0) * (eta0 / e);
        zeta1_pp + zeta1_p * zeta1_p + (lambda * sigma0 * sigma0 / eta0) * envelope
    }))
}

/// Maps a physical-frame schedule to the normal form, `u = x sqrt(eta)`.
///
/// The exact second derivative is propagated when the input has one; frame
/// maps never invent curvature.
pub fn x_to_u(trajectory: &Trajectory, scenario: &Scenario) -> Result<Trajectory> {
    let (a, b) = trajectory.span();
    let eta = scenario.eta().clone();
    let x = trajectory.clone();
    let value: Func = {
        let eta = eta.clone();
        let x = x.clone();
        Arc::new(move |s| x.value(s) * eta.value(s).sqrt())
    };
    let derivative: Func = {
        let eta = eta.clone();
        let x = x.clone();
        Arc::new(move |s| {
            let e = eta.value(s);
            let r = e.sqrt();
            x.derivative(s) * r + x.value(s) * eta.derivative(s) / (2.0 * r)
        })
    };
    let second: Option<Func> = if trajectory.second_derivative(a).is_some() {
        let eta = eta.clone();
        let x = x.clone();
        Some(Arc::new(move |s| {
            let e = eta.value(s);
            let r = e.sqrt();
            let ep = eta.derivative(s);
            let epp = eta.second_derivative(s);
            x.second_derivative(s).expect("second derivative present") * r
                + x.derivative(s) * ep / r
                + x.value(s) * (epp / (2.0 * r) - ep * ep / (4.0 * e * r))
        }))
    } else {
        None
    };
    let start = value(a);
    Trajectory::analytic(
        (a, b),
        value,
        derivative,
        second,
        format!("{}/x_to_u", trajectory.method()),
        start,
        None,
    )
}

/// Inverse of [`x_to_u`]: `x = u / sqrt(eta)`.
pub fn u_to_x(trajectory: &Trajectory, scenario: &Scenario) -> Result<Trajectory> {
    let (a, b) = trajectory.span();
    let eta = scenario.eta().clone();
    let u = trajectory.clone();
    let value: Func = {
        let eta = eta.clone();
        let u = u.clone();
        Arc::new(move |s| u.value(s) / eta.value(s).sqrt())
    };
    let derivative: Func = {
        let eta = eta.clone();
        let u = u.clone();
        Arc::new(move |s| {
            let e = eta.value(s);
            let r = e.sqrt();
            u.derivative(s) / r - u.value(s) * eta.derivative(s) / (2.0 * e * r)
        })
    };
    let second: Option<Func> = if trajectory.second_derivative(a).is_some() {
        let eta = eta.clone();
        let u = u.clone();
        Some(Arc::new(move |s| {
            let e = eta.value(s);
            let r = e.sqrt();
            let ep = eta.derivative(s);
            let epp = eta.second_derivative(s);
            u.second_derivative(s).expect("second derivative present") / r
                - u.derivative(s) * ep / (e * r)
                - u.value(s) * epp / (2.0 * e * r)
                + 0.75 * u.value(s) * ep * ep / (e * e * r)
        }))
    } else {
        None
    };
    let start = value(a);
    Trajectory::analytic(
        (a, b),
        value,
        derivative,
        second,
        format!("{}/u_to_x", trajectory.method()),
        start,
        None,
    )
}

/// Frame in which a schedule is handed to [`boundary_cost`].
pub enum CostFrame<'a> {
    /// Physical schedule `x(s)` on the scenario horizon.
    PhysicalX,
    /// Normal-form schedule `u(s) = x sqrt(eta)` on the scenario horizon.
    UFrame,
    /// Schedule in a clock's trader time, `x(tau)` on `[0, tau_end]`; the
    /// clock must have been built from the same scenario horizon.
    TraderTau(&'a Clock),
}

/// Evaluates the optimal cost from boundary data alone.
///
/// Physical frame: `C = -eta(t0) x(t0) x'(t0)`. Normal form picks up the
/// integration-by-parts boundary term of the substitution:
/// `C = -(u u' - u^2 eta'/(2 eta))` at `t0`. Trader frames evaluate
/// `C = -eta_eff(0) x(0) dx/dtau(0)` with the clock's effective impact.
///
/// The formula holds only on shell, so each frame first checks the
/// Euler–Lagrange residual (limit [`ON_SHELL_LIMIT`] relative to
/// `max(1, |x(t0)|)`) and refuses off-shell inputs. The report's error
/// estimate scales the measured residual by horizon length and position.
pub fn boundary_cost(
    trajectory: &Trajectory,
    scenario: &Scenario,
    frame: CostFrame<'_>,
) -> Result<CostReport> {
    let t0 = scenario.t0();
    let duration = scenario.duration();
    match frame {
        CostFrame::PhysicalX => {
            let residual = el_residual(scenario, trajectory, ON_SHELL_GRID)?;
            let scale = trajectory.start_value().abs().max(1.0);
            if residual.sup > ON_SHELL_LIMIT * scale {
                return Err(Error::OffShell {
                    sup: residual.sup,
                    limit: ON_SHELL_LIMIT * scale,
                });
            }
            let total =
                -scenario.eta().value(t0) * trajectory.value(t0) * trajectory.derivative(t0);
            Ok(CostReport {
                total,
                breakdown: None,
                method: "boundary(physical_x)".to_owned(),
                abs_error_estimate: residual.sup * duration * scale,
            })
        }
        CostFrame::UFrame => {
            let report = u_frame_residual(trajectory, scenario)?;
            let scale = trajectory.start_value().abs().max(1.0);
            if report.0 > ON_SHELL_LIMIT * scale {
                return Err(Error::OffShell {
                    sup: report.0,
                    limit: ON_SHELL_LIMIT * scale,
                });
            }
            let u0 = trajectory.value(t0);
            let u0p = trajectory.derivative(t0);
            let e0 = scenario.eta().value(t0);
            let e0p = scenario.eta().derivative(t0);
            let total = -(u0 * u0p - u0 * u0 * e0p / (2.0 * e0));
            Ok(CostReport {
                total,
                breakdown: None,
                method: "boundary(u_frame)".to_owned(),
                abs_error_estimate: report.0 * duration * scale,
            })
        }
        CostFrame::TraderTau(clock) => {
            let (ca, cb) = clock.s_span();
            let (sa, sb) = scenario.span();
            if (ca - sa).abs() > 1e-9 * duration || (cb - sb).abs() > 1e-9 * duration {
                return Err(Error::SpanMismatch(format!(
                    "clock was built on [{ca}, {cb}] but the scenario horizon is [{sa}, {sb}]"
                )));
            }
            // Check optimality in the physical frame, where the equation is
            // expressed directly by the scenario coefficients.
            let pulled = pull_back_trajectory(clock, trajectory)?;
            let residual = el_residual(scenario, &pulled, ON_SHELL_GRID)?;
            let scale = trajectory.start_value().abs().max(1.0);
            if residual.sup > ON_SHELL_LIMIT * scale {
                return Err(Error::OffShell {
                    sup: residual.sup,
                    limit: ON_SHELL_LIMIT * scale,
                });
            }
            let eta_eff0 = scenario.eta().value(t0) * clock.rate(t0);
            let total = -eta_eff0 * trajectory.value(0.0) * trajectory.derivative(0.0);
            Ok(CostReport {
                total,
                breakdown: None,
                method: "boundary(trader_tau)".to_owned(),
                abs_error_estimate: residual.sup * duration * scale,
            })
        }
    }
}

/// Sup norm (and grid step) of `u'' - V u` on the interior grid.
fn u_frame_residual(u: &Trajectory, scenario: &Scenario) -> Result<(f64, f64)> {
    let (a, b) = scenario.span();
    let (ua, ub) = u.span();
    if (a - ua).abs() > 1e-9 * (b - a) || (b - ub).abs() > 1e-9 * (b - a) {
        return Err(Error::SpanMismatch(format!(
            "normal-form trajectory covers [{ua}, {ub}] but the horizon is [{a}, {b}]"
        )));
    }
    let v = potential(scenario);
    let h = (b - a) / (ON_SHELL_GRID - 1) as f64;
    let mut sup: f64 = 0.0;
    for i in 1..ON_SHELL_GRID - 1 {
        let s = a + h * i as f64;
        let uu = u.value(s);
        let upp = u
            .second_derivative(s)
            .unwrap_or_else(|| (u.value(s + h) - 2.0 * uu + u.value(s - h)) / (h * h));
        sup = sup.max((upp - v.value(s) * uu).abs());
    }
    Ok((sup, h))
}
