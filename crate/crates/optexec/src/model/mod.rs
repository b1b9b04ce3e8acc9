//! Problem statement types and the two model-level measurements everything
//! else is judged against: the cost functional evaluated by quadrature and
//! the Euler–Lagrange residual of a candidate schedule.

mod coefficient;
mod cost;
mod scenario;
mod trajectory;

pub use coefficient::{CoefficientFunction, Tabulated};
pub use cost::{CostBreakdown, CostReport};
pub use scenario::{FrameLabel, Scenario};
pub use trajectory::{Func, Trajectory, BOUNDARY_RTOL};

use crate::num::quad;
use crate::{Error, Result};

/// Relative tolerance used when matching a trajectory's span to a
/// scenario's horizon.
fn check_spans_match(scenario: &Scenario, trajectory: &Trajectory) -> Result<()> {
    let (a, b) = scenario.span();
    let (ta, tb) = trajectory.span();
    let tol = 1e-9 * scenario.duration();
    if (a - ta).abs() > tol || (b - tb).abs() > tol {
        return Err(Error::SpanMismatch(format!(
            "trajectory covers [{ta}, {tb}] but the scenario horizon is [{a}, {b}]"
        )));
    }
    Ok(())
}

/// Evaluates the cost functional
/// `∫ eta x'^2 ds + lambda ∫ sigma^2 x^2 ds`
/// by adaptive quadrature, reporting both terms separately.
///
/// This is the reference measurement for every other cost computation in
/// the crate: boundary-data evaluations, closed forms, and the discrete
/// oracle are all compared against it. A non-convergent quadrature
/// surfaces as an error that still carries the best estimate obtained.
pub fn evaluate_cost(scenario: &Scenario, trajectory: &Trajectory) -> Result<CostReport> {
    check_spans_match(scenario, trajectory)?;
    let (a, b) = scenario.span();

    let impact = quad::integrate_default(
        |s| {
            let d = trajectory.derivative(s);
            scenario.eta().value(s) * d * d
        },
        a,
        b,
    )?;

    let lambda = scenario.lambda();
    let (risk_value, risk_error) = if lambda == 0.0 {
        (0.0, 0.0)
    } else {
        let r = quad::integrate_default(
            |s| {
                let x = trajectory.value(s);
                let sig = scenario.sigma().value(s);
                sig * sig * x * x
            },
            a,
            b,
        )?;
        (lambda * r.value, lambda * r.abs_error)
    };

    Ok(CostReport {
        total: impact.value + risk_value,
        breakdown: Some(CostBreakdown {
            impact: impact.value,
            risk: risk_value,
        }),
        method: "quadrature".to_owned(),
        abs_error_estimate: impact.abs_error + risk_error,
    })
}

/// Pointwise Euler–Lagrange residual of a candidate schedule.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// Largest `|r|` over the sampled interior points.
    pub sup: f64,
    /// `(s, r(s))` at the interior grid points.
    pub samples: Vec<(f64, f64)>,
}

/// Samples the residual
/// `r(s) = eta(s) x''(s) + eta'(s) x'(s) - lambda sigma(s)^2 x(s)`
/// at the interior points of a uniform grid with `grid_points` nodes.
///
/// An optimal schedule satisfies `r = 0`; the signed samples show where and
/// in which direction a candidate deviates. When the trajectory carries no
/// exact second derivative, curvature is estimated by a central difference
/// of the first derivative with the grid step — deliberately *not* by
/// solving the equation for `x''`, which would make this check vacuous.
pub fn el_residual(
    scenario: &Scenario,
    trajectory: &Trajectory,
    grid_points: usize,
) -> Result<ResidualReport> {
    if grid_points < 3 {
        return Err(Error::InvalidArgument(format!(
            "el_residual needs at least 3 grid points, got {grid_points}"
        )));
    }
    check_spans_match(scenario, trajectory)?;

    let (a, b) = scenario.span();
    let h = (b - a) / (grid_points - 1) as f64;
    let mut samples = Vec::with_capacity(grid_points - 2);
    let mut sup: f64 = 0.0;
    for i in 1..grid_points - 1 {
        let s = a + h * i as f64;
        let x = trajectory.value(s);
        let xp = trajectory.derivative(s);
        let xpp = trajectory.second_derivative(s).unwrap_or_else(|| {
            (trajectory.derivative(s + h) - trajectory.derivative(s - h)) / (2.0 * h)
        });
        let r = scenario.eta().value(s) * xpp + scenario.eta().derivative(s) * xp
            - scenario.lambda() * scenario.sigma().value(s).powi(2) * x;
        sup = sup.max(r.abs());
        samples.push((s, r));
    }
    Ok(ResidualReport { sup, samples })
}
