//! Scenario-level dispatch: route a scenario to the best available solver.
//!
//! Precedence in `Auto` mode is closed-form, then Riccati through the
//! unit-impact clock, then the discrete oracle — fastest exact path first,
//! with the oracle always available as a fallback. Forced methods skip the
//! fallback chain and surface their own failures.

use crate::closed_form::{detect_family, solve_closed_form, SolvableFamily};
use crate::model::{evaluate_cost, CostReport, Scenario, Trajectory};
use crate::oracle::solve_discrete;
use crate::reparam::{build_clock, pull_back_trajectory, ClockKind};
use crate::riccati::{coefficient_w, reconstruct, solve_riccati, RiccatiCondition, WFrame};
use crate::Result;

/// Solver selection for [`solve_scenario`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// closed-form, then Riccati, then oracle.
    Auto,
    ClosedForm,
    Riccati,
    Oracle,
}

/// A solved scenario: the trajectory on the scenario's own time axis, its
/// cost report, and the recognised family when the closed-form path ran.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trajectory: Trajectory,
    pub cost: CostReport,
    pub family: Option<SolvableFamily>,
}

impl SolveOutcome {
    /// The solver that produced this outcome: `"closed-form"`, `"riccati"`,
    /// or `"oracle"`.
    pub fn method(&self) -> &str {
        &self.cost.method
    }
}

fn solve_via_family(scenario: &Scenario, family: SolvableFamily) -> Result<SolveOutcome> {
    match family {
        SolvableFamily::ConstProductFamily { .. } => {
            // Detected from coefficients given on the scenario's own axis;
            // the family's closed form lives in the unit-impact clock, so
            // solve there and pull the trajectory back.
            let clock = build_clock(ClockKind::SecondParameter, scenario)?;
            let (traj_tau, mut cost) = solve_closed_form(
                &family,
                0.0,
                clock.tau_end(),
                scenario.x0(),
                scenario.lambda(),
            )?;
            let trajectory = pull_back_trajectory(&clock, &traj_tau)?;
            // Total, impact, and risk are all invariant under the
            // substitution; only the evaluation error budget widens.
            cost.abs_error_estimate += 1e-12 * cost.total.abs();
            Ok(SolveOutcome {
                trajectory,
                cost,
                family: Some(family),
            })
        }
        _ => {
            let (trajectory, cost) = solve_closed_form(
                &family,
                scenario.t0(),
                scenario.t_end(),
                scenario.x0(),
                scenario.lambda(),
            )?;
            Ok(SolveOutcome {
                trajectory,
                cost,
                family: Some(family),
            })
        }
    }
}

fn solve_via_riccati(scenario: &Scenario) -> Result<SolveOutcome> {
    let w = coefficient_w(scenario, WFrame::TauFrame)?;
    let sol = solve_riccati(&w, RiccatiCondition::default())?;
    let (a, b) = w.span();
    let (traj_tau, cost_tau) = reconstruct(&sol, scenario.x0(), a, b)?;
    let clock = w.clock().expect("tau-frame coefficient carries its clock");
    let trajectory = pull_back_trajectory(clock, &traj_tau)?;
    // The boundary formula gives the total; quadrature on the pulled-back
    // trajectory supplies the impact/risk split and an independent check
    // of the total, folded into the error estimate.
    let quadrature = evaluate_cost(scenario, &trajectory)?;
    let total = cost_tau.total;
    let abs_error_estimate = cost_tau.abs_error_estimate
        + (total - quadrature.total).abs()
        + quadrature.abs_error_estimate;
    Ok(SolveOutcome {
        trajectory,
        cost: CostReport {
            total,
            breakdown: quadrature.breakdown,
            method: "riccati".to_owned(),
            abs_error_estimate,
        },
        family: None,
    })
}

fn solve_via_oracle(scenario: &Scenario, grid: usize) -> Result<SolveOutcome> {
    let (trajectory, cost) = solve_discrete(scenario, grid)?;
    Ok(SolveOutcome {
        trajectory,
        cost,
        family: None,
    })
}

/// Solves a scenario with the requested method. `oracle_grid` is the
/// interval count used whenever the discrete oracle runs.
pub fn solve_scenario(
    scenario: &Scenario,
    method: Method,
    oracle_grid: usize,
) -> Result<SolveOutcome> {
    match method {
        Method::ClosedForm => match detect_family(scenario) {
            Some(family) => solve_via_family(scenario, family),
            None => Err(crate::Error::NoClosedForm),
        },
        Method::Riccati => solve_via_riccati(scenario),
        Method::Oracle => solve_via_oracle(scenario, oracle_grid),
        Method::Auto => {
            if let Some(family) = detect_family(scenario) {
                return solve_via_family(scenario, family);
            }
            match solve_via_riccati(scenario) {
                Ok(outcome) => Ok(outcome),
                Err(_) => solve_via_oracle(scenario, oracle_grid),
            }
        }
    }
}
