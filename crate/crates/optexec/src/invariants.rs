//! Ermakov-Pinney companion equation and its conserved quantity.
//!
//! For the linear equation `x'' = W(tau) x`, any positive solution of the
//! companion equation
//!
//! ```text
//! rho'' = W rho - 1/rho^3
//! ```
//!
//! furnishes the conserved quantity
//!
//! ```text
//! I = 1/2 [ (rho x' - x rho')^2 - (x / rho)^2 ],
//! ```
//!
//! which is constant along every solution `x` regardless of how `W` varies.
//! That makes `I` a solver-independent correctness check: integrate one
//! companion function, sample `I` along a computed trajectory, and any
//! integration or reconstruction bug shows up as drift.
//!
//! Sign conventions differ in the literature; with the opposite relative
//! sign (`rho'' + W rho - 1/rho^3 = 0`) the quantity above is stationary
//! only at the constant-coefficient equilibrium, not in general. Direct
//! differentiation fixes the convention used here, recorded in
//! [`SIGN_CONVENTION`] and asserted by a test that integrates the opposite
//! sign and watches conservation fail.

use crate::model::Trajectory;
use crate::num::rk::{self, RkOptions, StopReason};
use crate::riccati::CoefficientW;
use crate::{Error, Result};

/// The companion-equation sign integrated by this module.
pub const SIGN_CONVENTION: &str = "rho'' = W*rho - 1/rho^3 \
    (the sign under which I = [(rho x' - x rho')^2 - (x/rho)^2]/2 is \
    conserved along solutions of x'' = W*x; the opposite relative sign is \
    stationary only at constant-W equilibria)";

/// `rho` at or below this value is treated as a collapse.
pub const COLLAPSE_FLOOR: f64 = 1e-8;

/// Residual gate for [`ermakov_invariant`]: the trajectory must satisfy
/// `x'' = W x` to this (scaled) sup-norm before drift is meaningful.
pub const ON_SHELL_LIMIT: f64 = 1e-4;

/// A positive companion function `rho` with dense output, carrying the
/// coefficient it was integrated against and the sign convention used.
#[derive(Debug, Clone)]
pub struct PinneyWitness {
    span: (f64, f64),
    sol: rk::OdeSolution,
    w: CoefficientW,
    pub sign_convention: &'static str,
}

impl PinneyWitness {
    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// `rho(tau)`.
    pub fn value(&self, tau: f64) -> f64 {
        self.sol.eval_component(tau - self.span.0, 0)
    }

    /// `rho'(tau)`.
    pub fn derivative(&self, tau: f64) -> f64 {
        self.sol.eval_component(tau - self.span.0, 1)
    }

    /// The coefficient the witness was integrated against.
    pub fn coefficient(&self) -> &CoefficientW {
        &self.w
    }

    /// Sup of `|rho'' - W rho + 1/rho^3|` on a uniform grid, with `rho''`
    /// measured by differencing the dense output of `rho'` — a consistency
    /// check of integrator plus interpolant, not an echo of the right-hand
    /// side.
    pub fn residual_sup(&self, grid_points: usize) -> f64 {
        let (a, b) = self.span;
        let n = grid_points.max(3);
        let h = 1e-6 * (b - a);
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let tau = a + (b - a) * i as f64 / (n - 1) as f64;
            let rpp = (self.derivative(tau + h) - self.derivative(tau - h)) / (2.0 * h);
            let r = self.value(tau);
            let defect = (rpp - self.w.value(tau) * r + 1.0 / (r * r * r)).abs();
            worst = worst.max(defect);
        }
        worst
    }
}

/// Integrates the companion equation over the coefficient's span.
///
/// `init` is `(rho(tau0), rho'(tau0))` with `rho(tau0) > 0`; passing `None`
/// selects the equilibrium initialisation `rho = W(tau0)^{-1/4}`,
/// `rho' = 0`, which requires `W(tau0) > 0` and keeps the witness (and the
/// invariant) well-scaled. Collapse of `rho` toward zero is rejected with
/// the collapse time.
pub fn solve_pinney(w: &CoefficientW, init: Option<(f64, f64)>) -> Result<PinneyWitness> {
    let (a, b) = w.span();
    let (rho0, drho0) = match init {
        Some((r, d)) => {
            if !(r.is_finite() && r > 0.0) || !d.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "companion initial data must be finite with rho > 0, got ({r}, {d})"
                )));
            }
            (r, d)
        }
        None => {
            let w0 = w.value(a);
            if !(w0.is_finite() && w0 > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "equilibrium initialisation needs W(start) > 0, got W({a}) = {w0}; \
                     pass explicit initial data instead"
                )));
            }
            (w0.powf(-0.25), 0.0)
        }
    };

    let wf = w.clone();
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = wf.value(a + t) * y[0] - 1.0 / (y[0] * y[0] * y[0]);
    };
    let opts = RkOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        max_step: Some((b - a) / 256.0),
        ..RkOptions::default()
    };
    let sol = match rk::integrate(rhs, 0.0, b - a, &[rho0, drho0], &opts, |_t: f64, y: &[f64]| {
        y[0] <= COLLAPSE_FLOOR
    }) {
        Ok(sol) => sol,
        // The companion flow is smooth away from rho = 0, so a step-size
        // collapse can only mean rho is crashing into the singularity
        // faster than the floor check can catch it at an accepted knot.
        Err(crate::num::rk::RkError::StepUnderflow { t }) => {
            return Err(Error::PinneyCollapse {
                at: a + t,
                threshold: COLLAPSE_FLOOR,
            })
        }
        Err(e) => return Err(e.into()),
    };
    if let StopReason::Halted { t } = sol.stop() {
        return Err(Error::PinneyCollapse {
            at: a + t,
            threshold: COLLAPSE_FLOOR,
        });
    }
    Ok(PinneyWitness {
        span: (a, b),
        sol,
        w: w.clone(),
        sign_convention: SIGN_CONVENTION,
    })
}

/// Samples `I = [(rho x' - x rho')^2 - (x/rho)^2] / 2` on a uniform grid
/// for an *arbitrary* trajectory over the witness's span.
///
/// No on-shell check is performed: this is the raw diagnostic, useful for
/// demonstrating what `I` does off-shell (e.g. `x = rho` gives `I = -1/2`
/// identically even though `rho` solves the companion equation, not the
/// linear one). For a drift verdict use [`ermakov_invariant`].
pub fn ermakov_samples(
    witness: &PinneyWitness,
    trajectory: &Trajectory,
    grid_points: usize,
) -> Result<Vec<(f64, f64)>> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 sample points, got {grid_points}"
        )));
    }
    let (a, b) = witness.span();
    let (ta, tb) = trajectory.span();
    let tol = 1e-9 * (b - a).max(1.0);
    if (ta - a).abs() > tol || (tb - b).abs() > tol {
        return Err(Error::SpanMismatch(format!(
            "trajectory span [{ta}, {tb}] vs witness span [{a}, {b}]"
        )));
    }
    let mut samples = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let tau = a + (b - a) * i as f64 / (grid_points - 1) as f64;
        let x = trajectory.value(tau);
        let xp = trajectory.derivative(tau);
        let r = witness.value(tau);
        let rp = witness.derivative(tau);
        let wronskian = r * xp - x * rp;
        let ratio = x / r;
        samples.push((tau, 0.5 * (wronskian * wronskian - ratio * ratio)));
    }
    Ok(samples)
}

/// Drift report for the conserved quantity along an on-shell trajectory.
#[derive(Debug, Clone)]
pub struct ErmakovReport {
    pub samples: Vec<(f64, f64)>,
    pub median: f64,
    /// `(max I - min I) / (|median I| + 1e-300)`.
    pub drift: f64,
}

/// Samples the conserved quantity along a trajectory and reports its
/// relative drift.
///
/// The trajectory is first residual-checked against `x'' = W x` (central
/// differences where no analytic second derivative exists); off-shell
/// trajectories are rejected, because `I` is only conserved on solutions
/// and a drift verdict for anything else would be noise.
pub fn ermakov_invariant(
    witness: &PinneyWitness,
    trajectory: &Trajectory,
    grid_points: usize,
) -> Result<ErmakovReport> {
    let (a, b) = witness.span();
    let check_points = 1001;
    let h = (b - a) / (check_points - 1) as f64;
    let mut sup_resid = 0.0f64;
    let mut sup_scale = 0.0f64;
    for i in 1..check_points - 1 {
        let tau = a + h * i as f64;
        let x = trajectory.value(tau);
        let xpp = trajectory.second_derivative(tau).unwrap_or_else(|| {
            (trajectory.value(tau + h) - 2.0 * x + trajectory.value(tau - h)) / (h * h)
        });
        let wx = witness.w.value(tau) * x;
        sup_resid = sup_resid.max((xpp - wx).abs());
        sup_scale = sup_scale.max(wx.abs());
    }
    let limit = ON_SHELL_LIMIT * (1.0 + sup_scale);
    if sup_resid > limit {
        return Err(Error::OffShell {
            sup: sup_resid,
            limit,
        });
    }

    let samples = ermakov_samples(witness, trajectory, grid_points)?;
    let mut values: Vec<f64> = samples.iter().map(|&(_, v)| v).collect();
    values.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let median = values[values.len() / 2];
    let (min, max) = (values[0], values[values.len() - 1]);
    let drift = (max - min) / (median.abs() + 1e-300);
    Ok(ErmakovReport {
        samples,
        median,
        drift,
    })
}
