//! Monotone time reparametrisations ("clocks") and the scenario/trajectory
//! transport along them.
//!
//! A clock is a strictly increasing map `tau(s)` from physical time on the
//! scenario horizon to trader time on `[0, tau_end]`, defined through its
//! rate `dtau/ds > 0`. Three nontrivial rates are supported:
//!
//! * **Almgren–Chriss**: `dtau/ds = sigma^2(s)` — volatility time.
//! * **First parameter**: `dtau/ds = sigma(s) sqrt(eta0) / (sigma0 sqrt(eta(s)))`
//!   — normalises the risk/impact ratio to its initial value.
//! * **Second parameter**: `dtau/ds = 1 / eta(s)` — makes the effective
//!   impact coefficient identically one, the form the Riccati solver wants.
//!
//! Under `tau`, the cost functional keeps its shape with effective
//! coefficients `eta_eff = eta * rate` and `sigma_eff^2 = sigma^2 / rate`,
//! so costs are frame-invariant term by term — a property the test suite
//! leans on heavily.
//!
//! The forward map is tabulated once (cumulative Gauss–Legendre over a fine
//! uniform grid, then monotone Hermite interpolation with exact slopes);
//! the inverse is a bracketed Newton iteration on that table. Both
//! directions round-trip to ~1e-12 of the horizon.

use std::sync::Arc;

use crate::model::{CostBreakdown, CostReport, Func, Scenario, Trajectory};
use crate::num::quad;
use crate::{Error, Result};

/// Number of knots in the tabulated forward map.
const TABLE_POINTS: usize = 4097;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockKind {
    /// `tau = s - t0` (useful as a do-nothing baseline).
    Identity,
    /// `dtau/ds = sigma^2(s)`.
    AlmgrenChriss,
    /// `dtau/ds = sigma(s) sqrt(eta0) / (sigma0 sqrt(eta(s)))`.
    FirstParameter,
    /// `dtau/ds = 1 / eta(s)`.
    SecondParameter,
}

/// A validated, invertible time reparametrisation.
#[derive(Clone)]
pub struct Clock {
    kind: ClockKind,
    s0: f64,
    s_end: f64,
    rate: Func,
    rate_prime: Func,
    s_grid: Vec<f64>,
    tau_grid: Vec<f64>,
    rate_grid: Vec<f64>,
}

impl std::fmt::Debug for Clock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Clock")
            .field("kind", &self.kind)
            .field("s_span", &(self.s0, self.s_end))
            .field("tau_end", &self.tau_end())
            .finish()
    }
}

/// Builds a clock for a scenario, validating that the rate is finite and
/// strictly positive across the horizon. The error names the first
/// offending time, since "volatility vanishes at s = …" is the actionable
/// message.
pub fn build_clock(kind: ClockKind, scenario: &Scenario) -> Result<Clock> {
    let (s0, s_end) = scenario.span();
    // Every coefficient family differentiates, so each rate ships with its
    // own derivative; trajectory pullback needs it for the chain rule.
    let (rate, rate_prime): (Func, Func) = match kind {
        ClockKind::Identity => (Arc::new(|_| 1.0), Arc::new(|_| 0.0)),
        ClockKind::AlmgrenChriss => {
            let sigma = scenario.sigma().clone();
            let sigma2 = sigma.clone();
            (
                Arc::new(move |s| {
                    let v = sigma.value(s);
                    v * v
                }),
                Arc::new(move |s| 2.0 * sigma2.value(s) * sigma2.derivative(s)),
            )
        }
        ClockKind::FirstParameter => {
            let eta = scenario.eta().clone();
            let sigma = scenario.sigma().clone();
            let eta0 = eta.value(s0);
            let sigma0 = sigma.value(s0);
            let norm = eta0.sqrt() / sigma0;
            let (eta2, sigma2) = (eta.clone(), sigma.clone());
            (
                Arc::new(move |s| norm * sigma.value(s) / eta.value(s).sqrt()),
                Arc::new(move |s| {
                    let e = eta2.value(s);
                    let root = e.sqrt();
                    norm * (sigma2.derivative(s) / root
                        - 0.5 * sigma2.value(s) * eta2.derivative(s) / (e * root))
                }),
            )
        }
        ClockKind::SecondParameter => {
            let eta = scenario.eta().clone();
            let eta2 = eta.clone();
            (
                Arc::new(move |s| 1.0 / eta.value(s)),
                Arc::new(move |s| {
                    let e = eta2.value(s);
                    -eta2.derivative(s) / (e * e)
                }),
            )
        }
    };

    let n = TABLE_POINTS;
    let h = (s_end - s0) / (n - 1) as f64;
    let mut s_grid = Vec::with_capacity(n);
    let mut rate_grid = Vec::with_capacity(n);
    for i in 0..n {
        let s = if i == n - 1 { s_end } else { s0 + h * i as f64 };
        let r = rate(s);
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::Clock(format!(
                "{kind:?} clock rate must be finite and positive, but rate({s}) = {r}"
            )));
        }
        s_grid.push(s);
        rate_grid.push(r);
    }

    let mut tau_grid = Vec::with_capacity(n);
    tau_grid.push(0.0);
    for i in 1..n {
        let inc = quad::gauss5(&|s| rate(s), s_grid[i - 1], s_grid[i]);
        let next = tau_grid[i - 1] + inc;
        if !(next > tau_grid[i - 1]) || !next.is_finite() {
            return Err(Error::Clock(format!(
                "{kind:?} clock failed to advance near s = {} (increment {inc})",
                s_grid[i]
            )));
        }
        tau_grid.push(next);
    }

    Ok(Clock {
        kind,
        s0,
        s_end,
        rate,
        rate_prime,
        s_grid,
        tau_grid,
        rate_grid,
    })
}

impl Clock {
    pub fn kind(&self) -> ClockKind {
        self.kind
    }

    /// Physical horizon the clock was built on.
    pub fn s_span(&self) -> (f64, f64) {
        (self.s0, self.s_end)
    }

    /// Trader-time length of the horizon; the trader span is `[0, tau_end]`.
    pub fn tau_end(&self) -> f64 {
        *self.tau_grid.last().unwrap()
    }

    /// `dtau/ds` at `s`.
    pub fn rate(&self, s: f64) -> f64 {
        (self.rate)(s)
    }

    /// `d^2 tau/ds^2` at `s` — the rate's own derivative.
    pub fn rate_prime(&self, s: f64) -> f64 {
        (self.rate_prime)(s)
    }

    fn cell_of_s(&self, s: f64) -> usize {
        let n = self.s_grid.len();
        if s <= self.s_grid[0] {
            0
        } else if s >= self.s_grid[n - 1] {
            n - 2
        } else {
            self.s_grid.partition_point(|&k| k <= s) - 1
        }
    }

    fn tau_hermite(&self, i: usize, s: f64) -> f64 {
        let h = self.s_grid[i + 1] - self.s_grid[i];
        let u = (s - self.s_grid[i]) / h;
        let (y0, y1) = (self.tau_grid[i], self.tau_grid[i + 1]);
        let (d0, d1) = (self.rate_grid[i], self.rate_grid[i + 1]);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * h * d0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * h * d1
    }

    fn tau_hermite_deriv(&self, i: usize, s: f64) -> f64 {
        let h = self.s_grid[i + 1] - self.s_grid[i];
        let u = (s - self.s_grid[i]) / h;
        let (y0, y1) = (self.tau_grid[i], self.tau_grid[i + 1]);
        let (d0, d1) = (self.rate_grid[i], self.rate_grid[i + 1]);
        let u2 = u * u;
        (6.0 * u2 - 6.0 * u) * (y0 - y1) / h
            + (3.0 * u2 - 4.0 * u + 1.0) * d0
            + (3.0 * u2 - 2.0 * u) * d1
    }

    /// Forward map `tau(s)`, clamped to the horizon. Grid knots (including
    /// both endpoints) are returned exactly.
    pub fn tau_at(&self, s: f64) -> f64 {
        if s <= self.s0 {
            return 0.0;
        }
        if s >= self.s_end {
            return self.tau_end();
        }
        let i = self.cell_of_s(s);
        self.tau_hermite(i, s)
    }

    /// Inverse map `s(tau)`, clamped to `[0, tau_end]`.
    pub fn s_at(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return self.s0;
        }
        let tau_end = self.tau_end();
        if tau >= tau_end {
            return self.s_end;
        }
        let n = self.tau_grid.len();
        let mut i = self.tau_grid.partition_point(|&t| t <= tau);
        i = i.clamp(1, n - 1) - 1;
        let (mut lo, mut hi) = (self.s_grid[i], self.s_grid[i + 1]);
        let (tlo, thi) = (self.tau_grid[i], self.tau_grid[i + 1]);
        // Linear seed, then Newton on the Hermite cell with a bracket guard.
        // Convergence is checked *before* the point moves: once the Newton
        // step is below rounding resolution the current iterate is the
        // answer, and nudging it (or falling back to a bisection midpoint)
        // would only walk away from it.
        let mut s = lo + (tau - tlo) / (thi - tlo) * (hi - lo);
        for _ in 0..8 {
            let f = self.tau_hermite(i, s) - tau;
            if f == 0.0 {
                return s;
            }
            let step = f / self.tau_hermite_deriv(i, s);
            if step.abs() <= 1e-15 * (self.s_end - self.s0) {
                return s;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let next = s - step;
            s = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        s
    }
}

/// A scenario transported into a clock's trader time: horizon
/// `[0, tau_end]`, effective impact `eta * rate` and effective squared
/// volatility `sigma^2 / rate`, both composed with the inverse map.
#[derive(Clone)]
pub struct EffectiveScenario {
    tau_end: f64,
    x0: f64,
    lambda: f64,
    eta_eff: Func,
    sigma2_eff: Func,
}

impl std::fmt::Debug for EffectiveScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EffectiveScenario")
            .field("tau_end", &self.tau_end)
            .field("x0", &self.x0)
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl EffectiveScenario {
    pub fn span(&self) -> (f64, f64) {
        (0.0, self.tau_end)
    }

    pub fn tau_end(&self) -> f64 {
        self.tau_end
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta_eff(&self, tau: f64) -> f64 {
        (self.eta_eff)(tau)
    }

    pub fn sigma2_eff(&self, tau: f64) -> f64 {
        (self.sigma2_eff)(tau)
    }

    /// Cost of a trader-time schedule under the effective coefficients,
    /// by adaptive quadrature. Equals the physical-frame cost of the
    /// pulled-back schedule (change of variables), which the tests assert.
    pub fn evaluate_cost(&self, trajectory: &Trajectory) -> Result<CostReport> {
        let (a, b) = trajectory.span();
        let tol = 1e-9 * self.tau_end.max(1.0);
        if a.abs() > tol || (b - self.tau_end).abs() > tol {
            return Err(Error::SpanMismatch(format!(
                "trajectory covers [{a}, {b}] but trader time runs over [0, {}]",
                self.tau_end
            )));
        }
        let impact = quad::integrate_default(
            |tau| {
                let d = trajectory.derivative(tau);
                (self.eta_eff)(tau) * d * d
            },
            a,
            b,
        )?;
        let (risk_value, risk_error) = if self.lambda == 0.0 {
            (0.0, 0.0)
        } else {
            let r = quad::integrate_default(
                |tau| {
                    let x = trajectory.value(tau);
                    (self.sigma2_eff)(tau) * x * x
                },
                a,
                b,
            )?;
            (self.lambda * r.value, self.lambda * r.abs_error)
        };
        Ok(CostReport {
            total: impact.value + risk_value,
            breakdown: Some(CostBreakdown {
                impact: impact.value,
                risk: risk_value,
            }),
            method: "quadrature(trader)".to_owned(),
            abs_error_estimate: impact.abs_error + risk_error,
        })
    }
}

/// Transports a scenario into the clock's trader time.
pub fn transform_scenario(clock: &Clock, scenario: &Scenario) -> Result<EffectiveScenario> {
    let (ca, cb) = clock.s_span();
    let (sa, sb) = scenario.span();
    let tol = 1e-9 * scenario.duration();
    if (ca - sa).abs() > tol || (cb - sb).abs() > tol {
        return Err(Error::SpanMismatch(format!(
            "clock was built on [{ca}, {cb}] but the scenario horizon is [{sa}, {sb}]"
        )));
    }
    let eta = scenario.eta().clone();
    let sigma = scenario.sigma().clone();
    let eta_eff: Func = {
        let clock = clock.clone();
        let eta = eta.clone();
        Arc::new(move |tau| {
            let s = clock.s_at(tau);
            eta.value(s) * clock.rate(s)
        })
    };
    let sigma2_eff: Func = {
        let clock = clock.clone();
        Arc::new(move |tau| {
            let s = clock.s_at(tau);
            let v = sigma.value(s);
            v * v / clock.rate(s)
        })
    };
    Ok(EffectiveScenario {
        tau_end: clock.tau_end(),
        x0: scenario.x0(),
        lambda: scenario.lambda(),
        eta_eff,
        sigma2_eff,
    })
}

/// Pulls a trader-time schedule back to physical time:
/// `x_s(s) = x_tau(tau(s))`, `dx/ds = dx/dtau * rate(s)`.
///
/// When the source schedule carries curvature, the chain rule propagates
/// it: `d2x/ds2 = d2x/dtau2 * rate^2 + dx/dtau * rate'`. Whatever defect
/// the trader-frame curvature carried survives the substitution, so
/// residual checks downstream keep their meaning.
pub fn pull_back_trajectory(clock: &Clock, trajectory: &Trajectory) -> Result<Trajectory> {
    let (a, b) = trajectory.span();
    let tau_end = clock.tau_end();
    let tol = 1e-9 * tau_end.max(1.0);
    if a.abs() > tol || (b - tau_end).abs() > tol {
        return Err(Error::SpanMismatch(format!(
            "trajectory covers [{a}, {b}] but the clock's trader time runs over [0, {tau_end}]"
        )));
    }
    let value: Func = {
        let clock = clock.clone();
        let traj = trajectory.clone();
        Arc::new(move |s| traj.value(clock.tau_at(s)))
    };
    let derivative: Func = {
        let clock = clock.clone();
        let traj = trajectory.clone();
        Arc::new(move |s| traj.derivative(clock.tau_at(s)) * clock.rate(s))
    };
    let second: Option<Func> = if trajectory.second_derivative(0.5 * (a + b)).is_some() {
        let clock = clock.clone();
        let traj = trajectory.clone();
        Some(Arc::new(move |s| {
            let tau = clock.tau_at(s);
            let r = clock.rate(s);
            let curvature = traj
                .second_derivative(tau)
                .expect("curvature probed at construction");
            curvature * r * r + traj.derivative(tau) * clock.rate_prime(s)
        }))
    } else {
        None
    };
    let start = trajectory.value(0.0);
    Trajectory::analytic(
        clock.s_span(),
        value,
        derivative,
        second,
        format!("{}/pullback", trajectory.method()),
        start,
        None,
    )
}
