//! Log-derivative (Riccati) reduction of the optimality equation.
//!
//! Any solution of the linear two-point problem `x'' = W(tau) x` can be
//! written through the log-derivative `F = y'/y` of *some* particular
//! solution `y`: `F` satisfies the first-order equation `F' + F^2 = W`, and
//! with `f` an antiderivative of `F` the pair `e^f`, `e^f ∫ e^{-2f}` spans
//! the solution space. The boundary-value solution with `x(tau0) = x0`,
//! `x(tauF) = 0` is
//!
//! ```text
//! x(tau) = x0 e^{f(tau)} ∫_tau^{tauF} e^{-2f} / ( e^{f(tau0)} ∫_{tau0}^{tauF} e^{-2f} )
//! ```
//!
//! and its cost in the unit-impact frame is
//! `x0^2 (e^{-2 f(tau0)} / ∫_{tau0}^{tauF} e^{-2f} - F(tau0))` — a formula
//! invariant under the choice of particular solution, which is what makes
//! the method usable with any non-diverging branch of the Riccati flow.
//!
//! The default branch integrates the terminal condition `F(tauF) = 0`
//! backward: when `W >= 0` (always the case for coefficient-derived `W`)
//! that branch provably stays in `(-sqrt(sup W), 0]` and cannot diverge.
//! Arbitrary user-supplied conditions may blow up in finite time; the
//! solution is then returned with the divergence time marked and
//! reconstruction refuses it.

use std::sync::Arc;

use crate::model::{CostReport, Func, Scenario, Trajectory};
use crate::normal_form;
use crate::num::quad;
use crate::num::rk::{self, OdeSolution, RkOptions, StopReason};
use crate::reparam::{build_clock, Clock, ClockKind};
use crate::{Error, Result};

/// `|F|` at which the Riccati flow is declared divergent.
pub const BLOW_UP_LIMIT: f64 = 1e8;

/// Grid used to pre-scan a coefficient for non-finite samples.
const SCAN_POINTS: usize = 1001;

/// Knot count of the cached cumulative `∫ e^{-2f}` table in [`reconstruct`].
const PSI_KNOTS: usize = 1025;

/// Which frame a Riccati coefficient was derived in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WFrame {
    /// `W(s)` is the normal-form potential of `u = x sqrt(eta)` in physical
    /// time; solutions live in the u-frame.
    UFrameS,
    /// `W(tau) = lambda sigma^2 eta` composed with the unit-impact clock;
    /// solutions live directly in trader time.
    TauFrame,
}

/// A coefficient `W` ready for [`solve_riccati`]: the callable, its span,
/// and (for the trader frame) the clock that maps back to physical time.
#[derive(Clone)]
pub struct CoefficientW {
    frame_name: &'static str,
    span: (f64, f64),
    w: Func,
    clock: Option<Clock>,
}

impl std::fmt::Debug for CoefficientW {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientW")
            .field("frame", &self.frame_name)
            .field("span", &self.span)
            .field("clock", &self.clock.as_ref().map(|c| c.kind()))
            .finish()
    }
}

impl CoefficientW {
    /// Wraps a user-supplied coefficient on an explicit span.
    pub fn direct(
        span: (f64, f64),
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !span.0.is_finite() || !span.1.is_finite() || span.1 <= span.0 {
            return Err(Error::InvalidArgument(format!(
                "coefficient span must be finite with end > start, got [{}, {}]",
                span.0, span.1
            )));
        }
        Ok(Self {
            frame_name: "direct",
            span,
            w: Arc::new(w),
            clock: None,
        })
    }

    pub fn value(&self, tau: f64) -> f64 {
        (self.w)(tau)
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// The clock attached to a trader-frame coefficient, if any.
    pub fn clock(&self) -> Option<&Clock> {
        self.clock.as_ref()
    }

    pub fn frame_name(&self) -> &'static str {
        self.frame_name
    }
}

/// Derives the Riccati coefficient of a scenario in the requested frame.
///
/// * `UFrameS`: the normal-form potential
///   `eta''/(2 eta) + lambda sigma^2/eta - (eta')^2/(4 eta^2)` on the
///   physical span.
/// * `TauFrame`: `lambda sigma^2(s(tau)) eta(s(tau))` on `[0, tauF]`, with
///   `s(tau)` the inverse of the unit-impact clock `d tau/d s = 1/eta`.
pub fn coefficient_w(scenario: &Scenario, frame: WFrame) -> Result<CoefficientW> {
    match frame {
        WFrame::UFrameS => {
            let potential = normal_form::potential(scenario);
            let span = potential.span();
            Ok(CoefficientW {
                frame_name: "u_frame_s",
                span,
                w: Arc::new(move |s| potential.value(s)),
                clock: None,
            })
        }
        WFrame::TauFrame => {
            let clock = build_clock(ClockKind::SecondParameter, scenario)?;
            let span = (0.0, clock.tau_end());
            let lambda = scenario.lambda();
            let eta = scenario.eta().clone();
            let sigma = scenario.sigma().clone();
            let inverse = clock.clone();
            Ok(CoefficientW {
                frame_name: "tau_frame",
                span,
                w: Arc::new(move |tau| {
                    let s = inverse.s_at(tau);
                    let sg = sigma.value(s);
                    lambda * sg * sg * eta.value(s)
                }),
                clock: Some(clock),
            })
        }
    }
}

/// Boundary condition for the Riccati flow: the value of `F` pinned at one
/// end of the span. The terminal-zero branch is the default because it is
/// divergence-free whenever `W >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiccatiCondition {
    /// `F(span.end) = c`, integrated backward.
    Terminal(f64),
    /// `F(span.start) = c`, integrated forward.
    Initial(f64),
}

impl Default for RiccatiCondition {
    fn default() -> Self {
        Self::Terminal(0.0)
    }
}

/// Dense-output solution of `F' + F^2 = W` together with the antiderivative
/// `f` normalised to `f(span.start) = 0`.
///
/// If the flow diverged before covering the span, `blow_up` holds the
/// divergence time and `covered` the sub-span on which `F`, `f` are
/// defined; reconstruction refuses such solutions.
#[derive(Clone)]
pub struct RiccatiSolution {
    span: (f64, f64),
    condition: RiccatiCondition,
    blow_up: Option<f64>,
    covered: (f64, f64),
    sol: OdeSolution,
    reversed: bool,
    f_shift: f64,
    w: Func,
}

impl std::fmt::Debug for RiccatiSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RiccatiSolution")
            .field("span", &self.span)
            .field("condition", &self.condition)
            .field("blow_up", &self.blow_up)
            .field("covered", &self.covered)
            .finish()
    }
}

impl RiccatiSolution {
    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn condition(&self) -> RiccatiCondition {
        self.condition
    }

    /// Time at which `|F|` crossed [`BLOW_UP_LIMIT`], if it did.
    pub fn blow_up(&self) -> Option<f64> {
        self.blow_up
    }

    /// Sub-span actually covered by the flow (equals `span` iff no blow-up).
    pub fn covered(&self) -> (f64, f64) {
        self.covered
    }

    fn internal_time(&self, tau: f64) -> f64 {
        if self.reversed {
            self.span.1 - tau
        } else {
            tau
        }
    }

    /// The log-derivative `F(tau)`.
    pub fn log_derivative(&self, tau: f64) -> f64 {
        self.sol.eval_component(self.internal_time(tau), 0)
    }

    /// The antiderivative `f(tau)` with `f` vanishing at the start of the
    /// covered span.
    pub fn antiderivative(&self, tau: f64) -> f64 {
        self.sol.eval_component(self.internal_time(tau), 1) - self.f_shift
    }

    /// Derivative of the dense-output `f` — should reproduce
    /// [`Self::log_derivative`] to interpolation accuracy.
    pub fn f_prime(&self, tau: f64) -> f64 {
        let d = self.sol.eval_deriv_component(self.internal_time(tau), 1);
        if self.reversed {
            -d
        } else {
            d
        }
    }

    /// Derivative of the dense-output `F` itself. Together with
    /// [`Self::log_derivative`] this exposes the flow's pointwise defect
    /// `F' + F^2 - W`, which is also how reconstructed trajectories report
    /// their curvature.
    pub fn log_derivative_prime(&self, tau: f64) -> f64 {
        let d = self.sol.eval_deriv_component(self.internal_time(tau), 0);
        if self.reversed {
            -d
        } else {
            d
        }
    }

    /// Sup of `|F' + F^2 - W|` over a uniform grid on the covered span.
    pub fn max_defect(&self, grid_points: usize) -> f64 {
        let (a, b) = self.covered;
        let n = grid_points.max(2);
        let mut worst = 0.0f64;
        for i in 0..n {
            let tau = a + (b - a) * i as f64 / (n - 1) as f64;
            let fp = self.log_derivative_prime(tau);
            let fv = self.log_derivative(tau);
            let defect = (fp + fv * fv - (self.w)(tau)).abs();
            worst = worst.max(defect);
        }
        worst
    }
}

/// Integrates the Riccati flow for `w` under the given boundary condition.
///
/// Divergence is not an error here: the returned solution is marked with
/// the blow-up time and covers only the sub-span up to it. Errors are
/// reserved for non-finite coefficients and malformed conditions.
pub fn solve_riccati(w: &CoefficientW, condition: RiccatiCondition) -> Result<RiccatiSolution> {
    let (a, b) = w.span();
    // Pre-scan for non-finite samples so the failure names a location
    // instead of surfacing as a step-size collapse deep in the integrator.
    for i in 0..SCAN_POINTS {
        let tau = a + (b - a) * i as f64 / (SCAN_POINTS - 1) as f64;
        let v = w.value(tau);
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "coefficient W({tau}) = {v} is not finite"
            )));
        }
    }
    let c = match condition {
        RiccatiCondition::Terminal(c) | RiccatiCondition::Initial(c) => c,
    };
    if !c.is_finite() || c.abs() >= BLOW_UP_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "condition value must be finite with |c| < {BLOW_UP_LIMIT:e}, got {c}"
        )));
    }

    let len = b - a;
    let reversed = matches!(condition, RiccatiCondition::Terminal(_));
    let wf = w.w.clone();
    // State y = [F, f]. Backward integration runs in ς = tauF - tau, where
    // dF/dς = F² - W and df/dς = -F; forward runs in tau directly.
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        if reversed {
            let tau = b - t;
            dy[0] = y[0] * y[0] - wf(tau);
            dy[1] = -y[0];
        } else {
            let tau = a + t;
            dy[0] = wf(tau) - y[0] * y[0];
            dy[1] = y[0];
        }
    };
    // The step cap is set by the dense output, not the integrator: cubic
    // Hermite interpolation carries an O(h^3) derivative error, and the
    // antiderivative's dense derivative must reproduce F to 1e-10 pointwise.
    // span/2048 puts that error near 1e-12 at negligible extra cost.
    let opts = RkOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        max_step: Some(len / 2048.0),
        ..RkOptions::default()
    };
    let sol = rk::integrate(rhs, 0.0, len, &[c, 0.0], &opts, |_t: f64, y: &[f64]| {
        y[0].abs() >= BLOW_UP_LIMIT
    })?;

    let (blow_up, covered) = match sol.stop() {
        StopReason::SpanCovered => (None, (a, b)),
        StopReason::Halted { t } => {
            if reversed {
                (Some(b - t), (b - t, b))
            } else {
                (Some(a + t), (a, a + t))
            }
        }
    };
    // Normalise f to zero at the start of the covered span. For the
    // backward branch that is the far end of the internal time axis.
    let f_shift = if reversed {
        let t_far = sol.knots().last().copied().unwrap_or(0.0);
        sol.eval_component(t_far, 1)
    } else {
        0.0
    };
    Ok(RiccatiSolution {
        span: (a, b),
        condition,
        blow_up,
        covered,
        sol,
        reversed,
        f_shift,
        w: w.w.clone(),
    })
}

/// Cumulative table of `∫ e^{-2 f_rel}` with exact slopes at the knots;
/// increments are computed by adaptive quadrature over the dense output so
/// the integral and the interpolated `f` stay mutually consistent.
#[derive(Debug)]
struct PsiTable {
    taus: Vec<f64>,
    vals: Vec<f64>,
    slopes: Vec<f64>,
    cap: f64,
    accumulated_error: f64,
}

impl PsiTable {
    fn build(g: impl Fn(f64) -> f64 + Copy, a: f64, b: f64) -> Result<Self> {
        let n = PSI_KNOTS;
        let mut taus = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        let mut err = 0.0;
        for i in 0..n {
            let tau = if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            };
            taus.push(tau);
            slopes.push(g(tau));
            if i == 0 {
                vals.push(0.0);
            } else {
                let q = quad::integrate_default(g, taus[i - 1], tau)?;
                let prev = vals[i - 1];
                vals.push(prev + q.value);
                err += q.abs_error;
            }
        }
        let cap = *vals.last().unwrap();
        Ok(Self {
            taus,
            vals,
            slopes,
            cap,
            accumulated_error: err,
        })
    }

    fn value_at(&self, tau: f64) -> f64 {
        let n = self.taus.len();
        if tau <= self.taus[0] {
            return 0.0;
        }
        if tau >= self.taus[n - 1] {
            return self.cap;
        }
        let i = self.taus.partition_point(|&k| k <= tau) - 1;
        let h = self.taus[i + 1] - self.taus[i];
        let u = (tau - self.taus[i]) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * self.vals[i]
            + (u3 - 2.0 * u2 + u) * h * self.slopes[i]
            + (-2.0 * u3 + 3.0 * u2) * self.vals[i + 1]
            + (u3 - u2) * h * self.slopes[i + 1]
    }
}

/// Reconstructs the boundary-value trajectory on `[tau0, tauF]` from a
/// divergence-free Riccati solution covering it, along with its cost in the
/// solution's own frame (unit impact): `x0^2 (1/D - F(tau0))` with
/// `D = ∫_{tau0}^{tauF} e^{-2(f - f(tau0))}`.
///
/// The impact/risk split is not computed here — it needs the scenario's
/// coefficients, which this representation has deliberately forgotten; the
/// caller can price the returned trajectory with `evaluate_cost`.
pub fn reconstruct(
    riccati: &RiccatiSolution,
    x0: f64,
    tau0: f64,
    tau_f: f64,
) -> Result<(Trajectory, CostReport)> {
    if let Some(at) = riccati.blow_up() {
        return Err(Error::RiccatiBlowUp { at });
    }
    if !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("x0 must be finite, got {x0}")));
    }
    let (a, b) = riccati.covered();
    let tol = 1e-9 * (b - a).max(1.0);
    if !(tau_f > tau0) || tau0 < a - tol || tau_f > b + tol {
        return Err(Error::InvalidArgument(format!(
            "[{tau0}, {tau_f}] must be an ordered sub-span of the covered [{a}, {b}]"
        )));
    }
    let tau0 = tau0.max(a);
    let tau_f = tau_f.min(b);

    if x0 == 0.0 {
        let zero: Func = Arc::new(|_| 0.0);
        let trajectory = Trajectory::analytic(
            (tau0, tau_f),
            zero.clone(),
            zero.clone(),
            Some(zero),
            "riccati",
            0.0,
            Some(0.0),
        )?;
        return Ok((
            trajectory,
            CostReport {
                total: 0.0,
                breakdown: None,
                method: "riccati".to_owned(),
                abs_error_estimate: 0.0,
            },
        ));
    }

    let ric = Arc::new(riccati.clone());
    let f0 = ric.antiderivative(tau0);
    let f_rel = {
        let ric = ric.clone();
        move |tau: f64| ric.antiderivative(tau) - f0
    };
    let g = {
        let f_rel = f_rel.clone();
        move |tau: f64| (-2.0 * f_rel(tau)).exp()
    };
    let table = Arc::new(PsiTable::build(&g, tau0, tau_f)?);
    let d = table.cap;
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degenerate representation integral D = {d}"
        )));
    }
    let f_at_tau0 = ric.log_derivative(tau0);
    let total = x0 * x0 * (1.0 / d - f_at_tau0);
    let abs_error_estimate = x0 * x0 * table.accumulated_error / (d * d) + 1e-13 * total.abs();

    let value: Func = {
        let f_rel = f_rel.clone();
        let table = table.clone();
        Arc::new(move |tau| x0 * f_rel(tau).exp() * (d - table.value_at(tau)) / d)
    };
    // x' = x0 e^{f_rel} (F (D - Psi) - e^{-2 f_rel}) / D by the product rule.
    let derivative: Func = {
        let ric = ric.clone();
        let table = table.clone();
        Arc::new(move |tau| {
            let fr = ric.antiderivative(tau) - f0;
            x0 * fr.exp() * (ric.log_derivative(tau) * (d - table.value_at(tau)) - (-2.0 * fr).exp())
                / d
        })
    };
    // x'' = x0 e^{f_rel} (F' + F^2)(D - Psi) / D: differentiating x' once
    // more cancels every e^{-2 f_rel} term. F' is read off the dense output
    // itself rather than substituted from the flow equation, so residual
    // checks against the trajectory measure the integrator's actual defect
    // instead of echoing the identity the flow was built to satisfy.
    let second: Func = {
        let ric = ric.clone();
        let table = table.clone();
        Arc::new(move |tau| {
            let fv = ric.log_derivative(tau);
            let fp = ric.log_derivative_prime(tau);
            x0 * (ric.antiderivative(tau) - f0).exp() * (fp + fv * fv) * (d - table.value_at(tau))
                / d
        })
    };
    let trajectory = Trajectory::analytic(
        (tau0, tau_f),
        value,
        derivative,
        Some(second),
        "riccati",
        x0,
        Some(0.0),
    )?;
    Ok((
        trajectory,
        CostReport {
            total,
            breakdown: None,
            method: "riccati".to_owned(),
            abs_error_estimate,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientFunction, FrameLabel};

    fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn constant_terminal_branch_is_minus_tanh() {
        let w = CoefficientW::direct((0.0, 1.0), |_| 1.0).unwrap();
        let sol = solve_riccati(&w, RiccatiCondition::default()).unwrap();
        assert!(sol.blow_up().is_none());
        assert!((sol.log_derivative(0.0) + (1.0f64).tanh()).abs() <= 1e-10);
        assert!((sol.log_derivative(0.0) + 0.76159415595576489).abs() <= 1e-10);
        for tau in grid(0.0, 1.0, 101) {
            assert!((sol.log_derivative(tau) + (1.0 - tau).tanh()).abs() <= 1e-9);
        }
        assert!(sol.max_defect(1001) <= 1e-8 * 2.0);
    }

    #[test]
    fn antiderivative_is_normalised_and_differentiates_back_to_f() {
        let w = CoefficientW::direct((0.0, 1.0), |tau| 1.0 + tau * tau).unwrap();
        for cond in [
            RiccatiCondition::Terminal(0.0),
            RiccatiCondition::Initial(0.0),
        ] {
            let sol = solve_riccati(&w, cond).unwrap();
            assert!(sol.antiderivative(0.0).abs() <= 1e-12);
            for tau in grid(0.0, 1.0, 101) {
                assert!(
                    (sol.f_prime(tau) - sol.log_derivative(tau)).abs() <= 1e-10,
                    "f' != F at {tau} under {cond:?}"
                );
            }
        }
    }

    #[test]
    fn zero_coefficient_gives_zero_flow_and_linear_reconstruction() {
        let w = CoefficientW::direct((0.0, 2.0), |_| 0.0).unwrap();
        let sol = solve_riccati(&w, RiccatiCondition::default()).unwrap();
        for tau in grid(0.0, 2.0, 41) {
            assert!(sol.log_derivative(tau).abs() <= 1e-12);
            assert!(sol.antiderivative(tau).abs() <= 1e-12);
        }
        let (traj, cost) = reconstruct(&sol, 3.0, 0.0, 2.0).unwrap();
        for tau in grid(0.0, 2.0, 41) {
            assert!((traj.value(tau) - 3.0 * (2.0 - tau) / 2.0).abs() <= 1e-11);
        }
        assert!((cost.total - 4.5).abs() <= 1e-11);
    }

    #[test]
    fn quadratic_coefficient_forward_branch_is_the_identity_function() {
        // F' + F^2 = 1 + tau^2 with F(0) = 0 is solved exactly by F = tau.
        let w = CoefficientW::direct((0.0, 1.0), |tau| 1.0 + tau * tau).unwrap();
        let sol = solve_riccati(&w, RiccatiCondition::Initial(0.0)).unwrap();
        assert!(sol.blow_up().is_none());
        for tau in grid(0.0, 1.0, 101) {
            assert!((sol.log_derivative(tau) - tau).abs() <= 1e-9, "at {tau}");
            assert!((sol.antiderivative(tau) - 0.5 * tau * tau).abs() <= 1e-9);
        }
        let (traj, cost) = reconstruct(&sol, 1.0, 0.0, 1.0).unwrap();
        assert!((traj.value(0.5) - 0.43325160201388065).abs() <= 1e-8);
        assert!((cost.total - 1.3390033289820869).abs() <= 1e-8);
        assert_eq!(traj.value(0.0), 1.0);
        assert_eq!(traj.value(1.0), 0.0);
    }

    #[test]
    fn reconstruction_is_gauge_independent() {
        // The representation normalises by boundary data, so any
        // non-diverging branch of the flow must reconstruct the same x.
        let cases: Vec<(CoefficientW, Vec<RiccatiCondition>)> = vec![
            (
                CoefficientW::direct((0.0, 1.0), |_| 1.0).unwrap(),
                vec![
                    RiccatiCondition::Initial(0.0),
                    RiccatiCondition::Initial(0.7),
                    RiccatiCondition::Terminal(-0.3),
                ],
            ),
            (
                CoefficientW::direct((0.0, 1.0), |tau| 1.0 + tau * tau).unwrap(),
                vec![RiccatiCondition::Initial(0.0)],
            ),
        ];
        for (w, alternates) in cases {
            let reference = solve_riccati(&w, RiccatiCondition::default()).unwrap();
            let (xr, cr) = reconstruct(&reference, 1.0, w.span().0, w.span().1).unwrap();
            for cond in alternates {
                let other = solve_riccati(&w, cond).unwrap();
                assert!(other.blow_up().is_none(), "{cond:?} diverged");
                let (xo, co) = reconstruct(&other, 1.0, w.span().0, w.span().1).unwrap();
                let sup = grid(w.span().0, w.span().1, 501)
                    .map(|tau| (xr.value(tau) - xo.value(tau)).abs())
                    .fold(0.0f64, f64::max);
                assert!(sup <= 1e-8, "{cond:?} sup {sup:e}");
                assert!((cr.total - co.total).abs() <= 1e-8 * cr.total.abs());
            }
        }
    }

    #[test]
    fn reconstructed_trajectory_satisfies_the_second_order_equation() {
        for (w, tag) in [
            (CoefficientW::direct((0.0, 1.0), |_| 1.0).unwrap(), "constant"),
            (
                CoefficientW::direct((0.0, 1.0), |tau| 1.0 + tau * tau).unwrap(),
                "quadratic",
            ),
        ] {
            let sol = solve_riccati(&w, RiccatiCondition::default()).unwrap();
            let (traj, _) = reconstruct(&sol, 1.0, 0.0, 1.0).unwrap();
            let h = 1.0 / 1000.0;
            let mut sup = 0.0f64;
            let mut sup_deriv = 0.0f64;
            let mut sup_analytic = 0.0f64;
            for i in 1..1000 {
                let tau = i as f64 * h;
                let xpp =
                    (traj.value(tau + h) - 2.0 * traj.value(tau) + traj.value(tau - h)) / (h * h);
                sup = sup.max((xpp - w.value(tau) * traj.value(tau)).abs());
                // The derivative must be the derivative *of the value*, not
                // merely a plausible companion formula.
                let xp = (traj.value(tau + h) - traj.value(tau - h)) / (2.0 * h);
                sup_deriv = sup_deriv.max((xp - traj.derivative(tau)).abs());
                // The reported curvature carries the flow's defect, which is
                // orders of magnitude below the differencing noise above.
                let xs = traj.second_derivative(tau).expect("analytic curvature");
                sup_analytic = sup_analytic.max((xs - w.value(tau) * traj.value(tau)).abs());
            }
            assert!(sup <= 1e-6, "{tag}: residual {sup:e}");
            assert!(sup_deriv <= 1e-6, "{tag}: derivative drift {sup_deriv:e}");
            assert!(sup_analytic <= 1e-8, "{tag}: defect {sup_analytic:e}");
        }
    }

    #[test]
    fn nonnegative_coefficients_keep_the_default_branch_bounded() {
        let w = CoefficientW::direct((0.0, 3.0), |tau| 2.0 + (6.0 * tau).sin()).unwrap();
        let sol = solve_riccati(&w, RiccatiCondition::default()).unwrap();
        assert!(sol.blow_up().is_none());
        let bound = 3.0f64.sqrt();
        for tau in grid(0.0, 3.0, 601) {
            let f = sol.log_derivative(tau);
            assert!(f <= 1e-12 && f > -bound - 1e-9, "F({tau}) = {f}");
        }
    }

    #[test]
    fn negative_coefficient_blows_up_and_reconstruction_refuses() {
        // x'' = -pi^2 x with x'(1) = 0 is cos(pi (1 - tau)), whose
        // log-derivative diverges where the cosine vanishes: tau = 1/2.
        let w = CoefficientW::direct((0.0, 1.0), |_| -std::f64::consts::PI.powi(2)).unwrap();
        let sol = solve_riccati(&w, RiccatiCondition::default()).unwrap();
        let at = sol.blow_up().expect("flow must diverge");
        assert!((at - 0.5).abs() <= 1e-2, "blow-up at {at}");
        assert!(sol.covered().0 >= at - 1e-9);
        match reconstruct(&sol, 1.0, 0.0, 1.0) {
            Err(Error::RiccatiBlowUp { at }) => assert!((at - 0.5).abs() <= 1e-2),
            other => panic!("expected blow-up rejection, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_coefficients_are_named_and_rejected() {
        let w = CoefficientW::direct((0.0, 1.0), |tau| 1.0 / (tau - 0.5)).unwrap();
        match solve_riccati(&w, RiccatiCondition::default()) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("not finite"), "{msg}"),
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(CoefficientW::direct((1.0, 0.0), |_| 1.0).is_err());
        let w = CoefficientW::direct((0.0, 1.0), |_| 1.0).unwrap();
        assert!(solve_riccati(&w, RiccatiCondition::Initial(f64::NAN)).is_err());
    }

    #[test]
    fn frame_coefficients_match_their_defining_compositions() {
        // Constant scenario in the unit-impact clock: W = lambda sigma0^2 eta0
        // on [0, (T - t0)/eta0].
        let sc = Scenario::new(
            0.0,
            1.0,
            1.0,
            2.0,
            CoefficientFunction::constant(2.0).unwrap(),
            CoefficientFunction::constant(0.5).unwrap(),
            FrameLabel::Physical,
        )
        .unwrap();
        let w = coefficient_w(&sc, WFrame::TauFrame).unwrap();
        assert_eq!(w.frame_name(), "tau_frame");
        assert!((w.span().1 - 0.5).abs() <= 1e-10);
        for tau in grid(0.0, 0.5, 51) {
            assert!((w.value(tau) - 2.0 * 0.25 * 2.0).abs() <= 1e-10);
        }
        assert!(w.clock().is_some());

        // Cosh-family scenario in the u-frame: the potential is the
        // constant a^2 + lambda sigma0^2/eta0.
        let sc = Scenario::new(
            0.0,
            1.0,
            1.0,
            1.5,
            CoefficientFunction::cosh_power(2.0, 1.0, 0.8, 2).unwrap(),
            CoefficientFunction::cosh_power(0.6, 1.0, 0.8, 1).unwrap(),
            FrameLabel::Physical,
        )
        .unwrap();
        let w = coefficient_w(&sc, WFrame::UFrameS).unwrap();
        assert_eq!(w.frame_name(), "u_frame_s");
        let expected = 0.8 * 0.8 + 1.5 * 0.36 / 2.0;
        for s in grid(0.0, 1.0, 51) {
            assert!((w.value(s) - expected).abs() <= 1e-9, "at {s}");
        }

        // lambda = 0 makes the trader-frame coefficient vanish identically.
        let sc = sc.with_lambda(0.0).unwrap();
        let w = coefficient_w(&sc, WFrame::TauFrame).unwrap();
        for tau in grid(w.span().0, w.span().1, 51) {
            assert_eq!(w.value(tau), 0.0);
        }
    }

    #[test]
    fn reconstruct_on_a_sub_span_keeps_exact_boundaries() {
        let w = CoefficientW::direct((0.0, 2.0), |_| 1.0).unwrap();
        let sol = solve_riccati(&w, RiccatiCondition::default()).unwrap();
        let (traj, cost) = reconstruct(&sol, 2.0, 0.5, 1.5).unwrap();
        assert_eq!(traj.value(0.5), 2.0);
        assert_eq!(traj.value(1.5), 0.0);
        // On the sub-span the problem is again constant-coefficient with
        // kappa = 1 and span 1, so the cost is 4 coth(1).
        assert!((cost.total - 4.0 * 1.3130352854993313).abs() <= 1e-7);
        assert!(reconstruct(&sol, 1.0, 1.5, 0.5).is_err());
        assert!(reconstruct(&sol, 1.0, -0.5, 1.0).is_err());
    }

    #[test]
    fn zero_position_reconstructs_the_zero_trajectory() {
        let w = CoefficientW::direct((0.0, 1.0), |_| 1.0).unwrap();
        let sol = solve_riccati(&w, RiccatiCondition::default()).unwrap();
        let (traj, cost) = reconstruct(&sol, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(cost.total, 0.0);
        for tau in grid(0.0, 1.0, 17) {
            assert_eq!(traj.value(tau), 0.0);
        }
    }
}
