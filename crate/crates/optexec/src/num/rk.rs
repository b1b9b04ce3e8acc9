//! Embedded Dormand–Prince 5(4) integrator with dense output and a halt
//! predicate.
//!
//! The integrator stores every accepted knot together with the exact ODE
//! derivative there; between knots, solutions are evaluated by cubic Hermite
//! interpolation of knot values and derivatives. Callers that need dense
//! derivatives to high accuracy cap the step (`max_step`), trading a few
//! extra knots for interpolation error that shrinks like the cube of the
//! step.
//!
//! A `halt` predicate turns blow-up detection into a first-class outcome:
//! when the predicate first becomes true at an accepted knot, the crossing
//! is refined by bisection on the dense interpolant and the solution is
//! truncated there, reporting [`StopReason::Halted`].

#[derive(Debug, thiserror::Error)]
pub enum RkError {
    #[error("integration span must be finite with t_end > t0: [{t0}, {t_end}]")]
    BadSpan { t0: f64, t_end: f64 },

    #[error("initial state must be finite and non-empty")]
    BadInitialState,

    #[error("step size underflow at t = {t} (derivative is likely singular)")]
    StepUnderflow { t: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
}

/// Integrator tolerances and guards.
#[derive(Debug, Clone, Copy)]
pub struct RkOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; `None` means one-half of the span.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: None,
            max_steps: 2_000_000,
        }
    }
}

/// Why integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    /// The full span `[t0, t_end]` was covered.
    SpanCovered,
    /// The halt predicate fired; the solution is truncated at `t`.
    Halted { t: f64 },
}

/// Accepted knots plus dense (cubic Hermite) evaluation between them.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    dim: usize,
    ts: Vec<f64>,
    ys: Vec<f64>,
    dys: Vec<f64>,
    stop: StopReason,
}

impl OdeSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stop(&self) -> StopReason {
        self.stop
    }

    pub fn knots(&self) -> &[f64] {
        &self.ts
    }

    pub fn start(&self) -> f64 {
        self.ts[0]
    }

    pub fn end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn knot_state(&self, k: usize) -> &[f64] {
        &self.ys[k * self.dim..(k + 1) * self.dim]
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let n = self.ts.len();
        let i = if t <= self.ts[0] {
            0
        } else if t >= self.ts[n - 1] {
            n - 2
        } else {
            self.ts.partition_point(|&k| k <= t) - 1
        };
        let h = self.ts[i + 1] - self.ts[i];
        let u = ((t - self.ts[i]) / h).clamp(0.0, 1.0);
        (i, h, u)
    }

    /// Component `j` of the dense solution at `t` (clamped to the covered
    /// span, so boundary queries that land a rounding error outside are
    /// answered by the endpoint values).
    pub fn eval_component(&self, t: f64, j: usize) -> f64 {
        let (i, h, u) = self.locate(t);
        let d = self.dim;
        let (y0, y1) = (self.ys[i * d + j], self.ys[(i + 1) * d + j]);
        let (f0, f1) = (self.dys[i * d + j], self.dys[(i + 1) * d + j]);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * h * f0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * h * f1
    }

    /// Derivative of the dense cubic for component `j` at `t`.
    pub fn eval_deriv_component(&self, t: f64, j: usize) -> f64 {
        let (i, h, u) = self.locate(t);
        let d = self.dim;
        let (y0, y1) = (self.ys[i * d + j], self.ys[(i + 1) * d + j]);
        let (f0, f1) = (self.dys[i * d + j], self.dys[(i + 1) * d + j]);
        let u2 = u * u;
        (6.0 * u2 - 6.0 * u) * (y0 - y1) / h
            + (3.0 * u2 - 4.0 * u + 1.0) * f0
            + (3.0 * u2 - 2.0 * u) * f1
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for j in 0..self.dim {
            out[j] = self.eval_component(t, j);
        }
    }
}

// Dormand–Prince coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and the embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrates `dy/dt = f(t, y)` over `[t0, t_end]`, `t_end > t0`.
///
/// `halt(t, y)` is evaluated at every accepted knot; once true, the first
/// crossing inside the last step is located by bisection on the dense
/// interpolant and integration stops there.
pub fn integrate<F, H>(
    f: F,
    t0: f64,
    t_end: f64,
    y0: &[f64],
    opts: &RkOptions,
    halt: H,
) -> Result<OdeSolution, RkError>
where
    F: Fn(f64, &[f64], &mut [f64]),
    H: Fn(f64, &[f64]) -> bool,
{
    if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
        return Err(RkError::BadSpan { t0, t_end });
    }
    if y0.is_empty() || y0.iter().any(|v| !v.is_finite()) {
        return Err(RkError::BadInitialState);
    }

    let dim = y0.len();
    let span = t_end - t0;
    let max_step = opts.max_step.unwrap_or(span * 0.5).min(span);
    let min_step = span * 1e-14;

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    f(t, &y, &mut k1);

    let mut ts = vec![t];
    let mut ys = y.clone();
    let mut dys = k1.clone();

    let mut h = (span * 1e-3).min(max_step);
    let mut steps = 0usize;

    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(RkError::TooManySteps {
                t,
                max_steps: opts.max_steps,
            });
        }
        h = h.min(max_step);
        // Land the final knot exactly on t_end. Without the stretch, many
        // small steps leave a rounding sliver `t_end - t` below min_step,
        // which would read as a spurious underflow at the finish line.
        let last = t + h >= t_end - min_step;
        if last {
            h = t_end - t;
        } else if h < min_step {
            return Err(RkError::StepUnderflow { t });
        }

        for j in 0..dim {
            stage[j] = y[j] + h * A21 * k1[j];
        }
        f(t + C2 * h, &stage, &mut k2);
        for j in 0..dim {
            stage[j] = y[j] + h * (A31 * k1[j] + A32 * k2[j]);
        }
        f(t + C3 * h, &stage, &mut k3);
        for j in 0..dim {
            stage[j] = y[j] + h * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j]);
        }
        f(t + C4 * h, &stage, &mut k4);
        for j in 0..dim {
            stage[j] = y[j] + h * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j]);
        }
        f(t + C5 * h, &stage, &mut k5);
        for j in 0..dim {
            stage[j] = y[j]
                + h * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j]);
        }
        f(t + h, &stage, &mut k6);
        for j in 0..dim {
            y_new[j] =
                y[j] + h * (B1 * k1[j] + B3 * k3[j] + B4 * k4[j] + B5 * k5[j] + B6 * k6[j]);
        }
        f(t + h, &y_new, &mut k7);

        // Scaled RMS error of the embedded 4th-order difference.
        let mut err_sq = 0.0;
        let mut finite = y_new.iter().all(|v| v.is_finite());
        if finite {
            for j in 0..dim {
                let e = h
                    * (E1 * k1[j]
                        + E3 * k3[j]
                        + E4 * k4[j]
                        + E5 * k5[j]
                        + E6 * k6[j]
                        + E7 * k7[j]);
                let sc = opts.abs_tol + opts.rel_tol * y[j].abs().max(y_new[j].abs());
                err_sq += (e / sc) * (e / sc);
            }
            finite = err_sq.is_finite();
        }
        let err = if finite {
            (err_sq / dim as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&y_new);
            k1.copy_from_slice(&k7); // FSAL
            ts.push(t);
            ys.extend_from_slice(&y);
            dys.extend_from_slice(&k1);

            if halt(t, &y) {
                let sol = OdeSolution {
                    dim,
                    ts,
                    ys,
                    dys,
                    stop: StopReason::SpanCovered,
                };
                return Ok(refine_halt(sol, halt));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= factor;
        }
    }

    Ok(OdeSolution {
        dim,
        ts,
        ys,
        dys,
        stop: StopReason::SpanCovered,
    })
}

/// Bisects the final knot interval to the first point where `halt` is true
/// (on the dense interpolant) and truncates the solution there.
fn refine_halt<H: Fn(f64, &[f64]) -> bool>(sol: OdeSolution, halt: H) -> OdeSolution {
    let n = sol.ts.len();
    debug_assert!(n >= 2);
    let dim = sol.dim;
    let mut lo = sol.ts[n - 2];
    let mut hi = sol.ts[n - 1];
    let mut state = vec![0.0; dim];
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        sol.eval(mid, &mut state);
        if halt(mid, &state) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    sol.eval(hi, &mut state);
    let mut deriv = vec![0.0; dim];
    for j in 0..dim {
        deriv[j] = sol.eval_deriv_component(hi, j);
    }

    let mut ts = sol.ts;
    let mut ys = sol.ys;
    let mut dys = sol.dys;
    ts[n - 1] = hi;
    ys[(n - 1) * dim..].copy_from_slice(&state);
    dys[(n - 1) * dim..].copy_from_slice(&deriv);
    OdeSolution {
        dim,
        ts,
        ys,
        dys,
        stop: StopReason::Halted { t: hi },
    }
}
