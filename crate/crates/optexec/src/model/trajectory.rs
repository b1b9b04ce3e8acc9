//! Execution trajectories (schedules) over a horizon.

use std::fmt;
use std::sync::Arc;

use crate::num::pchip::Pchip;
use crate::{Error, Result};

/// Shared closure type for analytic trajectory data.
pub type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative tolerance for boundary-value checks at construction.
pub const BOUNDARY_RTOL: f64 = 1e-12;

enum Repr {
    Analytic {
        value: Func,
        derivative: Func,
        second: Option<Func>,
    },
    Sampled {
        interp: Pchip,
    },
}

impl Clone for Repr {
    fn clone(&self) -> Self {
        match self {
            Repr::Analytic {
                value,
                derivative,
                second,
            } => Repr::Analytic {
                value: value.clone(),
                derivative: derivative.clone(),
                second: second.clone(),
            },
            Repr::Sampled { interp } => Repr::Sampled {
                interp: interp.clone(),
            },
        }
    }
}

/// A differentiable schedule `x(s)` on a span.
///
/// Solver outputs satisfy `x(start) = x0` and `x(end) = 0` to within
/// [`BOUNDARY_RTOL`] relative to `max(1, |x0|)`; the constructors enforce
/// whichever endpoint values the caller declares. Frame-change helpers
/// construct trajectories with only a declared start (a mapped trajectory
/// need not liquidate in the mapped frame's units, and diagnostic inputs in
/// tests deliberately don't).
///
/// Analytic trajectories may carry an exact second derivative; sampled ones
/// never do, and consumers fall back to central differences. That fallback
/// is deliberate: residual checks must not be handed a second derivative
/// *defined* by the very differential equation they verify.
#[derive(Clone)]
pub struct Trajectory {
    start: f64,
    end: f64,
    start_value: f64,
    repr: Repr,
    method: String,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("span", &(self.start, self.end))
            .field("start_value", &self.start_value)
            .field("method", &self.method)
            .field(
                "repr",
                &match &self.repr {
                    Repr::Analytic { second, .. } => {
                        if second.is_some() {
                            "analytic (with second derivative)"
                        } else {
                            "analytic"
                        }
                    }
                    Repr::Sampled { .. } => "sampled",
                },
            )
            .finish()
    }
}

fn check_endpoint(which: &str, got: f64, expected: f64, scale: f64) -> Result<()> {
    if (got - expected).abs() <= BOUNDARY_RTOL * scale {
        Ok(())
    } else {
        Err(Error::InvalidTrajectory(format!(
            "{which} value {got} does not match the declared {expected} \
             (tolerance {:e})",
            BOUNDARY_RTOL * scale
        )))
    }
}

impl Trajectory {
    /// Wraps analytic closures. `expected_start` is checked against
    /// `value(start)`; `expected_end`, when given, against `value(end)`.
    pub fn analytic(
        span: (f64, f64),
        value: Func,
        derivative: Func,
        second: Option<Func>,
        method: impl Into<String>,
        expected_start: f64,
        expected_end: Option<f64>,
    ) -> Result<Self> {
        let (start, end) = span;
        if !start.is_finite() || !end.is_finite() || end <= start {
            return Err(Error::InvalidTrajectory(format!(
                "span must be finite with end > start, got [{start}, {end}]"
            )));
        }
        let scale = expected_start.abs().max(1.0);
        let v0 = value(start);
        check_endpoint("start", v0, expected_start, scale)?;
        if let Some(xe) = expected_end {
            check_endpoint("end", value(end), xe, scale)?;
        }
        Ok(Self {
            start,
            end,
            start_value: v0,
            repr: Repr::Analytic {
                value,
                derivative,
                second,
            },
            method: method.into(),
        })
    }

    /// Interpolates samples on strictly increasing times covering the span.
    pub fn from_samples(
        ts: &[f64],
        xs: &[f64],
        method: impl Into<String>,
        expected_start: f64,
        expected_end: Option<f64>,
    ) -> Result<Self> {
        let interp = Pchip::new(ts.to_vec(), xs.to_vec())?;
        let (start, end) = (interp.min_x(), interp.max_x());
        let scale = expected_start.abs().max(1.0);
        check_endpoint("start", xs[0], expected_start, scale)?;
        if let Some(xe) = expected_end {
            check_endpoint("end", *xs.last().unwrap(), xe, scale)?;
        }
        Ok(Self {
            start,
            end,
            start_value: xs[0],
            repr: Repr::Sampled { interp },
            method: method.into(),
        })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    /// Value of the schedule at `start` (the position being worked).
    pub fn start_value(&self) -> f64 {
        self.start_value
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn value(&self, s: f64) -> f64 {
        match &self.repr {
            Repr::Analytic { value, .. } => value(s),
            Repr::Sampled { interp } => interp.value(s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match &self.repr {
            Repr::Analytic { derivative, .. } => derivative(s),
            Repr::Sampled { interp } => interp.derivative(s),
        }
    }

    /// Exact second derivative where the representation has one.
    ///
    /// `None` for sampled trajectories and for frame-mapped analytic ones;
    /// callers needing curvature then use central differences of `value`.
    pub fn second_derivative(&self, s: f64) -> Option<f64> {
        match &self.repr {
            Repr::Analytic { second, .. } => second.as_ref().map(|f| f(s)),
            Repr::Sampled { .. } => None,
        }
    }

    /// `n >= 2` uniform samples `(s, x, dx/ds)` across the span, endpoints
    /// included.
    pub fn sample_uniform(&self, n: usize) -> Vec<(f64, f64, f64)> {
        assert!(n >= 2, "need at least two samples");
        let h = (self.end - self.start) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                // Land the last sample exactly on the endpoint.
                let s = if i == n - 1 {
                    self.end
                } else {
                    self.start + h * i as f64
                };
                (s, self.value(s), self.derivative(s))
            })
            .collect()
    }
}
