//! Execution scenarios: horizon, position, risk weight, and coefficients.

use super::coefficient::CoefficientFunction;
use crate::{Error, Result};

/// Which time variable the scenario's coefficients are expressed in.
///
/// `Physical` is wall-clock time; `Trader` marks a scenario already living
/// in a reparametrised (unit-impact or volatility) clock, which is how
/// transformed problems round-trip through the same machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameLabel {
    Physical,
    Trader,
}

/// A complete, validated problem statement.
///
/// Invariants established at construction: the horizon is finite with
/// `t_end > t0`, `lambda >= 0`, `eta` is strictly positive on the horizon,
/// and `sigma` is nonnegative there (pointwise zeros are allowed).
#[derive(Debug, Clone)]
pub struct Scenario {
    t0: f64,
    t_end: f64,
    x0: f64,
    lambda: f64,
    eta: CoefficientFunction,
    sigma: CoefficientFunction,
    frame: FrameLabel,
}

impl Scenario {
    pub fn new(
        t0: f64,
        t_end: f64,
        x0: f64,
        lambda: f64,
        eta: CoefficientFunction,
        sigma: CoefficientFunction,
        frame: FrameLabel,
    ) -> Result<Self> {
        if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
            return Err(Error::InvalidScenario(format!(
                "horizon must be finite with T > t0, got [{t0}, {t_end}]"
            )));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidScenario(format!("x0 must be finite, got {x0}")));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidScenario(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        eta.check_sign_on(t0, t_end, true)
            .map_err(|e| Error::InvalidScenario(format!("eta: {e}")))?;
        sigma
            .check_sign_on(t0, t_end, false)
            .map_err(|e| Error::InvalidScenario(format!("sigma: {e}")))?;
        Ok(Self {
            t0,
            t_end,
            x0,
            lambda,
            eta,
            sigma,
            frame,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t0, self.t_end)
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t0
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> &CoefficientFunction {
        &self.eta
    }

    pub fn sigma(&self) -> &CoefficientFunction {
        &self.sigma
    }

    pub fn frame(&self) -> FrameLabel {
        self.frame
    }

    /// Same scenario with a different risk weight (used by parameter sweeps).
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.t0,
            self.t_end,
            self.x0,
            lambda,
            self.eta.clone(),
            self.sigma.clone(),
            self.frame,
        )
    }

    /// Same scenario with a different initial position.
    pub fn with_x0(&self, x0: f64) -> Result<Self> {
        Self::new(
            self.t0,
            self.t_end,
            x0,
            self.lambda,
            self.eta.clone(),
            self.sigma.clone(),
            self.frame,
        )
    }
}
