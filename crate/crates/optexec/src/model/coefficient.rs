//! Time-varying model coefficients.
//!
//! Impact and volatility curves are drawn from a small parametric catalogue
//! plus a tabulated fallback. Parametric families carry exact first and
//! second derivatives; the tabulated family differentiates its
//! shape-preserving interpolant, which is why downstream consumers flag
//! second-derivative accuracy when a tabulated curve is involved.

use crate::num::pchip::Pchip;
use crate::{Error, Result};

/// A positive scalar function of time from the supported catalogue.
///
/// Construct through the checked constructors ([`CoefficientFunction::constant`]
/// and friends); they validate parameters once so evaluation can be
/// unconditional. Positivity over a concrete horizon is the scenario's
/// responsibility, since several families (for example `quadratic_product`
/// with negative curvature) are positive only on part of the line.
#[derive(Debug, Clone)]
pub enum CoefficientFunction {
    /// `c0`
    Constant { c0: f64 },
    /// `c0 * exp(rate * s)`
    Exponential { c0: f64, rate: f64 },
    /// `c0 * gamma^power * cosh(a*s)^power` with `power` 1 or 2
    CoshPower { c0: f64, gamma: f64, a: f64, power: u8 },
    /// `c0 * (1 + k * s^2)`
    QuadraticProduct { c0: f64, k: f64 },
    /// Shape-preserving interpolation of tabulated samples
    Tabulated(Tabulated),
}

/// Tabulated coefficient samples with a monotone cubic interpolant.
#[derive(Debug, Clone)]
pub struct Tabulated {
    interp: Pchip,
}

impl Tabulated {
    /// Requires at least four strictly increasing knots and strictly
    /// positive, finite values.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 4 {
            return Err(Error::InvalidCoefficient(format!(
                "tabulated coefficients need at least 4 knots, got {}",
                knots.len()
            )));
        }
        if knots.len() != values.len() {
            return Err(Error::InvalidCoefficient(format!(
                "knot/value length mismatch: {} vs {}",
                knots.len(),
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::InvalidCoefficient(format!(
                    "tabulated value at index {i} must be finite and positive, got {v}"
                )));
            }
        }
        let interp = Pchip::new(knots, values)?;
        Ok(Self { interp })
    }

    pub fn knots(&self) -> &[f64] {
        self.interp.xs()
    }

    pub fn values(&self) -> &[f64] {
        self.interp.ys()
    }
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidCoefficient(format!(
            "parameter {name} must be finite, got {v}"
        )))
    }
}

fn require_nonnegative(name: &str, v: f64) -> Result<()> {
    require_finite(name, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCoefficient(format!(
            "parameter {name} must be nonnegative, got {v}"
        )))
    }
}

impl CoefficientFunction {
    pub fn constant(c0: f64) -> Result<Self> {
        require_nonnegative("c0", c0)?;
        Ok(Self::Constant { c0 })
    }

    pub fn exponential(c0: f64, rate: f64) -> Result<Self> {
        require_nonnegative("c0", c0)?;
        require_finite("rate", rate)?;
        Ok(Self::Exponential { c0, rate })
    }

    pub fn cosh_power(c0: f64, gamma: f64, a: f64, power: u8) -> Result<Self> {
        require_nonnegative("c0", c0)?;
        require_finite("gamma", gamma)?;
        require_finite("a", a)?;
        if gamma <= 0.0 {
            return Err(Error::InvalidCoefficient(format!(
                "parameter gamma must be positive, got {gamma}"
            )));
        }
        if power != 1 && power != 2 {
            return Err(Error::InvalidCoefficient(format!(
                "cosh_power exponent must be 1 or 2, got {power}"
            )));
        }
        Ok(Self::CoshPower { c0, gamma, a, power })
    }

    pub fn quadratic_product(c0: f64, k: f64) -> Result<Self> {
        require_nonnegative("c0", c0)?;
        require_finite("k", k)?;
        Ok(Self::QuadraticProduct { c0, k })
    }

    pub fn tabulated(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self::Tabulated(Tabulated::new(knots, values)?))
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            Self::Constant { c0 } => *c0,
            Self::Exponential { c0, rate } => c0 * (rate * s).exp(),
            Self::CoshPower { c0, gamma, a, power } => {
                let base = gamma * (a * s).cosh();
                if *power == 1 {
                    c0 * base
                } else {
                    c0 * base * base
                }
            }
            Self::QuadraticProduct { c0, k } => c0 * (1.0 + k * s * s),
            Self::Tabulated(t) => t.interp.value(s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::Exponential { c0, rate } => c0 * rate * (rate * s).exp(),
            Self::CoshPower { c0, gamma, a, power } => {
                if *power == 1 {
                    c0 * gamma * a * (a * s).sinh()
                } else {
                    // d/ds cosh^2 = a sinh(2as)
                    c0 * gamma * gamma * a * (2.0 * a * s).sinh()
                }
            }
            Self::QuadraticProduct { c0, k } => 2.0 * c0 * k * s,
            Self::Tabulated(t) => t.interp.derivative(s),
        }
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::Exponential { c0, rate } => c0 * rate * rate * (rate * s).exp(),
            Self::CoshPower { c0, gamma, a, power } => {
                if *power == 1 {
                    c0 * gamma * a * a * (a * s).cosh()
                } else {
                    2.0 * c0 * gamma * gamma * a * a * (2.0 * a * s).cosh()
                }
            }
            Self::QuadraticProduct { c0, k } => 2.0 * c0 * k,
            Self::Tabulated(t) => t.interp.second_derivative(s),
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self, Self::Tabulated(_))
    }

    /// Checks sign over `[t0, t_end]`: strictly positive when `strict`,
    /// otherwise nonnegative. Parametric families are checked analytically;
    /// tabulated ones must cover the span and are sampled on a fine grid.
    pub(crate) fn check_sign_on(&self, t0: f64, t_end: f64, strict: bool) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidCoefficient(msg));
        match self {
            Self::Constant { c0 } | Self::Exponential { c0, .. } => {
                if strict && *c0 <= 0.0 {
                    return fail(format!("must be strictly positive, but c0 = {c0}"));
                }
            }
            Self::CoshPower { c0, .. } => {
                if strict && *c0 <= 0.0 {
                    return fail(format!("must be strictly positive, but c0 = {c0}"));
                }
            }
            Self::QuadraticProduct { c0, k } => {
                if strict && *c0 <= 0.0 {
                    return fail(format!("must be strictly positive, but c0 = {c0}"));
                }
                // 1 + k s^2 is smallest at the endpoint of largest |s|.
                let m = (t0 * t0).max(t_end * t_end);
                let floor = 1.0 + k * m;
                if *c0 > 0.0 {
                    if strict && floor <= 0.0 {
                        return fail(format!(
                            "1 + k*s^2 reaches {floor} on the horizon; must stay positive"
                        ));
                    }
                    if !strict && floor < 0.0 {
                        return fail(format!(
                            "1 + k*s^2 reaches {floor} on the horizon; must stay nonnegative"
                        ));
                    }
                }
            }
            Self::Tabulated(t) => {
                let (lo, hi) = (t.interp.min_x(), t.interp.max_x());
                if t0 < lo || t_end > hi {
                    return fail(format!(
                        "tabulated knots cover [{lo}, {hi}] but the horizon is [{t0}, {t_end}]"
                    ));
                }
                // Knot values are positive by construction; guard the
                // interpolant between knots as well.
                for i in 0..=1024 {
                    let s = t0 + (t_end - t0) * i as f64 / 1024.0;
                    let v = t.interp.value(s);
                    if v <= 0.0 {
                        return fail(format!(
                            "interpolated value {v} at s = {s} is not positive"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(c: &CoefficientFunction, s: f64) {
        let h = 1e-6;
        let fd1 = (c.value(s + h) - c.value(s - h)) / (2.0 * h);
        let fd2 = (c.value(s + h) - 2.0 * c.value(s) + c.value(s - h)) / (h * h);
        let scale1 = c.derivative(s).abs().max(1.0);
        let scale2 = c.second_derivative(s).abs().max(1.0);
        assert!(
            (c.derivative(s) - fd1).abs() / scale1 <= 1e-7,
            "first derivative at {s}"
        );
        assert!(
            (c.second_derivative(s) - fd2).abs() / scale2 <= 1e-3,
            "second derivative at {s}"
        );
    }

    #[test]
    fn exponential_evaluates_and_differentiates() {
        let c = CoefficientFunction::exponential(2.0, -0.7).unwrap();
        assert!((c.value(0.0) - 2.0).abs() <= 1e-15);
        assert!((c.value(1.0) - 2.0 * (-0.7f64).exp()).abs() <= 1e-15);
        for s in [-1.0, 0.0, 0.5, 2.0] {
            fd_check(&c, s);
        }
    }

    #[test]
    fn cosh_power_families_differentiate_consistently() {
        let c1 = CoefficientFunction::cosh_power(1.3, 0.9, 1.5, 1).unwrap();
        let c2 = CoefficientFunction::cosh_power(1.3, 0.9, 1.5, 2).unwrap();
        assert!((c1.value(0.0) - 1.3 * 0.9).abs() <= 1e-15);
        assert!((c2.value(0.0) - 1.3 * 0.81).abs() <= 1e-12);
        // power=2 is the square of power=1 up to the c0 normalisation.
        let ratio = c2.value(0.7) / (c1.value(0.7) * c1.value(0.7));
        assert!((ratio - 1.0 / 1.3).abs() <= 1e-12);
        for s in [-0.8, 0.0, 0.3, 1.1] {
            fd_check(&c1, s);
            fd_check(&c2, s);
        }
    }

    #[test]
    fn quadratic_product_differentiates_consistently() {
        let c = CoefficientFunction::quadratic_product(0.5, 2.0).unwrap();
        assert!((c.value(2.0) - 0.5 * 9.0).abs() <= 1e-15);
        for s in [-1.0, 0.2, 1.4] {
            fd_check(&c, s);
        }
    }

    #[test]
    fn tabulated_interpolates_and_differentiates() {
        let knots = vec![0.0, 0.5, 1.0, 1.5, 2.0];
        let values: Vec<f64> = knots.iter().map(|s| 1.0 + 0.25 * s).collect();
        let c = CoefficientFunction::tabulated(knots, values).unwrap();
        assert!(c.is_tabulated());
        // Linear data reproduce exactly, including the derivative.
        assert!((c.value(0.75) - 1.1875).abs() <= 1e-14);
        assert!((c.derivative(0.75) - 0.25).abs() <= 1e-13);
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(CoefficientFunction::constant(-1.0).is_err());
        assert!(CoefficientFunction::constant(f64::NAN).is_err());
        assert!(CoefficientFunction::exponential(1.0, f64::INFINITY).is_err());
        assert!(CoefficientFunction::cosh_power(1.0, 0.0, 1.0, 2).is_err());
        assert!(CoefficientFunction::cosh_power(1.0, 1.0, 1.0, 3).is_err());
        assert!(CoefficientFunction::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]).is_err());
        assert!(CoefficientFunction::tabulated(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, -1.0, 1.0, 1.0]
        )
        .is_err());
        assert!(CoefficientFunction::tabulated(
            vec![0.0, 1.0, 1.0, 3.0],
            vec![1.0, 1.0, 1.0, 1.0]
        )
        .is_err());
    }

    #[test]
    fn sign_check_catches_quadratic_zero_crossing() {
        let c = CoefficientFunction::quadratic_product(1.0, -1.0).unwrap();
        // 1 - s^2 crosses zero at s = 1.
        assert!(c.check_sign_on(0.0, 0.9, true).is_ok());
        assert!(c.check_sign_on(0.0, 1.0, true).is_err());
        assert!(c.check_sign_on(0.0, 1.0, false).is_ok());
        assert!(c.check_sign_on(0.0, 2.0, false).is_err());
    }

    #[test]
    fn sign_check_requires_tabulated_coverage() {
        let c = CoefficientFunction::tabulated(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(c.check_sign_on(0.5, 2.5, true).is_ok());
        assert!(c.check_sign_on(-0.5, 2.5, true).is_err());
        assert!(c.check_sign_on(0.5, 3.5, true).is_err());
    }
}
