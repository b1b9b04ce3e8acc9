//! Cost reports.

/// Split of the total cost into its two integrand terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    /// `∫ eta x'^2` — execution (impact) cost.
    pub impact: f64,
    /// `lambda ∫ sigma^2 x^2` — inventory risk cost.
    pub risk: f64,
}

/// Cost of a schedule, with provenance and an accuracy estimate.
///
/// `breakdown` is present when the method computes the two terms separately
/// (quadrature, the discrete oracle, and the solver front-ends); methods
/// that obtain the total from boundary data alone leave it `None`.
/// `abs_error_estimate` is an absolute-error bound estimate for `total` —
/// honest but approximate, derived from quadrature error sums, mesh
/// refinement differences, or residual magnitudes depending on the method.
#[derive(Debug, Clone)]
pub struct CostReport {
    pub total: f64,
    pub breakdown: Option<CostBreakdown>,
    pub method: String,
    pub abs_error_estimate: f64,
}

impl CostReport {
    /// Consistency of `total` against the breakdown, when present:
    /// `|total - impact - risk|` must not exceed the error estimate
    /// (plus a relative epsilon for rounding).
    pub fn is_self_consistent(&self) -> bool {
        match &self.breakdown {
            None => true,
            Some(b) => {
                let slack = self.abs_error_estimate + 1e-12 * self.total.abs().max(1.0);
                (self.total - b.impact - b.risk).abs() <= slack
            }
        }
    }
}
