//! Overflow-free hyperbolic ratios.
//!
//! Optimal schedules are built from ratios like `sinh(p)/sinh(q)` where `p`
//! and `q` grow linearly with the risk/impact ratio and the horizon length.
//! Evaluating numerator and denominator separately overflows near argument
//! ~710; factoring out the dominant exponential keeps every intermediate in
//! `exp(p - q)` territory, which is exactly the size of the answer.

/// `sinh(p) / sinh(q)` for `p >= 0`, `q > 0`.
///
/// Uses `sinh(z) = exp(z) (1 - exp(-2z)) / 2`, so the ratio is
/// `exp(p - q) * (1 - e^{-2p}) / (1 - e^{-2q})` with both parenthesised
/// factors computed by `expm1` — accurate for tiny and huge arguments alike.
pub fn sinh_ratio(p: f64, q: f64) -> f64 {
    debug_assert!(p >= 0.0 && q > 0.0);
    if p == 0.0 {
        return 0.0;
    }
    // For small arguments the direct ratio is fine and avoids 0/0 edge cases.
    if p < 1.0 && q < 1.0 {
        return p.sinh() / q.sinh();
    }
    (p - q).exp() * (-(-2.0 * p).exp_m1()) / (-(-2.0 * q).exp_m1())
}

/// `cosh(p) / sinh(q)` for `p >= 0`, `q > 0`.
pub fn cosh_sinh_ratio(p: f64, q: f64) -> f64 {
    debug_assert!(p >= 0.0 && q > 0.0);
    if p < 1.0 && q < 1.0 {
        return p.cosh() / q.sinh();
    }
    (p - q).exp() * (1.0 + (-2.0 * p).exp()) / (-(-2.0 * q).exp_m1())
}

/// `cosh(p) / cosh(q)` for arbitrary real `p`, `q`.
pub fn cosh_ratio(p: f64, q: f64) -> f64 {
    let (p, q) = (p.abs(), q.abs());
    if p < 1.0 && q < 1.0 {
        return p.cosh() / q.cosh();
    }
    (p - q).exp() * (1.0 + (-2.0 * p).exp()) / (1.0 + (-2.0 * q).exp())
}

/// `coth(z)` for `z > 0`.
pub fn coth(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    1.0 / z.tanh()
}
