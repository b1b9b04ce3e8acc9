//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 7-point Gauss rule embedded in a 15-point Kronrod extension, refined by
//! repeatedly bisecting whichever segment currently carries the largest
//! error estimate. The integrands in this crate (cost densities, clock
//! rates, exponentiated Riccati antiderivatives) are smooth or piecewise
//! smooth with isolated kinks, which this strategy resolves quickly and —
//! because the worst segment is chosen by a deterministic scan — always in
//! the same order for the same input.

/// Kronrod nodes on `[0, 1]` side of `[-1, 1]` (descending; last is 0).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Weights of the embedded 7-point Gauss rule (odd-index nodes of `XGK`).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Default relative tolerance for cost-functional integrals.
pub const DEFAULT_REL_TOL: f64 = 1e-10;
/// Default absolute tolerance floor.
pub const DEFAULT_ABS_TOL: f64 = 1e-14;
/// Maximum bisection depth per segment.
pub const MAX_LEVELS: u32 = 20;
/// Hard cap on live segments (breadth guard for non-integrable inputs).
const MAX_SEGMENTS: usize = 1 << 15;

/// Converged (or best-effort) integral value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum QuadError {
    #[error("integration bounds must be finite and ordered: [{a}, {b}]")]
    BadBounds { a: f64, b: f64 },

    #[error("integrand returned a non-finite value near s = {at}")]
    NonFinite { at: f64 },

    #[error(
        "quadrature did not converge: best estimate {} with error {:e} after {} evaluations",
        best.value, best.abs_error, best.evaluations
    )]
    NotConverged { best: QuadResult },
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

/// One 15-point Kronrod application on `[a, b]`.
///
/// Returns `(kronrod_value, |kronrod - gauss|)` — the second entry is the
/// classical embedded error estimate, conservative for smooth integrands.
fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { at: x })
        }
    };
    let fc = eval(c)?;
    let mut resg = WG[3] * fc;
    let mut resk = WGK[7] * fc;
    for j in 0..3 {
        let i = 2 * j + 1;
        let dx = hl * XGK[i];
        let fsum = eval(c - dx)? + eval(c + dx)?;
        resg += WG[j] * fsum;
        resk += WGK[i] * fsum;
    }
    for j in 0..4 {
        let i = 2 * j;
        let dx = hl * XGK[i];
        let fsum = eval(c - dx)? + eval(c + dx)?;
        resk += WGK[i] * fsum;
    }
    Ok((resk * hl, ((resk - resg) * hl).abs()))
}

/// Adaptive integral of `f` over `[a, b]`.
///
/// Refinement stops once the summed error estimate drops below
/// `max(abs_tol, rel_tol * |value|)`. On failure to converge the error
/// carries the best estimate obtained so far, so callers can still report
/// a value alongside the failure.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult, QuadError> {
    if !a.is_finite() || !b.is_finite() || a > b {
        return Err(QuadError::BadBounds { a, b });
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }

    // Seed with two segments: a single panel can alias structure that is
    // symmetric about the midpoint, and the split costs almost nothing.
    let mid = 0.5 * (a + b);
    let mut evaluations = 0usize;
    let mut segments: Vec<Segment> = Vec::with_capacity(64);
    for (lo, hi) in [(a, mid), (mid, b)] {
        let (value, error) = kronrod(&f, lo, hi)?;
        evaluations += 15;
        segments.push(Segment {
            a: lo,
            b: hi,
            value,
            error,
            depth: 1,
        });
    }

    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        let best = QuadResult {
            value: total,
            abs_error: total_error,
            evaluations,
        };
        if total_error <= target {
            return Ok(best);
        }

        // Deterministic worst-first refinement: first strict maximum wins.
        let mut worst = 0usize;
        for (i, seg) in segments.iter().enumerate() {
            if seg.error > segments[worst].error {
                worst = i;
            }
        }
        if segments[worst].depth >= MAX_LEVELS || segments.len() >= MAX_SEGMENTS {
            return Err(QuadError::NotConverged { best });
        }

        let Segment { a, b, depth, .. } = segments[worst];
        let m = 0.5 * (a + b);
        let (lv, le) = kronrod(&f, a, m)?;
        let (rv, re) = kronrod(&f, m, b)?;
        evaluations += 30;
        segments[worst] = Segment {
            a,
            b: m,
            value: lv,
            error: le,
            depth: depth + 1,
        };
        segments.push(Segment {
            a: m,
            b,
            value: rv,
            error: re,
            depth: depth + 1,
        });
    }
}

/// Convenience wrapper with the crate-default tolerances.
pub fn integrate_default<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<QuadResult, QuadError> {
    integrate(f, a, b, DEFAULT_REL_TOL, DEFAULT_ABS_TOL)
}

/// Fixed 5-point Gauss–Legendre rule on `[a, b]`.
///
/// Exact for polynomials of degree nine; used to accumulate cumulative
/// integral tables over fine uniform grids where adaptivity is unnecessary.
pub fn gauss5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    const X: [f64; 2] = [0.538469310105683091036314420700208, 0.906179845938663992797626878299393];
    const W0: f64 = 0.568888888888888888888888888888889;
    const W: [f64; 2] = [0.478628670499366468041291514835638, 0.236926885056189087514264040719917];
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let mut acc = W0 * f(c);
    for i in 0..2 {
        let dx = hl * X[i];
        acc += W[i] * (f(c - dx) + f(c + dx));
    }
    acc * hl
}
