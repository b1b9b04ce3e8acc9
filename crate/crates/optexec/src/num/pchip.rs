//! Shape-preserving piecewise-cubic Hermite interpolation (Fritsch–Carlson).
//!
//! Knot slopes are weighted harmonic means of adjacent secants, zeroed at
//! local extrema. The resulting interpolant is monotone on every interval
//! where the data are monotone — which is what keeps interpolated impact
//! coefficients positive and interpolated schedules free of spurious
//! oscillation. Second derivatives are available but only piecewise linear
//! (and discontinuous at knots), so consumers treat them as approximate.

#[derive(Debug, thiserror::Error)]
pub enum PchipError {
    #[error("at least {min} interpolation points are required, got {got}")]
    TooFewPoints { min: usize, got: usize },

    #[error("abscissae must be strictly increasing (violated at index {index})")]
    NotStrictlyIncreasing { index: usize },

    #[error("non-finite interpolation datum at index {index}")]
    NonFinite { index: usize },
}

/// Monotone piecewise-cubic interpolant of `(x, y)` data.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    /// Builds the interpolant. Requires at least two strictly increasing,
    /// finite abscissae and finite ordinates.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, PchipError> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(PchipError::TooFewPoints {
                min: 2,
                got: n.min(ys.len()),
            });
        }
        for i in 0..n {
            if !xs[i].is_finite() || !ys[i].is_finite() {
                return Err(PchipError::NonFinite { index: i });
            }
            if i > 0 && xs[i] <= xs[i - 1] {
                return Err(PchipError::NotStrictlyIncreasing { index: i });
            }
        }
        let ds = slopes(&xs, &ys);
        Ok(Self { xs, ys, ds })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn min_x(&self) -> f64 {
        self.xs[0]
    }

    pub fn max_x(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    /// Index of the segment containing `x` (end segments for out-of-range
    /// queries, so evaluation extrapolates with the boundary cubic).
    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0;
        }
        if x >= self.xs[n - 1] {
            return n - 2;
        }
        // partition_point returns the count of knots <= x, in 1..n-1 here.
        self.xs.partition_point(|&k| k <= x) - 1
    }

    pub fn value(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * (y0 - y1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (3.0 * t2 - 2.0 * t) * d1
    }

    /// Piecewise-linear second derivative; discontinuous across knots.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1]);
        (12.0 * t - 6.0) * (y0 - y1) / (h * h)
            + (6.0 * t - 4.0) * d0 / h
            + (6.0 * t - 2.0) * d1 / h
    }
}

/// Fritsch–Carlson knot slopes.
fn slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 2 {
        let d = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        return vec![d, d];
    }
    let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

    let mut ds = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 <= 0.0 {
            ds[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            ds[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    ds[0] = endpoint_slope(h[0], h[1], delta[0], delta[1]);
    ds[n - 1] = endpoint_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    ds
}

/// Three-point endpoint slope with the standard monotonicity clamps.
fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn reproduces_linear_data_exactly() {
        let xs = vec![0.0, 0.3, 1.0, 2.5];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let p = Pchip::new(xs, ys).unwrap();
        for &x in &sample_grid(0.0, 2.5, 101) {
            assert!((p.value(x) - (2.0 * x - 1.0)).abs() <= 1e-14);
            assert!((p.derivative(x) - 2.0).abs() <= 1e-13);
        }
    }

    #[test]
    fn interpolates_knots_exactly() {
        let xs = vec![-1.0, 0.0, 0.5, 2.0, 3.0];
        let ys = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(p.value(*x), *y);
        }
    }

    #[test]
    fn preserves_monotonicity_of_increasing_data() {
        let xs = vec![0.0, 1.0, 1.2, 3.0, 3.1, 5.0];
        let ys = vec![0.0, 0.1, 2.0, 2.05, 4.0, 4.2];
        let p = Pchip::new(xs, ys).unwrap();
        let grid = sample_grid(0.0, 5.0, 2001);
        for w in grid.windows(2) {
            assert!(
                p.value(w[1]) >= p.value(w[0]) - 1e-12,
                "dip between {} and {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn stays_positive_between_positive_knots() {
        // Sharp positive spike: a plain cubic spline would undershoot below
        // zero next to it; the shape-preserving interpolant must not.
        let xs = vec![0.0, 1.0, 1.1, 1.2, 2.0, 3.0];
        let ys = vec![0.02, 0.01, 5.0, 0.01, 0.015, 0.02];
        let p = Pchip::new(xs, ys).unwrap();
        for &x in &sample_grid(0.0, 3.0, 4001) {
            assert!(p.value(x) > 0.0, "went nonpositive at {x}");
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let xs = sample_grid(0.0, 2.0, 21);
        let ys: Vec<f64> = xs.iter().map(|x| (x * x + 1.0).ln()).collect();
        let p = Pchip::new(xs, ys).unwrap();
        let h = 1e-6;
        for &x in &[0.31, 0.77, 1.23, 1.69] {
            let fd = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
            assert!((p.derivative(x) - fd).abs() <= 1e-7, "at {x}");
        }
    }

    #[test]
    fn second_derivative_matches_difference_quotient_inside_segments() {
        let xs = sample_grid(0.0, 1.0, 6);
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        let p = Pchip::new(xs, ys).unwrap();
        let h = 1e-5;
        // Stay well inside one segment: the second derivative jumps at knots.
        let x = 0.31;
        let fd = (p.value(x + h) - 2.0 * p.value(x) + p.value(x - h)) / (h * h);
        assert!((p.second_derivative(x) - fd).abs() <= 1e-4);
    }

    #[test]
    fn converges_cubically_on_smooth_data() {
        let f = |x: f64| (1.0 + x).ln();
        let sup_err = |n: usize| -> f64 {
            let xs = sample_grid(0.0, 1.0, n);
            let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
            let p = Pchip::new(xs, ys).unwrap();
            sample_grid(0.0, 1.0, 4097)
                .iter()
                .map(|&x| (p.value(x) - f(x)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (sup_err(33), sup_err(65));
        let order = (e1 / e2).log2();
        assert!(order > 2.5, "observed order {order}, errors {e1:e}/{e2:e}");
    }

    #[test]
    fn extrapolates_with_the_boundary_cubic() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        let ys = vec![0.0, 1.0, 2.0, 3.0];
        let p = Pchip::new(xs, ys).unwrap();
        // Linear data extrapolate linearly.
        assert!((p.value(-0.5) + 0.5).abs() <= 1e-12);
        assert!((p.value(3.25) - 3.25).abs() <= 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(
            Pchip::new(vec![1.0], vec![2.0]),
            Err(PchipError::TooFewPoints { .. })
        ));
        assert!(matches!(
            Pchip::new(vec![0.0, 0.0, 1.0], vec![1.0, 2.0, 3.0]),
            Err(PchipError::NotStrictlyIncreasing { index: 1 })
        ));
        assert!(matches!(
            Pchip::new(vec![0.0, 1.0], vec![f64::NAN, 0.0]),
            Err(PchipError::NonFinite { index: 0 })
        ));
    }
}
