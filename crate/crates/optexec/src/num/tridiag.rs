//! Tridiagonal linear solves (Thomas algorithm).
//!
//! The discretised optimality system is symmetric positive definite with a
//! strictly dominant diagonal, so plain forward elimination without pivoting
//! is stable here. Pivots are still checked: a (near-)zero pivot means the
//! caller assembled a degenerate system and deserves an error, not NaNs.

#[derive(Debug, thiserror::Error)]
pub enum TridiagError {
    #[error("band lengths are inconsistent: diag {diag}, sub {sub}, sup {sup}, rhs {rhs}")]
    ShapeMismatch {
        diag: usize,
        sub: usize,
        sup: usize,
        rhs: usize,
    },

    #[error("zero or non-finite pivot {pivot:e} at row {row}")]
    BadPivot { row: usize, pivot: f64 },
}

/// Solves the system with subdiagonal `sub`, diagonal `diag`, superdiagonal
/// `sup`, and right-hand side `rhs`. For an `n`-row system, `sub` and `sup`
/// have length `n - 1`.
pub fn solve(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, TridiagError> {
    let n = diag.len();
    if n == 0 || sub.len() != n - 1 || sup.len() != n - 1 || rhs.len() != n {
        return Err(TridiagError::ShapeMismatch {
            diag: n,
            sub: sub.len(),
            sup: sup.len(),
            rhs: rhs.len(),
        });
    }

    let mut c = vec![0.0; n - 1]; // modified superdiagonal
    let mut d = vec![0.0; n]; // modified rhs

    let mut pivot = diag[0];
    if !pivot.is_finite() || pivot == 0.0 {
        return Err(TridiagError::BadPivot { row: 0, pivot });
    }
    if n > 1 {
        c[0] = sup[0] / pivot;
    }
    d[0] = rhs[0] / pivot;

    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        if !pivot.is_finite() || pivot == 0.0 {
            return Err(TridiagError::BadPivot { row: i, pivot });
        }
        if i < n - 1 {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }

    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}
