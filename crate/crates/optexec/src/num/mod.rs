//! Small self-contained numerical kernels used throughout the solver:
//! stable hyperbolic ratios, adaptive Gauss–Kronrod quadrature,
//! shape-preserving cubic interpolation, a tridiagonal (Thomas) solver, and
//! an embedded Runge–Kutta integrator with dense output.

pub mod hyper;
pub mod pchip;
pub mod quad;
pub mod rk;
pub mod tridiag;
