//! Special functions and small numeric utilities shared by the rest of the
//! crate: modified Bessel I0, the regularized 0F1(;1;z), the first-order
//! Marcum Q function, tensor-product Gauss-Legendre quadrature over
//! rectangles and a bracketing bisection solver.
//!
//! Everything here is a pure function of its inputs.

mod bessel;
mod marcum;
mod quadrature;
mod roots;

pub use bessel::{bessel_i0, bessel_i0_scaled, hyp0f1_reg, log_bessel_i0};
pub use marcum::marcum_q1;
pub use quadrature::{gauss_legendre, integrate_2d, QuadratureRule, Rect};
pub use roots::{bisect, BISECT_MAX_ITER};
