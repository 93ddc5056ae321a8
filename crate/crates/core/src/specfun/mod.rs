//! Special functions and quadrature shared by the density and pricing code.

mod bessel;
mod psi;
mod quad;

pub use bessel::{bessel_k, ln_bessel_k};
pub use psi::psi_mixture;
pub use quad::{integrate, integrate_with_breakpoints, QuadratureSpec};

use crate::error::{Error, Result};

/// ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(libm::lgamma(x))
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF via the complementary error function, which keeps
/// relative accuracy in the far left tail where 1 - N(-x) would cancel.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
