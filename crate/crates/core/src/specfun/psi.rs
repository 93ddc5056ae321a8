//! The gamma-mixture of normal CDFs at the heart of the closed-form price.

use crate::error::{Error, Result};
use crate::specfun::quad::{integrate_with_breakpoints, QuadratureSpec};
use crate::specfun::{ln_gamma, norm_cdf};

/// Psi(a, b, gamma) = E[ N(a/sqrt(U) + b sqrt(U)) ] with U ~ Gamma(gamma, 1).
///
/// Integrated in v = ln u, which makes the tiny-shape case (gamma << 1,
/// where the gamma density piles up mass near u = 0 over hundreds of orders
/// of magnitude) a smooth slowly-decaying exponential instead of an
/// integrable singularity. The lower cut keeps the discarded gamma tail
/// mass below abs_tol / 10; the upper cut sits 20 standard deviations past
/// the mean, padded for small shapes.
pub fn psi_mixture(a: f64, b: f64, gamma_shape: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(gamma_shape > 0.0) || !gamma_shape.is_finite() {
        return Err(Error::Domain(format!(
            "psi_mixture requires gamma_shape > 0, got {gamma_shape}"
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "psi_mixture arguments not finite: a={a}, b={b}"
        )));
    }

    let g = gamma_shape;
    let lng = ln_gamma(g)?;
    let lng1 = ln_gamma(g + 1.0)?;

    let tail = (quad.abs_tol / 10.0).max(1e-300);
    let v_lo = (tail.ln() + lng1) / g;
    let u_hi = g + 20.0 * (g + 1.0).sqrt() + 60.0;
    let v_hi = u_hi.ln();

    // The exponent g·v − e^v − lnΓ(g) is O(lnΓ) in magnitude, so exp() of it
    // carries ~eps·lnΓ pointwise relative noise; for huge shapes (tiny ν in
    // the callers) a tighter relative target than that floor can never be
    // certified and would only exhaust the subdivision budget.
    let noise_rel = 4.0 * f64::EPSILON * (1.0 + lng1.abs());
    let quad_eff = QuadratureSpec {
        rel_tol: quad.rel_tol.max(noise_rel),
        ..*quad
    };

    let integrand = |v: f64| {
        let ev = v.exp();
        // e^{-v/2} can overflow to +inf deep in the left tail; the CDF of
        // +/-inf is still exact, but 0 * inf is not, hence the split on a.
        let arg = if a == 0.0 {
            b * (0.5 * v).exp()
        } else {
            a * (-0.5 * v).exp() + b * (0.5 * v).exp()
        };
        let ln_weight = g * v - ev - lng;
        norm_cdf(arg) * ln_weight.exp()
    };

    // Seed the subdivision at the gamma mode so a narrow peak (large shape)
    // cannot slip between the nodes of the first rule application.
    let v_star = g.ln();
    let s = 8.0 / g.sqrt();
    let mut pts = vec![
        v_lo,
        v_star - 4.0 * s,
        v_star - s,
        v_star,
        v_star + s,
        v_star + 4.0 * s,
        v_hi,
    ];
    pts.retain(|&v| (v_lo..=v_hi).contains(&v));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        pts = vec![v_lo, v_hi];
    }

    let raw = integrate_with_breakpoints(&integrand, &pts, &quad_eff)?;
    if raw < -1e-6 || raw > 1.0 + 1e-6 {
        return Err(Error::Quadrature(format!(
            "psi_mixture left [0, 1]: {raw:e} (a={a}, b={b}, gamma={gamma_shape})"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}
