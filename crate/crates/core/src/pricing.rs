//! European FX call pricers: Garman–Kohlhagen, the VG closed form built on
//! the Ψ mixture, and the two oracles (gamma-mixing quadrature, Monte Carlo)
//! that certify it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{integrate_with_breakpoints, ln_gamma, norm_cdf, psi_mixture, QuadratureSpec};
use crate::vgcore::{omega, GkParams, MarketEnv, VgParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptionKind {
    EuropeanCall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub strike: f64,
    pub maturity_t: f64,
    pub kind: OptionKind,
}

impl OptionSpec {
    pub fn call(strike: f64, maturity_t: f64) -> Self {
        OptionSpec {
            strike,
            maturity_t,
            kind: OptionKind::EuropeanCall,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return Err(Error::Domain(format!(
                "strike must be positive, got {}",
                self.strike
            )));
        }
        if !(self.maturity_t > 0.0) || !self.maturity_t.is_finite() {
            return Err(Error::Domain(format!(
                "maturity_t must be positive, got {}",
                self.maturity_t
            )));
        }
        Ok(())
    }
}

/// Garman–Kohlhagen: C = S·N(d₁)·e^{−r_f T} − K·N(d₂)·e^{−r_d T}.
pub fn price_gk(env: &MarketEnv, gk: &GkParams, opt: &OptionSpec) -> Result<f64> {
    env.validate()?;
    gk.validate()?;
    opt.validate()?;
    let t = opt.maturity_t;
    let sig_rt = gk.sigma * t.sqrt();
    let d1 = ((env.spot / opt.strike).ln() + (env.r_d - env.r_f + 0.5 * gk.sigma * gk.sigma) * t)
        / sig_rt;
    let d2 = d1 - sig_rt;
    Ok(env.spot * norm_cdf(d1) * (-env.r_f * t).exp()
        - opt.strike * norm_cdf(d2) * (-env.r_d * t).exp())
}

/// The five intermediates of the VG closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgPricingIntermediates {
    pub d: f64,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub s: f64,
}

/// s = σ/√(1 + (θ/σ)²ν/2), α = θs/σ², c₁ = ν(α+s)²/2, c₂ = να²/2,
/// d = (1/s)[ln(S/K) + (r_d − r_f)T + (T/ν)ln((1−c₁)/(1−c₂))].
pub fn vg_intermediates(
    env: &MarketEnv,
    vg: &VgParams,
    opt: &OptionSpec,
) -> Result<VgPricingIntermediates> {
    env.validate()?;
    vg.validate()?;
    opt.validate()?;
    let VgParams { sigma, nu, theta } = *vg;
    let t = opt.maturity_t;
    let s = sigma / (1.0 + (theta / sigma).powi(2) * nu / 2.0).sqrt();
    let alpha = theta * s / (sigma * sigma);
    let c1 = nu * (alpha + s) * (alpha + s) / 2.0;
    let c2 = nu * alpha * alpha / 2.0;
    if !(1.0 - c1 > 0.0) || !(1.0 - c2 > 0.0) {
        return Err(Error::Domain(format!(
            "closed form invalid: 1-c1 = {:e}, 1-c2 = {:e}",
            1.0 - c1,
            1.0 - c2
        )));
    }
    let d = ((env.spot / opt.strike).ln()
        + (env.r_d - env.r_f) * t
        + (t / nu) * ((1.0 - c1) / (1.0 - c2)).ln())
        / s;
    Ok(VgPricingIntermediates {
        d,
        c1,
        c2,
        alpha,
        s,
    })
}

/// VG closed form:
/// C = S e^{−r_f T} Ψ(d√((1−c₁)/ν), (α+s)√(ν/(1−c₁)), T/ν)
///   − K e^{−r_d T} Ψ(d√((1−c₂)/ν), α√(ν/(1−c₂)), T/ν).
pub fn price_vg_closed(
    env: &MarketEnv,
    vg: &VgParams,
    opt: &OptionSpec,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let im = vg_intermediates(env, vg, opt)?;
    let t = opt.maturity_t;
    let nu = vg.nu;
    let shape = t / nu;
    let psi1 = psi_mixture(
        im.d * ((1.0 - im.c1) / nu).sqrt(),
        (im.alpha + im.s) * (nu / (1.0 - im.c1)).sqrt(),
        shape,
        quad,
    )?;
    let psi2 = psi_mixture(
        im.d * ((1.0 - im.c2) / nu).sqrt(),
        im.alpha * (nu / (1.0 - im.c2)).sqrt(),
        shape,
        quad,
    )?;
    Ok(env.spot * (-env.r_f * t).exp() * psi1 - opt.strike * (-env.r_d * t).exp() * psi2)
}

/// Oracle pricer #1: conditional lognormal price integrated against the
/// gamma time density. Conditioned on gamma time g, ln S_T is normal with
/// mean ln S + (r_d − r_f + ω)T + θg and variance σ²g, so the inner
/// expectation is Black–Scholes-shaped; the outer integral runs in
/// v = ln(g/ν) with each term kept in log space until the last exp.
pub fn price_vg_mixing(
    env: &MarketEnv,
    vg: &VgParams,
    opt: &OptionSpec,
    quad: &QuadratureSpec,
) -> Result<f64> {
    env.validate()?;
    vg.validate()?;
    opt.validate()?;
    let VgParams { sigma, nu, theta } = *vg;
    let t = opt.maturity_t;
    let shape = t / nu;
    let w = omega(vg)?;
    let ln_k = opt.strike.ln();
    let base = env.spot.ln() + (env.r_d - env.r_f + w) * t;
    let lng = ln_gamma(shape)?;

    // effective exponential decay rate of the integrand in g, beta/nu;
    // computed through beta() so it shares omega's rounding and the
    // beta^{t/nu} factors cancel exactly even when beta is at the edge of
    // representability
    let rate = vg.beta() / nu;
    let scale_eff = 1.0 / rate;

    let ln_weight = move |v: f64| shape * v - v.exp() - lng;
    let integrand = move |v: f64| -> f64 {
        let g = nu * v.exp();
        if g == 0.0 {
            return 0.0;
        }
        let sd = sigma * g.sqrt();
        let m = base + theta * g;
        let d2 = (m - ln_k) / sd;
        let d1 = d2 + sd;
        // the spot-leg exponent m + sigma^2 g/2 + ln_weight(v) written so the
        // O(g) pieces combine into -rate*g instead of cancelling in f64
        let t1 = (base - lng + shape * v - rate * g).exp() * norm_cdf(d1);
        let t2 = (ln_k + ln_weight(v)).exp() * norm_cdf(d2);
        t1 - t2
    };

    let tail = (quad.abs_tol / 10.0).max(1e-300);
    let v_lo = (tail.ln() + ln_gamma(shape + 1.0)?) / shape;
    // upper cut where the effective exponential has shed 20 sd + padding,
    // expressed on the gamma's own scale
    let g_hi = (scale_eff.max(nu)) * (shape + 20.0 * (shape + 1.0).sqrt() + 60.0);
    let v_hi = (g_hi / nu).ln();

    let v_star = shape.ln();
    let spread = 8.0 / shape.sqrt();
    let mut pts = vec![
        v_lo,
        v_star - 4.0 * spread,
        v_star - spread,
        v_star,
        v_star + spread,
        v_star + 4.0 * spread,
        v_hi,
    ];
    pts.retain(|&v| (v_lo..=v_hi).contains(&v));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        pts = vec![v_lo, v_hi];
    }

    let undiscounted = integrate_with_breakpoints(&integrand, &pts, quad)?;
    Ok((-env.r_d * t).exp() * undiscounted)
}

/// Oracle pricer #2: Monte Carlo under the risk-neutral VG dynamics.
/// Returns (price, standard error); bitwise reproducible for a fixed seed.
pub fn price_vg_mc(
    env: &MarketEnv,
    vg: &VgParams,
    opt: &OptionSpec,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    use rand::Rng as _;
    use rand::SeedableRng as _;

    env.validate()?;
    vg.validate()?;
    opt.validate()?;
    if n_paths == 0 {
        return Err(Error::Domain("n_paths must be at least 1".into()));
    }
    let VgParams { sigma, nu, theta } = *vg;
    let t = opt.maturity_t;
    let w = omega(vg)?;
    let drift = (env.r_d - env.r_f) * t + w * t;
    let gamma = rand_distr::Gamma::new(t / nu, nu)
        .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
    let normal = rand_distr::StandardNormal;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_paths {
        let g: f64 = rng.sample(gamma);
        let z: f64 = rng.sample(normal);
        let s_t = env.spot * (drift + theta * g + sigma * g.sqrt() * z).exp();
        let payoff = (s_t - opt.strike).max(0.0);
        sum += payoff;
        sum_sq += payoff * payoff;
    }
    let n = n_paths as f64;
    let mean = sum / n;
    let disc = (-env.r_d * t).exp();
    let var = ((sum_sq - sum * sum / n) / (n - 1.0).max(1.0)).max(0.0);
    Ok((disc * mean, disc * (var / n).sqrt()))
}

/// Result of the public VG pricing entry: the price plus whether the
/// closed form had to be replaced by the mixing quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgPriceOutcome {
    pub price: f64,
    pub fallback_used: bool,
}

/// Public VG pricing entry: closed form when its intermediates are valid,
/// transparent fallback to the mixing quadrature otherwise.
pub fn price_vg(
    env: &MarketEnv,
    vg: &VgParams,
    opt: &OptionSpec,
    quad: &QuadratureSpec,
) -> Result<VgPriceOutcome> {
    match vg_intermediates(env, vg, opt) {
        Ok(_) => Ok(VgPriceOutcome {
            price: price_vg_closed(env, vg, opt, quad)?,
            fallback_used: false,
        }),
        Err(Error::Domain(_)) => Ok(VgPriceOutcome {
            price: price_vg_mixing(env, vg, opt, quad)?,
            fallback_used: true,
        }),
        Err(e) => Err(e),
    }
}
