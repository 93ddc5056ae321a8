//! Variance gamma parameter domain, martingale correction, log-return
//! densities (closed form and mixing integral), and moment formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{integrate_with_breakpoints, ln_bessel_k, ln_gamma, QuadratureSpec};

/// Parameters of the VG process: volatility and drift of the subordinated
/// Brownian motion (per √year and per year), and the variance of the gamma
/// time change (years).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgParams {
    pub sigma: f64,
    pub nu: f64,
    pub theta: f64,
}

impl VgParams {
    pub fn new(sigma: f64, nu: f64, theta: f64) -> Result<Self> {
        let p = VgParams { sigma, nu, theta };
        p.validate()?;
        Ok(p)
    }

    /// 1 − θν − σ²ν/2, the argument of the martingale-correction log.
    pub fn beta(&self) -> f64 {
        1.0 - self.theta * self.nu - 0.5 * self.sigma * self.sigma * self.nu
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::Domain(format!(
                "nu must be positive, got {}",
                self.nu
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::Domain(format!(
                "theta must be finite, got {}",
                self.theta
            )));
        }
        if !(self.beta() > 0.0) {
            return Err(Error::Domain(format!(
                "1 - theta*nu - sigma^2*nu/2 must be positive, got {} (sigma={}, nu={}, theta={})",
                self.beta(),
                self.sigma,
                self.nu,
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkParams {
    pub sigma: f64,
}

impl GkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Spot and the two continuously-compounded rates (domestic, foreign).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketEnv {
    pub spot: f64,
    pub r_d: f64,
    pub r_f: f64,
}

impl MarketEnv {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0) || !self.spot.is_finite() {
            return Err(Error::Domain(format!(
                "spot must be positive, got {}",
                self.spot
            )));
        }
        if !self.r_d.is_finite() || !self.r_f.is_finite() {
            return Err(Error::Domain("rates must be finite".into()));
        }
        Ok(())
    }
}

/// Everything the return density needs: process parameters, the horizon of
/// one observation (years), and the annual drift rate m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub vg: VgParams,
    pub horizon_t: f64,
    pub drift_m: f64,
}

impl DensityParams {
    pub fn validate(&self) -> Result<()> {
        self.vg.validate()?;
        if !(self.horizon_t > 0.0) || !self.horizon_t.is_finite() {
            return Err(Error::Domain(format!(
                "horizon_t must be positive, got {}",
                self.horizon_t
            )));
        }
        if !self.drift_m.is_finite() {
            return Err(Error::Domain(format!(
                "drift_m must be finite, got {}",
                self.drift_m
            )));
        }
        Ok(())
    }
}

/// Per-unit-time martingale correction ω = (1/ν)·ln(1 − θν − σ²ν/2).
/// Exponents always carry ω·t.
pub fn omega(vg: &VgParams) -> Result<f64> {
    vg.validate()?;
    Ok(vg.beta().ln() / vg.nu)
}

/// Centering for the return density: the raw log return z stripped of drift and
/// martingale correction, leaving the pure VG increment.
pub fn center_return(z: f64, params: &DensityParams) -> Result<f64> {
    let w = omega(&params.vg)?;
    Ok(z - params.drift_m * params.horizon_t - w * params.horizon_t)
}

/// ln of the VG log-return density at a centered point.
///
/// Log-space throughout: the Bessel factor underflows long before the
/// density becomes irrelevant to a likelihood, and for gamma shapes below
/// 1/2 the density blows up at the origin while staying integrable.
pub fn ln_vg_density(x_centered: f64, params: &DensityParams) -> Result<f64> {
    params.validate()?;
    let VgParams { sigma, nu, theta } = params.vg;
    let t = params.horizon_t;
    let shape = t / nu;
    let lambda = shape - 0.5;
    let sig2 = sigma * sigma;
    let a = 2.0 * sig2 / nu + theta * theta;

    // constant factor 2 / (nu^shape * sqrt(2 pi) * sigma * Gamma(shape))
    let ln_const = std::f64::consts::LN_2
        - shape * nu.ln()
        - 0.5 * (2.0 * std::f64::consts::PI).ln()
        - sigma.ln()
        - ln_gamma(shape)?;

    if x_centered == 0.0 {
        if lambda <= 0.0 {
            // the |x|^{2 lambda} singularity: integrable but unbounded
            return Ok(f64::INFINITY);
        }
        // (x^2/A)^{lambda/2} K_lambda(y) -> Gamma(lambda)/2 * (2 sigma^2 / A)^lambda
        return Ok(ln_const - std::f64::consts::LN_2
            + ln_gamma(lambda)?
            + lambda * (2.0 * sig2 / a).ln());
    }

    let ax = x_centered.abs();
    let y = ax * a.sqrt() / sig2;
    let ln_k = ln_bessel_k(lambda, y)?;
    Ok(ln_const + theta * x_centered / sig2 + lambda * (ax.ln() - 0.5 * a.ln()) + ln_k)
}

/// VG log-return density (Bessel closed form).
pub fn vg_density(x_centered: f64, params: &DensityParams) -> Result<f64> {
    Ok(ln_vg_density(x_centered, params)?.exp())
}

/// The defining normal–gamma mixture: ∫ N(x; θg, σ²g) Γ(g; t/ν, ν) dg,
/// integrated adaptively in v = ln(g/ν) with the integrand rescaled by its
/// peak so tail densities keep relative accuracy.
pub fn mixing_density(
    x_centered: f64,
    params: &DensityParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    params.validate()?;
    let VgParams { sigma, nu, theta } = params.vg;
    let t = params.horizon_t;
    let shape = t / nu;
    let sig2 = sigma * sigma;
    let x = x_centered;

    if x == 0.0 && shape <= 0.5 {
        return Ok(f64::INFINITY);
    }

    let lng = ln_gamma(shape)?;
    let ln_norm = -0.5 * (2.0 * std::f64::consts::PI * sig2 * nu).ln();
    let ln_integrand = move |v: f64| -> f64 {
        let ev = v.exp();
        if ev == 0.0 {
            return f64::NEG_INFINITY;
        }
        let quad_term = if x == 0.0 && theta == 0.0 {
            0.0
        } else {
            let dev = x - theta * nu * ev;
            -dev * dev / (2.0 * sig2 * nu * ev)
        };
        ln_norm - 0.5 * v + quad_term + shape * v - ev - lng
    };

    let tail = (quad.abs_tol / 10.0).max(1e-300);
    let mut v_lo = (tail.ln() + ln_gamma(shape + 1.0)?) / shape;
    if x != 0.0 {
        // below this point the normal factor is < e^{-e^50}: nothing there
        let cut = (x * x / (2.0 * sig2 * nu)).ln() - 50.0;
        v_lo = v_lo.max(cut.min(0.0));
    }
    let v_hi = (shape + 20.0 * (shape + 1.0).sqrt() + 60.0).ln();
    if v_lo >= v_hi {
        v_lo = v_hi - 1.0;
    }

    // coarse scan for the peak of the log-integrand
    let n_scan = 256;
    let h = (v_hi - v_lo) / n_scan as f64;
    let mut peak = f64::NEG_INFINITY;
    let mut v_peak = 0.5 * (v_lo + v_hi);
    for i in 0..=n_scan {
        let v = v_lo + i as f64 * h;
        let lv = ln_integrand(v);
        if lv > peak {
            peak = lv;
            v_peak = v;
        }
    }
    if peak == f64::NEG_INFINITY {
        return Ok(0.0);
    }

    // The u^{-1/2} mixing factor turns the gamma's u^{shape-1} weight into a
    // u^{shape-3/2} wedge at small u. For 1/2 < shape that wedge is
    // integrable but decays only like e^{(shape-1/2)v}, so the gamma-mass
    // cutoff above truncates it too early: push v_lo down until the omitted
    // piece is below `tail` relative to the peak-scaled integrand
    // (ln integrand <= ln_norm - lnG + (shape-1/2)v holds for every x).
    let scan_lo = v_lo;
    if shape > 0.5 {
        let wedge = shape - 0.5;
        let mut v_ext = (peak - (ln_norm - lng) + (tail * wedge).ln()) / wedge;
        if x != 0.0 {
            v_ext = v_ext.max(((x * x / (2.0 * sig2 * nu)).ln() - 50.0).min(0.0));
        }
        if v_ext < v_lo {
            v_lo = v_ext;
        }
    }

    let mut pts = vec![
        v_lo,
        scan_lo,
        v_peak - 4.0 * h,
        v_peak - h,
        v_peak,
        v_peak + h,
        v_peak + 4.0 * h,
        v_hi,
    ];
    pts.retain(|&v| (v_lo..=v_hi).contains(&v));
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let scaled = integrate_with_breakpoints(&|v: f64| (ln_integrand(v) - peak).exp(), &pts, quad)?;
    Ok(peak.exp() * scaled)
}

/// Σ ln vg_density over the centered returns. Any non-finite density
/// evaluation (underflow to 0, or the shape ≤ 1/2 singularity landing
/// exactly on a data point) poisons the sum to −∞ rather than erroring,
/// so an optimizer can treat it as an infinitely bad candidate.
pub fn log_likelihood(returns: &[f64], params: &DensityParams) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::Domain(
            "log_likelihood requires a nonempty sample".into(),
        ));
    }
    params.validate()?;
    let mut sum = 0.0;
    for &z in returns {
        let x = center_return(z, params)?;
        let lf = ln_vg_density(x, params)?;
        if !lf.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        sum += lf;
    }
    Ok(sum)
}

/// The paper-order moment tuple at unit time:
/// (mean rate, variance, third central, fourth central) =
/// (θ, σ², 3σ²θν, 3σ⁴(1+ν)). The undefined linear drift in the mean entry
/// is treated as zero; the inversion below never uses it.
pub fn moments_from_params(vg: &VgParams) -> Result<(f64, f64, f64, f64)> {
    vg.validate()?;
    let VgParams { sigma, nu, theta } = *vg;
    let sig2 = sigma * sigma;
    Ok((
        theta,
        sig2,
        3.0 * sig2 * theta * nu,
        3.0 * sig2 * sig2 * (1.0 + nu),
    ))
}

/// Inverts the approximate moment formulas: σ = √variance,
/// ν = m₄/(3σ⁴) − 1, θ = m₃/(3σ²ν).
pub fn params_from_moments(
    variance: f64,
    third_central: f64,
    fourth_central: f64,
) -> Result<VgParams> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!(
            "variance must be positive, got {variance}"
        )));
    }
    let sigma = variance.sqrt();
    let nu = fourth_central / (3.0 * variance * variance) - 1.0;
    if !(nu > 0.0) {
        return Err(Error::Domain(format!(
            "fourth central moment {fourth_central:e} implies excess kurtosis <= 0; \
             variance gamma cannot match"
        )));
    }
    let theta = third_central / (3.0 * variance * nu);
    Ok(VgParams { sigma, nu, theta })
}

/// κ = 3(1 + ν) at unit time.
pub fn kurtosis_from_nu(nu: f64) -> Result<f64> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("nu must be nonnegative, got {nu}")));
    }
    Ok(3.0 * (1.0 + nu))
}

/// Draws n log returns z = m·t + ω·t + θg + σ√g·Z with g ~ Γ(t/ν, scale ν),
/// reproducible from the seed.
pub fn simulate_returns(params: &DensityParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    use rand::Rng as _;
    use rand::SeedableRng as _;

    params.validate()?;
    let VgParams { sigma, nu, theta } = params.vg;
    let t = params.horizon_t;
    let w = omega(&params.vg)?;
    let gamma = rand_distr::Gamma::new(t / nu, nu)
        .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
    let normal = rand_distr::StandardNormal;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let base = params.drift_m * t + w * t;
    Ok((0..n)
        .map(|_| {
            let g: f64 = rng.sample(gamma);
            let z: f64 = rng.sample(normal);
            base + theta * g + sigma * g.sqrt() * z
        })
        .collect())
}
