//! Nelder–Mead simplex optimizer and the two calibration procedures:
//! historical MLE on daily log returns, and weekly risk-neutral fits to
//! option chains under an L1 loss on log prices.

use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pricing::{price_gk, price_vg, OptionSpec};
use crate::specfun::QuadratureSpec;
use crate::vgcore::{
    log_likelihood, omega, params_from_moments, DensityParams, GkParams, MarketEnv, VgParams,
};

pub const TRADING_DAYS: f64 = 252.0;

/// Box bounds of the weekly/historical fits; chosen to keep the closed
/// form's log argument comfortably positive.
pub const SIGMA_BOUNDS: (f64, f64) = (1e-4, 2.0);
pub const NU_BOUNDS: (f64, f64) = (1e-4, 2.0);
pub const THETA_BOUNDS: (f64, f64) = (-0.5, 0.5);
pub const MIN_BETA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iters: u64,
    pub restarts: u32,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            x_tol: 1e-11,
            f_tol: 1e-13,
            max_iters: 3000,
            restarts: 2,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reflection > 0.0)
            || !(self.expansion > 1.0)
            || !(self.contraction > 0.0 && self.contraction < 1.0)
            || !(self.shrink > 0.0 && self.shrink < 1.0)
            || self.max_iters < 1
        {
            return Err(Error::Domain("invalid simplex coefficients".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitVariant {
    Gk,
    Vg,
    SymmetricVg,
}

impl FitVariant {
    pub const ALL: [FitVariant; 3] = [FitVariant::Gk, FitVariant::Vg, FitVariant::SymmetricVg];

    pub fn as_str(&self) -> &'static str {
        match self {
            FitVariant::Gk => "gk",
            FitVariant::Vg => "vg",
            FitVariant::SymmetricVg => "symmetric_vg",
        }
    }
}

impl fmt::Display for FitVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FitVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gk" => Ok(FitVariant::Gk),
            "vg" => Ok(FitVariant::Vg),
            "svg" | "symmetric_vg" => Ok(FitVariant::SymmetricVg),
            other => Err(Error::Domain(format!(
                "unknown model variant '{other}' (expected gk, vg, or svg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedParams {
    Vg(VgParams),
    Gk(GkParams),
}

impl FittedParams {
    pub fn as_vg(&self) -> Option<&VgParams> {
        match self {
            FittedParams::Vg(p) => Some(p),
            FittedParams::Gk(_) => None,
        }
    }

    pub fn as_gk(&self) -> Option<&GkParams> {
        match self {
            FittedParams::Gk(p) => Some(p),
            FittedParams::Vg(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub variant: FitVariant,
    pub params: FittedParams,
    pub loss: f64,
    pub iterations: u64,
    pub converged: bool,
    /// closed-form pricing was unavailable at least once during the fit
    pub fallback_used: bool,
    /// moment initialization failed (excess kurtosis ≤ 0) and fell back to ν = 0.1
    #[serde(default)]
    pub moment_fallback: bool,
}

/// Per-parameter box. Projection returns the L2 distance moved, which the
/// optimizer turns into a penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::Domain("invalid bounds".into()));
        }
        Ok(Bounds { lo, hi })
    }

    fn project(&self, x: &mut [f64]) -> f64 {
        let mut dist_sq = 0.0;
        for (xi, (&lo, &hi)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            let clamped = xi.clamp(lo, hi);
            dist_sq += (*xi - clamped) * (*xi - clamped);
            *xi = clamped;
        }
        dist_sq.sqrt()
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub loss: f64,
    pub iterations: u64,
    pub converged: bool,
}

const PENALTY_SLOPE: f64 = 1e6;

/// Edge lengths for a fresh simplex around a point: 10% of each coordinate,
/// with an absolute floor for coordinates at zero.
fn seed_simplex(center: &[f64], bounds: &Bounds) -> Vec<Vec<f64>> {
    let n = center.len();
    let mut vertices = Vec::with_capacity(n + 1);
    vertices.push(center.to_vec());
    for i in 0..n {
        let mut v = center.to_vec();
        let step = if v[i] != 0.0 { 0.1 * v[i].abs() } else { 1e-3 };
        // step away from the nearer bound so the vertex stays in the box
        if v[i] + step <= bounds.hi[i] {
            v[i] += step;
        } else {
            v[i] -= step;
        }
        bounds.project(&mut v);
        vertices.push(v);
    }
    vertices
}

/// Classical Nelder–Mead over a box. Out-of-box trial points are projected
/// onto the box and penalized by 1e6 times the projection distance, so the
/// working simplex always lives inside the bounds. Deterministic: no
/// randomness anywhere, restarts re-seed at the incumbent with fixed 10%
/// edge lengths. Never returns a point worse than the initial one.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    initial: &[f64],
    bounds: &Bounds,
    config: &SimplexConfig,
) -> Result<SimplexOutcome> {
    config.validate()?;
    let n = initial.len();
    if n == 0 {
        return Err(Error::Domain("empty parameter vector".into()));
    }
    if bounds.lo.len() != n {
        return Err(Error::Domain("bounds dimension mismatch".into()));
    }
    if !bounds.contains(initial) {
        return Err(Error::Domain("initial point outside bounds".into()));
    }

    let mut eval = |x: &[f64]| -> Result<f64> {
        let mut proj = x.to_vec();
        let dist = bounds.project(&mut proj);
        let f = objective(&proj);
        if f.is_nan() {
            return Err(Error::Calibration(format!(
                "objective returned NaN at {proj:?}"
            )));
        }
        Ok(f + PENALTY_SLOPE * dist)
    };

    let f_init = eval(initial)?;
    if !f_init.is_finite() {
        return Err(Error::Calibration(
            "objective not finite at the initial point".into(),
        ));
    }

    let mut best_x = initial.to_vec();
    let mut best_f = f_init;
    let mut total_iters = 0u64;
    let mut converged = false;

    for _pass in 0..=config.restarts {
        let mut vs = seed_simplex(&best_x, bounds);
        let mut fs = Vec::with_capacity(n + 1);
        for v in &vs {
            fs.push(eval(v)?);
        }

        converged = false;
        for _ in 0..config.max_iters {
            total_iters += 1;

            // order best..worst
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
            let ordered_v: Vec<Vec<f64>> = idx.iter().map(|&i| vs[i].clone()).collect();
            let ordered_f: Vec<f64> = idx.iter().map(|&i| fs[i]).collect();
            vs = ordered_v;
            fs = ordered_f;

            let diameter = vs[1..]
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(&vs[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            let spread = fs[n] - fs[0];
            if diameter < config.x_tol || spread < config.f_tol {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| vs[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();

            let point_along = |coef: f64| -> Vec<f64> {
                (0..n)
                    .map(|j| centroid[j] + coef * (centroid[j] - vs[n][j]))
                    .collect()
            };

            let xr = point_along(config.reflection);
            let fr = eval(&xr)?;

            if fr < fs[0] {
                let xe = point_along(config.reflection * config.expansion);
                let fe = eval(&xe)?;
                if fe < fr {
                    vs[n] = xe;
                    fs[n] = fe;
                } else {
                    vs[n] = xr;
                    fs[n] = fr;
                }
            } else if fr < fs[n - 1] {
                vs[n] = xr;
                fs[n] = fr;
            } else {
                let (xc, fc) = if fr < fs[n] {
                    let x = point_along(config.reflection * config.contraction);
                    let f = eval(&x)?;
                    (x, f)
                } else {
                    let x = point_along(-config.contraction);
                    let f = eval(&x)?;
                    (x, f)
                };
                if fc < fs[n].min(fr) {
                    vs[n] = xc;
                    fs[n] = fc;
                } else {
                    // shrink toward the best vertex
                    for i in 1..=n {
                        for j in 0..n {
                            vs[i][j] = vs[0][j] + config.shrink * (vs[i][j] - vs[0][j]);
                        }
                        fs[i] = eval(&vs[i])?;
                    }
                }
            }
        }

        for (v, &f) in vs.iter().zip(&fs) {
            if f < best_f {
                best_f = f;
                best_x = v.clone();
            }
        }
    }

    Ok(SimplexOutcome {
        x: best_x,
        loss: best_f,
        iterations: total_iters,
        converged,
    })
}

fn vg_bounds(variant: FitVariant) -> Bounds {
    match variant {
        FitVariant::Vg => Bounds {
            lo: vec![SIGMA_BOUNDS.0, NU_BOUNDS.0, THETA_BOUNDS.0],
            hi: vec![SIGMA_BOUNDS.1, NU_BOUNDS.1, THETA_BOUNDS.1],
        },
        FitVariant::SymmetricVg => Bounds {
            lo: vec![SIGMA_BOUNDS.0, NU_BOUNDS.0],
            hi: vec![SIGMA_BOUNDS.1, NU_BOUNDS.1],
        },
        FitVariant::Gk => Bounds {
            lo: vec![SIGMA_BOUNDS.0],
            hi: vec![SIGMA_BOUNDS.1],
        },
    }
}

fn vec_to_vg(x: &[f64], variant: FitVariant) -> VgParams {
    match variant {
        FitVariant::Vg => VgParams {
            sigma: x[0],
            nu: x[1],
            theta: x[2],
        },
        FitVariant::SymmetricVg => VgParams {
            sigma: x[0],
            nu: x[1],
            theta: 0.0,
        },
        FitVariant::Gk => unreachable!("gk has no VG parameter vector"),
    }
}

fn vg_to_vec(p: &VgParams, variant: FitVariant) -> Vec<f64> {
    match variant {
        FitVariant::Vg => vec![p.sigma, p.nu, p.theta],
        FitVariant::SymmetricVg => vec![p.sigma, p.nu],
        FitVariant::Gk => unreachable!("gk has no VG parameter vector"),
    }
}

/// Sloped penalty for candidates violating the joint constraint β > 1e-6,
/// so the simplex is pushed back instead of stranded on a flat plateau.
fn beta_penalty(p: &VgParams) -> Option<f64> {
    let beta = p.beta();
    if beta > MIN_BETA {
        None
    } else {
        Some(1e9 * (1.0 + (MIN_BETA - beta)))
    }
}

/// Pulls an initial guess inside the box and the β constraint.
fn sanitize_initial(mut p: VgParams, variant: FitVariant) -> Result<VgParams> {
    p.sigma = p.sigma.clamp(SIGMA_BOUNDS.0, SIGMA_BOUNDS.1);
    p.nu = p.nu.clamp(NU_BOUNDS.0, NU_BOUNDS.1.min(1.9));
    p.theta = if variant == FitVariant::SymmetricVg {
        0.0
    } else {
        p.theta.clamp(THETA_BOUNDS.0, THETA_BOUNDS.1)
    };
    for _ in 0..200 {
        if p.beta() > MIN_BETA * 10.0 {
            return Ok(p);
        }
        p.theta *= 0.5;
        p.nu *= 0.9;
    }
    Err(Error::Calibration(format!(
        "could not construct a valid initial guess near sigma={}, nu={}, theta={}",
        p.sigma, p.nu, p.theta
    )))
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Historical fit on daily log returns.
///
/// Returns are annualized by √252 and treated as unit-horizon observations,
/// so fitted σ, ν, θ are already annual quantities and the gamma shape per
/// observation is 1/ν. The drift is re-derived for every candidate so the
/// model mean always matches the sample mean (the location information in a
/// VG likelihood is otherwise spent fighting ω).
pub fn fit_historical(
    returns: &[f64],
    variant: FitVariant,
    config: &SimplexConfig,
) -> Result<CalibrationResult> {
    if returns.len() < 30 {
        return Err(Error::Data(format!(
            "historical fit needs at least 30 returns, got {}",
            returns.len()
        )));
    }
    if returns.iter().any(|z| !z.is_finite()) {
        return Err(Error::Data("returns contain non-finite values".into()));
    }

    let scaled: Vec<f64> = returns.iter().map(|z| z * TRADING_DAYS.sqrt()).collect();
    let n = scaled.len() as f64;
    let mean = scaled.iter().sum::<f64>() / n;
    // an exactly constant series has zero dispersion even when the computed
    // mean differs from the common value by an ulp
    let sd = if scaled.iter().all(|&z| z == scaled[0]) {
        0.0
    } else {
        sample_sd(&scaled)
    };

    if variant == FitVariant::Gk {
        return Ok(CalibrationResult {
            variant,
            params: FittedParams::Gk(GkParams { sigma: sd }),
            loss: 0.0,
            iterations: 0,
            converged: true,
            fallback_used: false,
            moment_fallback: false,
        });
    }

    if sd == 0.0 {
        return Err(Error::Calibration(
            "degenerate return series (zero variance): VG fit rejected".into(),
        ));
    }

    // central moments for the initial guess
    let m2 = scaled.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
    let m3 = scaled.iter().map(|z| (z - mean).powi(3)).sum::<f64>() / n;
    let m4 = scaled.iter().map(|z| (z - mean).powi(4)).sum::<f64>() / n;

    let mut moment_fallback = false;
    let raw_init = match params_from_moments(m2, m3, m4) {
        Ok(p) => p,
        Err(_) => {
            moment_fallback = true;
            let nu = 0.1;
            VgParams {
                sigma: m2.sqrt(),
                nu,
                theta: m3 / (3.0 * m2 * nu),
            }
        }
    };
    let init = sanitize_initial(raw_init, variant)?;

    let objective = |x: &[f64]| -> f64 {
        let vg = vec_to_vg(x, variant);
        if vg.sigma <= 0.0 || vg.nu <= 0.0 {
            return 1e12;
        }
        if let Some(pen) = beta_penalty(&vg) {
            return pen;
        }
        // mean-consistent drift: model mean m + θ + ω equals the sample mean
        let w = match omega(&vg) {
            Ok(w) => w,
            Err(_) => return 1e12,
        };
        let params = DensityParams {
            vg,
            horizon_t: 1.0,
            drift_m: mean - vg.theta - w,
        };
        match log_likelihood(&scaled, &params) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => 1e12,
        }
    };

    let bounds = vg_bounds(variant);
    let outcome = nelder_mead(objective, &vg_to_vec(&init, variant), &bounds, config)?;
    let fitted = vec_to_vg(&outcome.x, variant);
    fitted.validate()?;

    Ok(CalibrationResult {
        variant,
        params: FittedParams::Vg(fitted),
        loss: outcome.loss,
        iterations: outcome.iterations,
        converged: outcome.converged,
        fallback_used: false,
        moment_fallback,
    })
}

/// One quote of a weekly chain, with its own market environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeeklyQuote {
    pub env: MarketEnv,
    pub opt: OptionSpec,
    pub market_price: f64,
}

impl WeeklyQuote {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.opt.validate()?;
        if !(self.market_price > 0.0) || !self.market_price.is_finite() {
            return Err(Error::Domain(format!(
                "market price must be positive, got {}",
                self.market_price
            )));
        }
        Ok(())
    }
}

/// Weekly risk-neutral fit: minimize Σ|ln C_model − ln C_market| over the
/// variant's parameters, pricing through the public VG entry (closed form
/// with quadrature fallback) or Garman–Kohlhagen.
pub fn fit_weekly_risk_neutral(
    chain: &[WeeklyQuote],
    variant: FitVariant,
    initial: &VgParams,
    config: &SimplexConfig,
    quad: &QuadratureSpec,
) -> Result<CalibrationResult> {
    if chain.is_empty() {
        return Err(Error::Data("weekly fit needs a nonempty chain".into()));
    }
    for q in chain {
        q.validate()?;
    }
    let ln_market: Vec<f64> = chain.iter().map(|q| q.market_price.ln()).collect();
    let fallback_seen = Cell::new(false);

    let loss_for_vg = |vg: &VgParams| -> f64 {
        if vg.sigma <= 0.0 || vg.nu <= 0.0 {
            return 1e12;
        }
        if let Some(pen) = beta_penalty(vg) {
            return pen;
        }
        let mut loss = 0.0;
        for (q, lnm) in chain.iter().zip(&ln_market) {
            match price_vg(&q.env, vg, &q.opt, quad) {
                Ok(out) if out.price > 0.0 => {
                    if out.fallback_used {
                        fallback_seen.set(true);
                    }
                    loss += (out.price.ln() - lnm).abs();
                }
                _ => return 1e10,
            }
        }
        loss
    };

    let (outcome, params) = match variant {
        FitVariant::Gk => {
            let objective = |x: &[f64]| -> f64 {
                let gk = GkParams { sigma: x[0] };
                if gk.sigma <= 0.0 {
                    return 1e12;
                }
                let mut loss = 0.0;
                for (q, lnm) in chain.iter().zip(&ln_market) {
                    match price_gk(&q.env, &gk, &q.opt) {
                        Ok(p) if p > 0.0 => loss += (p.ln() - lnm).abs(),
                        _ => return 1e10,
                    }
                }
                loss
            };
            let init_sigma = initial.sigma.clamp(SIGMA_BOUNDS.0, SIGMA_BOUNDS.1);
            let outcome = nelder_mead(objective, &[init_sigma], &vg_bounds(variant), config)?;
            let params = FittedParams::Gk(GkParams {
                sigma: outcome.x[0],
            });
            (outcome, params)
        }
        FitVariant::Vg | FitVariant::SymmetricVg => {
            let init = sanitize_initial(*initial, variant)?;
            let objective = |x: &[f64]| -> f64 { loss_for_vg(&vec_to_vg(x, variant)) };
            let outcome = nelder_mead(
                objective,
                &vg_to_vec(&init, variant),
                &vg_bounds(variant),
                config,
            )?;
            let fitted = vec_to_vg(&outcome.x, variant);
            fitted.validate()?;
            (outcome, FittedParams::Vg(fitted))
        }
    };

    Ok(CalibrationResult {
        variant,
        params,
        loss: outcome.loss,
        iterations: outcome.iterations,
        converged: outcome.converged,
        fallback_used: fallback_seen.get(),
        moment_fallback: false,
    })
}
