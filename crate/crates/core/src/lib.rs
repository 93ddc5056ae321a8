//! Pricing and calibration engine for European FX options under the
//! Garman–Kohlhagen and variance gamma models, with a walk-forward
//! evaluation pipeline over weekly option chains.

pub mod calibration;
pub mod error;
pub mod evaluation;
pub mod marketdata;
pub mod pipeline;
pub mod pricing;
pub mod specfun;
pub mod vgcore;

pub use calibration::{
    fit_historical, fit_weekly_risk_neutral, nelder_mead, Bounds, CalibrationResult, FitVariant,
    FittedParams, SimplexConfig, WeeklyQuote,
};
pub use error::{Error, Result};
pub use evaluation::{mape, report, walk_forward, Dimension, EvalRecord, EvalReport};
pub use marketdata::{
    classify_maturity, classify_moneyness, classify_regime, group_by_week, liquidity_filter,
    load_quotes, BucketLabel, GenerateConfig, OptionQuote, RegimeConfig, WeekKey,
};
pub use pipeline::{run_evaluate, RunConfig, RunSummary};
pub use pricing::{
    price_gk, price_vg, price_vg_closed, price_vg_mc, price_vg_mixing, vg_intermediates,
    OptionKind, OptionSpec, VgPriceOutcome, VgPricingIntermediates,
};
pub use specfun::QuadratureSpec;
pub use vgcore::{
    kurtosis_from_nu, log_likelihood, mixing_density, moments_from_params, omega,
    params_from_moments, vg_density, DensityParams, GkParams, MarketEnv, VgParams,
};
