//! fxvg: price FX calls, simulate returns, calibrate, and run the
//! walk-forward evaluation from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::fmt;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fxvg_core::calibration::{
    fit_historical, fit_weekly_risk_neutral, CalibrationResult, FitVariant, FittedParams,
    SimplexConfig, WeeklyQuote,
};
use fxvg_core::marketdata::{
    generate_returns, group_by_week, liquidity_filter, load_quotes, load_returns,
    write_returns_csv, GenerateConfig, RegimeConfig, WeekKey,
};
use fxvg_core::pipeline::{run_evaluate, write_generated_chain, RunConfig};
use fxvg_core::pricing::{price_gk, price_vg, OptionSpec};
use fxvg_core::specfun::QuadratureSpec;
use fxvg_core::vgcore::{DensityParams, GkParams, MarketEnv, VgParams};

const TRADING_DAYS: f64 = 252.0;
const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Parser)]
#[command(
    name = "fxvg",
    version,
    about = "Currency option pricing and calibration under the variance gamma and Garman-Kohlhagen models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one European call
    Price(PriceArgs),
    /// Simulate a daily log-return series
    Simulate(SimulateArgs),
    /// Fit model parameters to a daily return series by maximum likelihood
    FitHistorical(FitHistoricalArgs),
    /// Fit risk-neutral parameters to one week's option chain
    FitWeekly(FitWeeklyArgs),
    /// Run the full walk-forward evaluation pipeline
    Evaluate(EvaluateArgs),
    /// Generate a synthetic weekly quote CSV
    Generate(GenerateArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PriceArgs {
    /// gk, vg, or svg
    #[arg(long)]
    model: FitVariant,
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    /// time to expiry in calendar days (365 = one year)
    #[arg(long)]
    t: f64,
    /// domestic risk-free rate
    #[arg(long, default_value_t = 0.0)]
    rd: f64,
    /// foreign risk-free rate
    #[arg(long, default_value_t = 0.0)]
    rf: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    nu: f64,
    #[arg(long)]
    theta: f64,
    /// annual drift of the log exchange rate
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    /// number of daily returns
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// first weekday stamped on the series
    #[arg(long, default_value = "2010-11-01")]
    start: NaiveDate,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitHistoricalArgs {
    /// CSV with date, log_return columns
    #[arg(long)]
    returns: PathBuf,
    #[arg(long)]
    model: FitVariant,
    /// write the full CalibrationResult as JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitWeeklyArgs {
    /// quote CSV (same schema as evaluate)
    #[arg(long)]
    quotes: PathBuf,
    #[arg(long)]
    model: FitVariant,
    /// ISO week to fit, e.g. 2011-W11; defaults to the only week present
    #[arg(long)]
    week: Option<String>,
    #[arg(long, default_value_t = 100)]
    min_volume: u64,
    #[arg(long, default_value_t = 0.12)]
    initial_sigma: f64,
    #[arg(long, default_value_t = 0.15)]
    initial_nu: f64,
    #[arg(long, default_value_t = 0.0)]
    initial_theta: f64,
    /// write the full CalibrationResult as JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct EvaluateArgs {
    /// JSON config mirroring the run configuration; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    quotes: Option<PathBuf>,
    /// optional daily return series used to seed the weekly fits
    #[arg(long)]
    returns: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    min_volume: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    regime_start: Option<NaiveDate>,
    #[arg(long)]
    regime_boundary: Option<NaiveDate>,
    #[arg(long)]
    regime_end: Option<NaiveDate>,
    #[arg(long)]
    initial_sigma: Option<f64>,
    #[arg(long)]
    initial_nu: Option<f64>,
    #[arg(long)]
    initial_theta: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct GenerateArgs {
    #[arg(long, default_value_t = 92)]
    weeks: u32,
    #[arg(long, default_value_t = 80)]
    quotes_per_week: u32,
    #[arg(long, default_value = "2010-11-01")]
    start: NaiveDate,
    #[arg(long, default_value_t = 0.116)]
    sigma: f64,
    #[arg(long, default_value_t = 0.099)]
    nu: f64,
    #[arg(long, default_value_t = 0.0026)]
    theta: f64,
    /// JSON file with sigma/nu/theta, overriding the flags above
    #[arg(long)]
    params_path: Option<PathBuf>,
    /// relative half-range of the linear truth ramp across the weeks
    #[arg(long, default_value_t = 0.1)]
    drift_amplitude: f64,
    /// sd of the multiplicative lognormal price noise
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 50.0)]
    spot: f64,
    #[arg(long, default_value_t = 0.065)]
    rd: f64,
    #[arg(long, default_value_t = 0.015)]
    rf: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Bad flag combinations discovered after clap parsing; exit code 1.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<fxvg_core::Error>() {
            return match e {
                fxvg_core::Error::Data(_)
                | fxvg_core::Error::Io { .. }
                | fxvg_core::Error::Csv(_)
                | fxvg_core::Error::Json(_) => 2,
                fxvg_core::Error::Domain(_)
                | fxvg_core::Error::Quadrature(_)
                | fxvg_core::Error::Overflow(_)
                | fxvg_core::Error::Calibration(_) => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
        {
            return 2;
        }
    }
    2
}

/// 8 significant digits, plain decimal in a sane exponent range.
fn fmt_sig8(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..15).contains(&exp) {
        let decimals = (7 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.7e}")
    }
}

fn params_line(params: &FittedParams) -> String {
    match params {
        FittedParams::Gk(p) => format!("sigma={}", fmt_sig8(p.sigma)),
        FittedParams::Vg(p) => format!(
            "sigma={} nu={} theta={}",
            fmt_sig8(p.sigma),
            fmt_sig8(p.nu),
            fmt_sig8(p.theta)
        ),
    }
}

fn write_result_json(path: &PathBuf, result: &CalibrationResult) -> anyhow::Result<()> {
    let body = serde_json::to_string_pretty(result)?;
    fs::write(path, body + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_fit_summary(result: &CalibrationResult) {
    println!(
        "{}: {} loss={} iterations={} converged={}{}{}",
        result.variant,
        params_line(&result.params),
        fmt_sig8(result.loss),
        result.iterations,
        result.converged,
        if result.fallback_used {
            " fallback_used=true"
        } else {
            ""
        },
        if result.moment_fallback {
            " moment_fallback=true"
        } else {
            ""
        },
    );
}

fn cmd_price(a: &PriceArgs) -> anyhow::Result<()> {
    let env = MarketEnv {
        spot: a.spot,
        r_d: a.rd,
        r_f: a.rf,
    };
    let opt = OptionSpec::call(a.strike, a.t / DAYS_PER_YEAR);
    let quad = QuadratureSpec::default();

    let (price, provenance) = match a.model {
        FitVariant::Gk => {
            if a.nu.is_some() || a.theta.is_some() {
                return Err(usage("--nu and --theta do not apply to --model gk"));
            }
            let p = price_gk(&env, &GkParams { sigma: a.sigma }, &opt)?;
            (p, "gk")
        }
        FitVariant::Vg => {
            let nu =
                a.nu.ok_or_else(|| usage("--nu is required for --model vg"))?;
            let theta = a
                .theta
                .ok_or_else(|| usage("--theta is required for --model vg"))?;
            let vg = VgParams {
                sigma: a.sigma,
                nu,
                theta,
            };
            let out = price_vg(&env, &vg, &opt, &quad)?;
            (
                out.price,
                if out.fallback_used {
                    "mixing-fallback"
                } else {
                    "closed-form"
                },
            )
        }
        FitVariant::SymmetricVg => {
            let nu =
                a.nu.ok_or_else(|| usage("--nu is required for --model svg"))?;
            if a.theta.is_some() {
                return Err(usage("--model svg fixes theta = 0; drop --theta"));
            }
            let vg = VgParams {
                sigma: a.sigma,
                nu,
                theta: 0.0,
            };
            let out = price_vg(&env, &vg, &opt, &quad)?;
            (
                out.price,
                if out.fallback_used {
                    "mixing-fallback"
                } else {
                    "closed-form"
                },
            )
        }
    };
    println!("{} {}", fmt_sig8(price), provenance);
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let params = DensityParams {
        vg: VgParams {
            sigma: a.sigma,
            nu: a.nu,
            theta: a.theta,
        },
        horizon_t: 1.0,
        drift_m: a.drift,
    };
    // unit-horizon draws scaled to daily size, matching the fit's
    // sqrt(252) annualization
    let rows: Vec<(NaiveDate, f64)> = generate_returns(&params, a.n, a.start, a.seed)?
        .into_iter()
        .map(|(d, z)| (d, z / TRADING_DAYS.sqrt()))
        .collect();
    write_returns_csv(&a.out, &rows)?;
    println!("wrote {} returns to {}", rows.len(), a.out.display());
    Ok(())
}

fn cmd_fit_historical(a: &FitHistoricalArgs) -> anyhow::Result<()> {
    let series: Vec<f64> = load_returns(&a.returns)?
        .into_iter()
        .map(|(_, z)| z)
        .collect();
    let result = fit_historical(&series, a.model, &SimplexConfig::default())?;
    if let Some(out) = &a.out {
        write_result_json(out, &result)?;
    }
    print_fit_summary(&result);
    Ok(())
}

fn cmd_fit_weekly(a: &FitWeeklyArgs) -> anyhow::Result<()> {
    let loaded = load_quotes(&a.quotes)?;
    if !loaded.rejects.is_empty() {
        eprintln!("{} malformed rows skipped", loaded.rejects.len());
    }
    let kept = liquidity_filter(&loaded.quotes, a.min_volume);
    let by_week = group_by_week(&kept);
    if by_week.is_empty() {
        return Err(fxvg_core::Error::Data(format!(
            "{}: no quotes survive the volume > {} filter",
            a.quotes.display(),
            a.min_volume
        ))
        .into());
    }

    let week = match &a.week {
        Some(s) => s
            .parse::<WeekKey>()
            .map_err(|e| usage(format!("--week: {e}")))?,
        None if by_week.len() == 1 => *by_week.keys().next().unwrap(),
        None => {
            let available: Vec<String> = by_week.keys().map(|w| w.to_string()).collect();
            return Err(usage(format!(
                "--week is required; file contains {}",
                available.join(", ")
            )));
        }
    };
    let quotes = by_week.get(&week).ok_or_else(|| {
        fxvg_core::Error::Data(format!("no quotes in week {week} after filtering"))
    })?;
    let chain: Vec<WeeklyQuote> = quotes.iter().map(|q| q.to_weekly()).collect();

    let initial = VgParams {
        sigma: a.initial_sigma,
        nu: a.initial_nu,
        theta: a.initial_theta,
    };
    let result = fit_weekly_risk_neutral(
        &chain,
        a.model,
        &initial,
        &SimplexConfig::default(),
        &QuadratureSpec::default(),
    )?;
    if let Some(out) = &a.out {
        write_result_json(out, &result)?;
    }
    println!("week {week}: {} quotes", chain.len());
    print_fit_summary(&result);
    Ok(())
}

/// Resolved precedence: built-in defaults < --config file < flags.
fn build_run_config(a: &EvaluateArgs) -> anyhow::Result<RunConfig> {
    let mut root: serde_json::Value = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => json!({}),
    };
    let obj = root
        .as_object_mut()
        .ok_or_else(|| usage("--config must contain a JSON object"))?;

    if let Some(p) = &a.quotes {
        obj.insert("quotes_csv".into(), json!(p));
    }
    if let Some(p) = &a.returns {
        obj.insert("returns_csv".into(), json!(p));
    }
    if let Some(p) = &a.out_dir {
        obj.insert("out_dir".into(), json!(p));
    }
    if let Some(v) = a.min_volume {
        obj.insert("min_volume".into(), json!(v));
    }
    if let Some(v) = a.seed {
        obj.insert("seed".into(), json!(v));
    }

    let mut regime = serde_json::to_value(RegimeConfig::default())?;
    if let Some(r) = obj.get("regime") {
        merge_fields(&mut regime, r);
    }
    for (field, value) in [
        ("span_start", a.regime_start),
        ("boundary", a.regime_boundary),
        ("span_end", a.regime_end),
    ] {
        if let Some(d) = value {
            regime[field] = json!(d);
        }
    }
    obj.insert("regime".into(), regime);

    let mut initial = json!({ "sigma": 0.12, "nu": 0.15, "theta": 0.0 });
    if let Some(i) = obj.get("initial") {
        merge_fields(&mut initial, i);
    }
    for (field, value) in [
        ("sigma", a.initial_sigma),
        ("nu", a.initial_nu),
        ("theta", a.initial_theta),
    ] {
        if let Some(x) = value {
            initial[field] = json!(x);
        }
    }
    obj.insert("initial".into(), initial);

    serde_json::from_value(root).map_err(|e| usage(format!("invalid configuration: {e}")))
}

fn merge_fields(target: &mut serde_json::Value, source: &serde_json::Value) {
    if let (Some(t), Some(s)) = (target.as_object_mut(), source.as_object()) {
        for (k, v) in s {
            t.insert(k.clone(), v.clone());
        }
    }
}

fn cmd_evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let cfg = build_run_config(a)?;
    let summary = run_evaluate(&cfg)?;
    println!(
        "rows {} rejects {} filtered_out {} quotes {} weeks {}",
        summary.n_rows,
        summary.n_rejects,
        summary.n_filtered_out,
        summary.n_quotes,
        summary.n_weeks
    );
    println!(
        "fit_failures {} records {} skips {}",
        summary.n_fit_failures, summary.n_records, summary.n_skips
    );
    for (variant, mape) in &summary.overall_mape {
        println!("{variant} mape {}", fmt_sig8(*mape));
    }
    println!("outputs in {}", cfg.out_dir.display());
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> anyhow::Result<()> {
    let base = match &a.params_path {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<VgParams>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => VgParams {
            sigma: a.sigma,
            nu: a.nu,
            theta: a.theta,
        },
    };
    let cfg = GenerateConfig {
        weeks: a.weeks,
        quotes_per_week: a.quotes_per_week,
        start: a.start,
        base,
        drift_amplitude: a.drift_amplitude,
        noise_level: a.noise,
        spot0: a.spot,
        r_d: a.rd,
        r_f: a.rf,
    };
    let n = write_generated_chain(&cfg, a.seed, &QuadratureSpec::default(), &a.out)?;
    println!("wrote {n} quotes to {}", a.out.display());
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Price(a) => cmd_price(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::FitHistorical(a) => cmd_fit_historical(a),
        Command::FitWeekly(a) => cmd_fit_weekly(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version leave through here with success
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(&cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}
