//! Walk-forward out-of-sample evaluation and the bucketed error reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationResult, FitVariant, FittedParams};
use crate::error::{Error, Result};
use crate::marketdata::{classify, BucketLabel, OptionQuote, RegimeConfig, WeekKey};
use crate::pricing::{price_gk, price_vg};
use crate::specfun::QuadratureSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub week: WeekKey,
    pub model: FitVariant,
    pub quote: OptionQuote,
    pub model_price: f64,
    pub abs_rel_error: f64,
    pub bucket: BucketLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub week: WeekKey,
    pub model: FitVariant,
    pub bucket: BucketLabel,
    pub reason: String,
}

/// (1/n)·Σ |C_market − C_model| / C_market.
pub fn mape(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Data("mape needs at least one record".into()));
    }
    Ok(records.iter().map(|r| r.abs_rel_error).sum::<f64>() / records.len() as f64)
}

/// Prices week t+1's quotes with week t's fitted parameters for one model.
/// The first week produces no records; quotes whose pricing fails are
/// returned as skips, not errors.
pub fn walk_forward(
    weekly_params: &BTreeMap<WeekKey, CalibrationResult>,
    quotes_by_week: &BTreeMap<WeekKey, Vec<OptionQuote>>,
    model: FitVariant,
    regime_cfg: &RegimeConfig,
    quad: &QuadratureSpec,
) -> Result<(Vec<EvalRecord>, Vec<SkipRecord>)> {
    let mut records = Vec::new();
    let mut skips = Vec::new();

    let weeks: Vec<&WeekKey> = quotes_by_week.keys().collect();
    for pair in weeks.windows(2) {
        let (fit_week, eval_week) = (pair[0], pair[1]);
        let Some(fit) = weekly_params.get(fit_week) else {
            continue;
        };
        if fit.variant != model {
            return Err(Error::Domain(format!(
                "walk_forward for {model} got a {} fit for week {fit_week}",
                fit.variant
            )));
        }

        for quote in &quotes_by_week[eval_week] {
            let bucket = classify(quote, regime_cfg)?;
            let priced: Result<f64> = match (&fit.params, model) {
                (FittedParams::Gk(gk), FitVariant::Gk) => {
                    price_gk(&quote.env(), gk, &quote.option_spec())
                }
                (FittedParams::Vg(vg), _) => {
                    price_vg(&quote.env(), vg, &quote.option_spec(), quad).map(|o| o.price)
                }
                (FittedParams::Gk(_), _) => {
                    Err(Error::Domain(format!("{model} fit carries GK parameters")))
                }
            };
            match priced {
                Ok(p) if p > 0.0 => {
                    records.push(EvalRecord {
                        week: *eval_week,
                        model,
                        quote: *quote,
                        model_price: p,
                        abs_rel_error: (quote.market_price - p).abs() / quote.market_price,
                        bucket,
                    });
                }
                Ok(p) => skips.push(SkipRecord {
                    week: *eval_week,
                    model,
                    bucket,
                    reason: format!("nonpositive model price {p:e}"),
                }),
                Err(e) => skips.push(SkipRecord {
                    week: *eval_week,
                    model,
                    bucket,
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok((records, skips))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Overall,
    Regime,
    Maturity,
    Moneyness,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Overall,
        Dimension::Regime,
        Dimension::Maturity,
        Dimension::Moneyness,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Dimension::Overall => "overall",
            Dimension::Regime => "regime",
            Dimension::Maturity => "maturity",
            Dimension::Moneyness => "moneyness",
        }
    }

    fn label_of(&self, bucket: &BucketLabel) -> String {
        match self {
            Dimension::Overall => "all".to_string(),
            Dimension::Regime => bucket.regime.to_string(),
            Dimension::Maturity => bucket.maturity.to_string(),
            Dimension::Moneyness => bucket.moneyness.to_string(),
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One report cell. `n = 0` marks a cell that only accumulated skips; its
/// statistics are absent, not zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub max: Option<f64>,
    pub min: Option<f64>,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dimension: Dimension,
    /// (model, group label) → stats, deterministically ordered
    pub cells: BTreeMap<(FitVariant, String), CellStats>,
}

/// Mean/sd/max/min of a value series; sd is the sample (n−1) standard
/// deviation, 0 for a single observation.
fn stats_of(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (mean, sd, max, min)
}

pub fn report(records: &[EvalRecord], skips: &[SkipRecord], dimension: Dimension) -> EvalReport {
    let mut grouped: BTreeMap<(FitVariant, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        grouped
            .entry((r.model, dimension.label_of(&r.bucket)))
            .or_default()
            .push(r.abs_rel_error);
    }
    let mut skip_counts: BTreeMap<(FitVariant, String), usize> = BTreeMap::new();
    for s in skips {
        *skip_counts
            .entry((s.model, dimension.label_of(&s.bucket)))
            .or_default() += 1;
    }

    let mut cells = BTreeMap::new();
    for (key, values) in &grouped {
        let (mean, sd, max, min) = stats_of(values);
        cells.insert(
            key.clone(),
            CellStats {
                n: values.len(),
                mean: Some(mean),
                sd: Some(sd),
                max: Some(max),
                min: Some(min),
                n_skipped: skip_counts.get(key).copied().unwrap_or(0),
            },
        );
    }
    for (key, &n_skipped) in &skip_counts {
        cells.entry(key.clone()).or_insert(CellStats {
            n: 0,
            mean: None,
            sd: None,
            max: None,
            min: None,
            n_skipped,
        });
    }

    EvalReport { dimension, cells }
}

/// Parameter summary: per (model, parameter name) statistics of the
/// weekly fitted parameters, built with the same cell machinery.
pub fn params_report(fits: &BTreeMap<WeekKey, Vec<CalibrationResult>>) -> EvalReport {
    let mut grouped: BTreeMap<(FitVariant, String), Vec<f64>> = BTreeMap::new();
    for results in fits.values() {
        for r in results {
            match &r.params {
                FittedParams::Vg(p) => {
                    for (name, value) in [("sigma", p.sigma), ("nu", p.nu), ("theta", p.theta)] {
                        grouped
                            .entry((r.variant, name.to_string()))
                            .or_default()
                            .push(value);
                    }
                }
                FittedParams::Gk(p) => {
                    grouped
                        .entry((r.variant, "sigma".to_string()))
                        .or_default()
                        .push(p.sigma);
                }
            }
        }
    }
    let mut cells = BTreeMap::new();
    for (key, values) in &grouped {
        let (mean, sd, max, min) = stats_of(values);
        cells.insert(
            key.clone(),
            CellStats {
                n: values.len(),
                mean: Some(mean),
                sd: Some(sd),
                max: Some(max),
                min: Some(min),
                n_skipped: 0,
            },
        );
    }
    EvalReport {
        dimension: Dimension::Overall,
        cells,
    }
}

/// Formats with 6 significant digits, plain decimal within a sane exponent
/// range, scientific outside it. Deterministic for identical input bits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            let t = s.trim_end_matches('0').trim_end_matches('.');
            t.to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportRow {
    model: String,
    group_dimension: String,
    group_value: String,
    n: usize,
    mean: Option<f64>,
    sd: Option<f64>,
    max: Option<f64>,
    min: Option<f64>,
    n_skipped: usize,
}

fn rows_of(rep: &EvalReport) -> Vec<ReportRow> {
    rep.cells
        .iter()
        .map(|((model, label), c)| ReportRow {
            model: model.to_string(),
            group_dimension: rep.dimension.to_string(),
            group_value: label.clone(),
            n: c.n,
            mean: c.mean,
            sd: c.sd,
            max: c.max,
            min: c.min,
            n_skipped: c.n_skipped,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Writes the report; CSV numbers carry 6 significant digits, JSON carries
/// the rounded values the CSV shows (parsed back) so the two renderings
/// agree cell-by-cell.
pub fn emit_report(rep: &EvalReport, format: ReportFormat, path: &Path) -> Result<()> {
    let rows = rows_of(rep);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| match e.kind() {
                csv::ErrorKind::Io(io) => Error::Data(format!("{}: {io}", path.display())),
                _ => Error::Csv(e),
            })?;
            w.write_record([
                "model",
                "group_dimension",
                "group_value",
                "n",
                "mean",
                "sd",
                "max",
                "min",
                "n_skipped",
            ])?;
            for r in rows {
                w.write_record(&[
                    r.model,
                    r.group_dimension,
                    r.group_value,
                    r.n.to_string(),
                    fmt_opt(r.mean),
                    fmt_opt(r.sd),
                    fmt_opt(r.max),
                    fmt_opt(r.min),
                    r.n_skipped.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        ReportFormat::Json => {
            let rounded: Vec<ReportRow> = rows
                .into_iter()
                .map(|mut r| {
                    let round = |v: Option<f64>| v.map(|x| fmt_sig(x).parse::<f64>().unwrap_or(x));
                    r.mean = round(r.mean);
                    r.sd = round(r.sd);
                    r.max = round(r.max);
                    r.min = round(r.min);
                    r
                })
                .collect();
            let body = serde_json::to_string_pretty(&rounded)?;
            fs::write(path, body + "\n").map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}
