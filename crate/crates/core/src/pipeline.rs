//! End-to-end walk-forward run: ingest → filter → group → weekly fits for
//! all three models → walk-forward pricing → bucketed reports and artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    fit_historical, fit_weekly_risk_neutral, CalibrationResult, FitVariant, FittedParams,
    SimplexConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    emit_report, mape, params_report, report, walk_forward, Dimension, EvalRecord, ReportFormat,
    SkipRecord,
};
use crate::marketdata::{
    group_by_week, liquidity_filter, load_quotes, load_returns, write_rejects_csv, OptionQuote,
    RegimeConfig, WeekKey,
};
use crate::specfun::QuadratureSpec;
use crate::vgcore::VgParams;

/// Minimum usable chain sizes per variant: one parameter needs one quote,
/// two need two, three need three; sparser weeks carry the previous fit.
fn min_quotes(variant: FitVariant) -> usize {
    match variant {
        FitVariant::Gk => 1,
        FitVariant::SymmetricVg => 2,
        FitVariant::Vg => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub quotes_csv: PathBuf,
    /// optional daily log-return series; when present, weekly fits start
    /// from the historical MLE instead of `initial`
    #[serde(default)]
    pub returns_csv: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default = "default_min_volume")]
    pub min_volume: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub regime: RegimeConfig,
    #[serde(default)]
    pub quad: QuadratureSpec,
    #[serde(default)]
    pub simplex: SimplexConfig,
    #[serde(default = "default_initial")]
    pub initial: VgParams,
}

fn default_min_volume() -> u64 {
    100
}

fn default_seed() -> u64 {
    42
}

fn default_initial() -> VgParams {
    VgParams {
        sigma: 0.12,
        nu: 0.15,
        theta: 0.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_rows: usize,
    pub n_rejects: usize,
    pub n_filtered_out: usize,
    pub n_quotes: usize,
    pub n_weeks: usize,
    pub n_fit_failures: usize,
    pub n_records: usize,
    pub n_skips: usize,
    /// overall MAPE per model over all walk-forward records
    pub overall_mape: BTreeMap<FitVariant, f64>,
}

#[derive(Debug, Serialize)]
struct WeekArtifact<'a> {
    week: String,
    fits: BTreeMap<&'static str, &'a CalibrationResult>,
    carried_forward: BTreeMap<&'static str, bool>,
    errors: BTreeMap<&'static str, String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    summary: &'a RunSummary,
}

struct WeekFit {
    week: WeekKey,
    results: BTreeMap<FitVariant, std::result::Result<CalibrationResult, String>>,
}

/// The full cmd_evaluate pipeline. Weekly fits run in parallel; every
/// aggregation is an ordered reduction, so the output tree is identical
/// whatever the worker count.
pub fn run_evaluate(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.regime.validate()?;
    let loaded = load_quotes(&cfg.quotes_csv)?;
    let n_rows = loaded.quotes.len() + loaded.rejects.len();
    let kept = liquidity_filter(&loaded.quotes, cfg.min_volume);
    let n_filtered_out = loaded.quotes.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::Data(format!(
            "{}: no quotes survive the volume > {} filter",
            cfg.quotes_csv.display(),
            cfg.min_volume
        )));
    }
    let by_week = group_by_week(&kept);

    // initial guesses: historical fit when a return series is supplied
    let mut initials: BTreeMap<FitVariant, VgParams> = BTreeMap::new();
    if let Some(returns_path) = &cfg.returns_csv {
        let series: Vec<f64> = load_returns(returns_path)?
            .into_iter()
            .map(|(_, z)| z)
            .collect();
        for variant in [FitVariant::Vg, FitVariant::SymmetricVg] {
            let fit = fit_historical(&series, variant, &cfg.simplex)?;
            if let FittedParams::Vg(p) = fit.params {
                initials.insert(variant, p);
            }
        }
        let gk = fit_historical(&series, FitVariant::Gk, &cfg.simplex)?;
        if let FittedParams::Gk(p) = gk.params {
            initials.insert(
                FitVariant::Gk,
                VgParams {
                    sigma: p.sigma,
                    ..cfg.initial
                },
            );
        }
    }
    for variant in FitVariant::ALL {
        initials.entry(variant).or_insert(cfg.initial);
    }

    let weeks: Vec<(&WeekKey, &Vec<OptionQuote>)> = by_week.iter().collect();
    let week_fits: Vec<WeekFit> = weeks
        .par_iter()
        .map(|(week, quotes)| {
            let chain: Vec<_> = quotes.iter().map(|q| q.to_weekly()).collect();
            let mut results = BTreeMap::new();
            for variant in FitVariant::ALL {
                if chain.len() < min_quotes(variant) {
                    results.insert(
                        variant,
                        Err(format!(
                            "sparse week: {} quotes < {} required",
                            chain.len(),
                            min_quotes(variant)
                        )),
                    );
                    continue;
                }
                let fit = fit_weekly_risk_neutral(
                    &chain,
                    variant,
                    &initials[&variant],
                    &cfg.simplex,
                    &cfg.quad,
                );
                results.insert(variant, fit.map_err(|e| e.to_string()));
            }
            WeekFit {
                week: **week,
                results,
            }
        })
        .collect();

    // sequential carry-forward pass
    let mut per_variant: BTreeMap<FitVariant, BTreeMap<WeekKey, CalibrationResult>> =
        BTreeMap::new();
    let mut carried: BTreeMap<(FitVariant, WeekKey), bool> = BTreeMap::new();
    let mut errors: BTreeMap<(FitVariant, WeekKey), String> = BTreeMap::new();
    let mut fresh_fits: BTreeMap<WeekKey, Vec<CalibrationResult>> = BTreeMap::new();
    let mut n_fit_failures = 0usize;
    for variant in FitVariant::ALL {
        let mut last_good: Option<CalibrationResult> = None;
        for wf in &week_fits {
            match &wf.results[&variant] {
                Ok(fit) => {
                    per_variant
                        .entry(variant)
                        .or_default()
                        .insert(wf.week, fit.clone());
                    carried.insert((variant, wf.week), false);
                    fresh_fits.entry(wf.week).or_default().push(fit.clone());
                    last_good = Some(fit.clone());
                }
                Err(reason) => {
                    n_fit_failures += 1;
                    errors.insert((variant, wf.week), reason.clone());
                    if let Some(prev) = &last_good {
                        per_variant
                            .entry(variant)
                            .or_default()
                            .insert(wf.week, prev.clone());
                        carried.insert((variant, wf.week), true);
                    }
                }
            }
        }
    }

    // walk-forward per model
    let mut all_records: Vec<EvalRecord> = Vec::new();
    let mut all_skips: Vec<SkipRecord> = Vec::new();
    let mut overall_mape = BTreeMap::new();
    for variant in FitVariant::ALL {
        let params = per_variant.get(&variant).cloned().unwrap_or_default();
        let (records, skips) = walk_forward(&params, &by_week, variant, &cfg.regime, &cfg.quad)?;
        if !records.is_empty() {
            overall_mape.insert(variant, mape(&records)?);
        }
        all_records.extend(records);
        all_skips.extend(skips);
    }

    let summary = RunSummary {
        n_rows,
        n_rejects: loaded.rejects.len(),
        n_filtered_out,
        n_quotes: kept.len(),
        n_weeks: by_week.len(),
        n_fit_failures,
        n_records: all_records.len(),
        n_skips: all_skips.len(),
        overall_mape,
    };

    write_outputs(
        cfg,
        &summary,
        &loaded.rejects,
        &week_fits,
        &carried,
        &errors,
        &fresh_fits,
        &all_records,
        &all_skips,
    )?;
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    cfg: &RunConfig,
    summary: &RunSummary,
    rejects: &[crate::marketdata::RejectRecord],
    week_fits: &[WeekFit],
    carried: &BTreeMap<(FitVariant, WeekKey), bool>,
    errors: &BTreeMap<(FitVariant, WeekKey), String>,
    fresh_fits: &BTreeMap<WeekKey, Vec<CalibrationResult>>,
    records: &[EvalRecord],
    skips: &[SkipRecord],
) -> Result<()> {
    let out = &cfg.out_dir;
    let params_dir = out.join("params");
    let reports_dir = out.join("reports");
    fs::create_dir_all(&params_dir).map_err(|e| Error::io(&params_dir, e))?;
    fs::create_dir_all(&reports_dir).map_err(|e| Error::io(&reports_dir, e))?;

    write_rejects_csv(&out.join("rejects.csv"), rejects)?;

    for wf in week_fits {
        let mut fits = BTreeMap::new();
        let mut carried_map = BTreeMap::new();
        let mut error_map = BTreeMap::new();
        for variant in FitVariant::ALL {
            let name = variant.as_str();
            if let Ok(fit) = &wf.results[&variant] {
                fits.insert(name, fit);
            }
            if let Some(&c) = carried.get(&(variant, wf.week)) {
                carried_map.insert(name, c);
            }
            if let Some(e) = errors.get(&(variant, wf.week)) {
                error_map.insert(name, e.clone());
            }
        }
        let artifact = WeekArtifact {
            week: wf.week.to_string(),
            fits,
            carried_forward: carried_map,
            errors: error_map,
        };
        let path = params_dir.join(format!("week-{}.json", wf.week));
        let body = serde_json::to_string_pretty(&artifact)?;
        fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))?;
    }

    for dim in Dimension::ALL {
        let rep = report(records, skips, dim);
        emit_report(
            &rep,
            ReportFormat::Csv,
            &reports_dir.join(format!("{dim}.csv")),
        )?;
        emit_report(
            &rep,
            ReportFormat::Json,
            &reports_dir.join(format!("{dim}.json")),
        )?;
    }
    let params_rep = params_report(fresh_fits);
    emit_report(
        &params_rep,
        ReportFormat::Csv,
        &reports_dir.join("params.csv"),
    )?;
    emit_report(
        &params_rep,
        ReportFormat::Json,
        &reports_dir.join("params.json"),
    )?;

    let manifest = Manifest {
        tool: "fxvg",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        summary,
    };
    let path = out.join("run-manifest.json");
    let body = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Convenience used by cmd_generate and tests: write a chain CSV.
pub fn write_generated_chain(
    cfg: &crate::marketdata::GenerateConfig,
    seed: u64,
    quad: &QuadratureSpec,
    path: &Path,
) -> Result<usize> {
    let quotes = crate::marketdata::generate_chain(cfg, seed, quad)?;
    crate::marketdata::write_quotes_csv(path, &quotes)?;
    Ok(quotes.len())
}
