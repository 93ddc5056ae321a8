//! Walk-forward mechanics, report aggregation, and output formatting.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use fxvg_core::calibration::{CalibrationResult, FitVariant, FittedParams};
use fxvg_core::evaluation::{
    emit_report, fmt_sig, mape, params_report, report, walk_forward, Dimension, EvalRecord,
    ReportFormat, SkipRecord,
};
use fxvg_core::marketdata::{
    BucketLabel, Maturity, Moneyness, OptionQuote, Regime, RegimeConfig, WeekKey,
};
use fxvg_core::pricing::{price_vg, OptionSpec};
use fxvg_core::specfun::QuadratureSpec;
use fxvg_core::vgcore::{GkParams, MarketEnv, VgParams};

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn bucket() -> BucketLabel {
    BucketLabel {
        moneyness: Moneyness::Atm,
        maturity: Maturity::Medium,
        regime: Regime::LowVol,
    }
}

fn dummy_quote(trade: NaiveDate) -> OptionQuote {
    OptionQuote {
        trade_date: trade,
        expiry_date: trade + chrono::Duration::days(40),
        strike: 50.0,
        market_price: 1.0,
        volume: 200,
        spot: 50.0,
        r_d: 0.065,
        r_f: 0.015,
    }
}

fn record(err: f64) -> EvalRecord {
    EvalRecord {
        week: WeekKey {
            year: 2011,
            week: 11,
        },
        model: FitVariant::Vg,
        quote: dummy_quote(date(2011, 3, 14)),
        model_price: 1.0,
        abs_rel_error: err,
        bucket: bucket(),
    }
}

fn vg_fit(params: VgParams) -> CalibrationResult {
    CalibrationResult {
        variant: FitVariant::Vg,
        params: FittedParams::Vg(params),
        loss: 0.0,
        iterations: 100,
        converged: true,
        fallback_used: false,
        moment_fallback: false,
    }
}

#[test]
fn mape_is_plain_mean() {
    let records = vec![record(0.01), record(0.03), record(0.08)];
    assert!((mape(&records).unwrap() - 0.04).abs() <= 1e-15);
    assert!(mape(&[]).is_err());
}

#[test]
fn walk_forward_prices_next_week_with_previous_fit() {
    let truth = VgParams {
        sigma: 0.116,
        nu: 0.099,
        theta: 0.0026,
    };
    let env = MarketEnv {
        spot: 50.0,
        r_d: 0.065,
        r_f: 0.015,
    };
    let quad = QuadratureSpec::default();

    let week1_monday = date(2011, 3, 7);
    let week2_monday = date(2011, 3, 14);
    let mut quotes_by_week: BTreeMap<WeekKey, Vec<OptionQuote>> = BTreeMap::new();
    quotes_by_week.insert(WeekKey::of(week1_monday), vec![dummy_quote(week1_monday)]);

    // week-2 market prices computed from the week-1 fitted parameters
    let mut week2 = Vec::new();
    for (days, k_rel) in [(30i64, 0.96), (45, 1.0), (75, 1.04)] {
        let opt = OptionSpec::call(env.spot * k_rel, days as f64 / 365.0);
        let price = price_vg(&env, &truth, &opt, &quad).unwrap().price;
        week2.push(OptionQuote {
            trade_date: week2_monday,
            expiry_date: week2_monday + chrono::Duration::days(days),
            strike: opt.strike,
            market_price: price,
            volume: 300,
            spot: env.spot,
            r_d: env.r_d,
            r_f: env.r_f,
        });
    }
    quotes_by_week.insert(WeekKey::of(week2_monday), week2);

    let mut weekly_params = BTreeMap::new();
    weekly_params.insert(WeekKey::of(week1_monday), vg_fit(truth));

    let (records, skips) = walk_forward(
        &weekly_params,
        &quotes_by_week,
        FitVariant::Vg,
        &RegimeConfig::default(),
        &quad,
    )
    .unwrap();

    assert_eq!(records.len(), 3);
    assert!(skips.is_empty());
    for r in &records {
        assert_eq!(r.week, WeekKey::of(week2_monday));
        assert!(r.abs_rel_error <= 1e-6, "error {}", r.abs_rel_error);
    }
}

#[test]
fn walk_forward_variant_mismatch_is_hard_error() {
    let mut quotes_by_week = BTreeMap::new();
    quotes_by_week.insert(
        WeekKey {
            year: 2011,
            week: 10,
        },
        vec![dummy_quote(date(2011, 3, 7))],
    );
    quotes_by_week.insert(
        WeekKey {
            year: 2011,
            week: 11,
        },
        vec![dummy_quote(date(2011, 3, 14))],
    );

    let mut weekly_params = BTreeMap::new();
    weekly_params.insert(
        WeekKey {
            year: 2011,
            week: 10,
        },
        vg_fit(VgParams {
            sigma: 0.1,
            nu: 0.1,
            theta: 0.0,
        }),
    );
    assert!(walk_forward(
        &weekly_params,
        &quotes_by_week,
        FitVariant::Gk,
        &RegimeConfig::default(),
        &QuadratureSpec::default(),
    )
    .is_err());
}

#[test]
fn walk_forward_missing_fit_week_yields_nothing() {
    let mut quotes_by_week = BTreeMap::new();
    quotes_by_week.insert(
        WeekKey {
            year: 2011,
            week: 10,
        },
        vec![dummy_quote(date(2011, 3, 7))],
    );
    quotes_by_week.insert(
        WeekKey {
            year: 2011,
            week: 11,
        },
        vec![dummy_quote(date(2011, 3, 14))],
    );

    let (records, skips) = walk_forward(
        &BTreeMap::new(),
        &quotes_by_week,
        FitVariant::Vg,
        &RegimeConfig::default(),
        &QuadratureSpec::default(),
    )
    .unwrap();
    assert!(records.is_empty());
    assert!(skips.is_empty());
}

#[test]
fn walk_forward_nonpositive_price_becomes_skip() {
    // low-vol GK on a 10x-spot strike: both legs underflow to exactly zero
    let week1 = date(2011, 3, 7);
    let week2 = date(2011, 3, 14);
    let mut quote = dummy_quote(week2);
    quote.strike = 500.0;
    quote.r_d = 0.0;
    quote.r_f = 0.0;

    let mut quotes_by_week = BTreeMap::new();
    quotes_by_week.insert(WeekKey::of(week1), vec![dummy_quote(week1)]);
    quotes_by_week.insert(WeekKey::of(week2), vec![quote]);

    let mut weekly_params = BTreeMap::new();
    weekly_params.insert(
        WeekKey::of(week1),
        CalibrationResult {
            variant: FitVariant::Gk,
            params: FittedParams::Gk(GkParams { sigma: 0.01 }),
            loss: 0.0,
            iterations: 0,
            converged: true,
            fallback_used: false,
            moment_fallback: false,
        },
    );

    let (records, skips) = walk_forward(
        &weekly_params,
        &quotes_by_week,
        FitVariant::Gk,
        &RegimeConfig::default(),
        &QuadratureSpec::default(),
    )
    .unwrap();
    assert!(records.is_empty());
    assert_eq!(skips.len(), 1);
    assert!(
        skips[0].reason.contains("nonpositive"),
        "{}",
        skips[0].reason
    );
}

#[test]
fn report_cells_and_skip_only_groups() {
    let mut records = vec![record(0.02), record(0.04)];
    records[1].bucket.moneyness = Moneyness::Itm;
    let skips = vec![SkipRecord {
        week: WeekKey {
            year: 2011,
            week: 11,
        },
        model: FitVariant::Vg,
        bucket: BucketLabel {
            moneyness: Moneyness::Otm,
            maturity: Maturity::Short,
            regime: Regime::HighVol,
        },
        reason: "x".into(),
    }];

    let rep = report(&records, &skips, Dimension::Moneyness);
    assert_eq!(rep.cells.len(), 3);

    let atm = &rep.cells[&(FitVariant::Vg, "ATM".to_string())];
    assert_eq!(atm.n, 1);
    assert_eq!(atm.mean, Some(0.02));
    assert_eq!(atm.sd, Some(0.0));
    assert_eq!(atm.n_skipped, 0);

    let otm = &rep.cells[&(FitVariant::Vg, "OTM".to_string())];
    assert_eq!(otm.n, 0);
    assert_eq!(otm.mean, None);
    assert_eq!(otm.n_skipped, 1);

    // overall dimension folds everything into one cell per model
    let overall = report(&records, &skips, Dimension::Overall);
    let all = &overall.cells[&(FitVariant::Vg, "all".to_string())];
    assert_eq!(all.n, 2);
    assert!((all.mean.unwrap() - 0.03).abs() <= 1e-15);
    assert!((all.sd.unwrap() - 0.01 * 2.0f64.sqrt()).abs() <= 1e-15);
    assert_eq!(all.max, Some(0.04));
    assert_eq!(all.min, Some(0.02));
    assert_eq!(all.n_skipped, 1);
}

#[test]
fn params_report_summarizes_weekly_fits() {
    let mut fits: BTreeMap<WeekKey, Vec<CalibrationResult>> = BTreeMap::new();
    fits.insert(
        WeekKey {
            year: 2011,
            week: 10,
        },
        vec![
            vg_fit(VgParams {
                sigma: 0.10,
                nu: 0.2,
                theta: -0.01,
            }),
            CalibrationResult {
                variant: FitVariant::Gk,
                params: FittedParams::Gk(GkParams { sigma: 0.12 }),
                loss: 0.0,
                iterations: 0,
                converged: true,
                fallback_used: false,
                moment_fallback: false,
            },
        ],
    );
    fits.insert(
        WeekKey {
            year: 2011,
            week: 11,
        },
        vec![vg_fit(VgParams {
            sigma: 0.14,
            nu: 0.3,
            theta: 0.01,
        })],
    );

    let rep = params_report(&fits);
    let vg_sigma = &rep.cells[&(FitVariant::Vg, "sigma".to_string())];
    assert_eq!(vg_sigma.n, 2);
    assert!((vg_sigma.mean.unwrap() - 0.12).abs() <= 1e-15);
    assert_eq!(vg_sigma.max, Some(0.14));

    let gk_sigma = &rep.cells[&(FitVariant::Gk, "sigma".to_string())];
    assert_eq!(gk_sigma.n, 1);
    assert_eq!(gk_sigma.sd, Some(0.0));
    assert!(!rep.cells.contains_key(&(FitVariant::Gk, "nu".to_string())));
}

#[test]
fn fmt_sig_six_significant_digits() {
    assert_eq!(fmt_sig(0.0), "0");
    assert_eq!(fmt_sig(1234.5678), "1234.57");
    assert_eq!(fmt_sig(3.141592653589793), "3.14159");
    assert_eq!(fmt_sig(-2.5), "-2.5");
    assert_eq!(fmt_sig(0.1), "0.1");
    assert_eq!(fmt_sig(0.000123456789), "0.000123457");
    assert_eq!(fmt_sig(1e-5), "1.00000e-5");
    assert_eq!(fmt_sig(123456789.0), "123456789");
    assert_eq!(fmt_sig(1e15), "1.00000e15");
}

#[test]
fn csv_and_json_reports_agree_cell_by_cell() {
    let mut records = vec![
        record(0.0123456789),
        record(0.987654321),
        record(0.000333333333),
    ];
    records[1].model = FitVariant::SymmetricVg;
    records[2].bucket.regime = Regime::HighVol;

    let rep = report(&records, &[], Dimension::Regime);
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("r.csv");
    let json_path = dir.path().join("r.json");
    emit_report(&rep, ReportFormat::Csv, &csv_path).unwrap();
    emit_report(&rep, ReportFormat::Json, &json_path).unwrap();

    #[derive(serde::Deserialize)]
    struct Row {
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

    let mut csv_rows: Vec<Row> = Vec::new();
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    for rec in rdr.deserialize() {
        csv_rows.push(rec.unwrap());
    }
    let json_rows: Vec<Row> =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();

    assert_eq!(csv_rows.len(), json_rows.len());
    assert_eq!(csv_rows.len(), rep.cells.len());
    for (c, j) in csv_rows.iter().zip(&json_rows) {
        assert_eq!(c.model, j.model);
        assert_eq!(c.group_dimension, j.group_dimension);
        assert_eq!(c.group_value, j.group_value);
        assert_eq!(c.n, j.n);
        assert_eq!(c.mean, j.mean);
        assert_eq!(c.sd, j.sd);
        assert_eq!(c.max, j.max);
        assert_eq!(c.min, j.min);
        assert_eq!(c.n_skipped, j.n_skipped);
        assert_eq!(c.group_dimension, "regime");
    }
}
