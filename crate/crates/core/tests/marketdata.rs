//! Ingestion edge cases, bucket boundaries, and the synthetic data
//! generators.

use chrono::{Datelike, NaiveDate, Weekday};

use fxvg_core::error::Error;
use fxvg_core::marketdata::{
    classify_maturity, classify_moneyness, classify_regime, generate_chain, generate_returns,
    liquidity_filter, load_quotes, load_returns, truth_params_for_week, GenerateConfig, Maturity,
    Moneyness, OptionQuote, Regime, RegimeConfig, WeekKey,
};
use fxvg_core::specfun::QuadratureSpec;
use fxvg_core::vgcore::{DensityParams, VgParams};

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn write_tmp(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    (dir, path)
}

#[test]
fn load_quotes_rejects_carry_line_numbers() {
    let body = "\
trade_date,expiry_date,strike,price,volume,spot,r_d,r_f
2011-03-07,2011-04-06,50,1.25,200,50.5,0.065,0.015
2011-03-07,2011-04-06,-50,1.25,200,50.5,0.065,0.015
2011-03-07,2011-02-06,50,1.25,200,50.5,0.065,0.015
2011-03-07,2011-04-06,50,oops,200,50.5,0.065,0.015
2011-03-08,2011-04-07,49,1.10,150,50.5,0.065,0.015
";
    let (_dir, path) = write_tmp("q.csv", body);
    let out = load_quotes(&path).unwrap();
    assert_eq!(out.quotes.len(), 2);
    assert_eq!(out.rejects.len(), 3);
    // header is line 1, so the first data row is line 2
    assert_eq!(out.rejects[0].line, 3);
    assert!(out.rejects[0].reason.contains("strike"));
    assert_eq!(out.rejects[1].line, 4);
    assert!(out.rejects[1].reason.contains("not after"));
    assert_eq!(out.rejects[2].line, 5);
    assert!(out.rejects[2].reason.contains("price"));
}

#[test]
fn load_quotes_accepts_reordered_columns() {
    let body = "\
spot,r_d,r_f,trade_date,expiry_date,strike,price,volume
50.5,0.065,0.015,2011-03-07,2011-04-06,50,1.25,200
";
    let (_dir, path) = write_tmp("q.csv", body);
    let out = load_quotes(&path).unwrap();
    assert_eq!(out.quotes.len(), 1);
    assert_eq!(out.quotes[0].strike, 50.0);
    assert_eq!(out.quotes[0].trade_date, date(2011, 3, 7));
}

#[test]
fn load_quotes_structural_errors() {
    let missing = std::path::Path::new("/nonexistent/quotes.csv");
    assert!(matches!(load_quotes(missing), Err(Error::Data(_))));

    let (_d1, no_col) = write_tmp(
        "q.csv",
        "trade_date,expiry_date,strike,price,volume,spot,r_d\n2011-03-07,2011-04-06,50,1,1,50,0\n",
    );
    let err = load_quotes(&no_col).unwrap_err();
    assert!(err.to_string().contains("r_f"), "{err}");

    let (_d2, empty) = write_tmp(
        "q.csv",
        "trade_date,expiry_date,strike,price,volume,spot,r_d,r_f\n",
    );
    assert!(matches!(load_quotes(&empty), Err(Error::Data(_))));
}

#[test]
fn load_returns_bad_row_is_hard_error() {
    let (_dir, path) = write_tmp(
        "r.csv",
        "date,log_return\n2011-03-07,0.004\n2011-03-08,bad\n",
    );
    let err = load_returns(&path).unwrap_err();
    assert!(err.to_string().contains('3'), "no line number in: {err}");

    let (_d2, good) = write_tmp(
        "r.csv",
        "date,log_return\n2011-03-07,0.004\n2011-03-08,-0.002\n",
    );
    let rows = load_returns(&good).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1], (date(2011, 3, 8), -0.002));
}

#[test]
fn liquidity_threshold_is_strict() {
    let q = |volume: u64| OptionQuote {
        trade_date: date(2011, 3, 7),
        expiry_date: date(2011, 4, 6),
        strike: 50.0,
        market_price: 1.0,
        volume,
        spot: 50.0,
        r_d: 0.065,
        r_f: 0.015,
    };
    let kept = liquidity_filter(&[q(99), q(100), q(101)], 100);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].volume, 101);
}

#[test]
fn moneyness_boundaries() {
    // ratio S/K against 0.95 and 1.05; equality goes outward
    assert_eq!(classify_moneyness(105.0, 100.0).unwrap(), Moneyness::Itm);
    assert_eq!(classify_moneyness(104.9, 100.0).unwrap(), Moneyness::Atm);
    assert_eq!(classify_moneyness(95.0, 100.0).unwrap(), Moneyness::Otm);
    assert_eq!(classify_moneyness(95.1, 100.0).unwrap(), Moneyness::Atm);
    assert_eq!(classify_moneyness(100.0, 100.0).unwrap(), Moneyness::Atm);
    assert!(classify_moneyness(0.0, 100.0).is_err());
    assert!(classify_moneyness(100.0, -1.0).is_err());
}

#[test]
fn maturity_boundaries() {
    let t = date(2011, 3, 7);
    assert_eq!(
        classify_maturity(t, t + chrono::Duration::days(29)).unwrap(),
        Maturity::Short
    );
    assert_eq!(
        classify_maturity(t, t + chrono::Duration::days(30)).unwrap(),
        Maturity::Medium
    );
    assert_eq!(
        classify_maturity(t, t + chrono::Duration::days(60)).unwrap(),
        Maturity::Medium
    );
    assert_eq!(
        classify_maturity(t, t + chrono::Duration::days(61)).unwrap(),
        Maturity::Long
    );
    assert!(classify_maturity(t, t).is_err());
    assert!(classify_maturity(t, t - chrono::Duration::days(1)).is_err());
}

#[test]
fn regime_boundaries() {
    let cfg = RegimeConfig::default();
    assert_eq!(
        classify_regime(cfg.span_start, &cfg).unwrap(),
        Regime::LowVol
    );
    assert_eq!(
        classify_regime(cfg.boundary - chrono::Duration::days(1), &cfg).unwrap(),
        Regime::LowVol
    );
    assert_eq!(
        classify_regime(cfg.boundary, &cfg).unwrap(),
        Regime::HighVol
    );
    assert_eq!(
        classify_regime(cfg.span_end, &cfg).unwrap(),
        Regime::HighVol
    );

    assert!(classify_regime(cfg.span_start - chrono::Duration::days(1), &cfg).is_err());
    assert!(classify_regime(cfg.span_end + chrono::Duration::days(1), &cfg).is_err());

    let bad = RegimeConfig {
        boundary: cfg.span_start - chrono::Duration::days(1),
        ..cfg
    };
    assert!(bad.validate().is_err());
}

#[test]
fn week_key_iso_edges() {
    // 2011-01-01 falls in ISO week 52 of 2010
    assert_eq!(
        WeekKey::of(date(2011, 1, 1)),
        WeekKey {
            year: 2010,
            week: 52
        }
    );
    // 2013-12-30 falls in ISO week 1 of 2014
    assert_eq!(
        WeekKey::of(date(2013, 12, 30)),
        WeekKey {
            year: 2014,
            week: 1
        }
    );
    // Ord is chronological across the year boundary
    assert!(
        WeekKey {
            year: 2010,
            week: 52
        } < WeekKey {
            year: 2011,
            week: 1
        }
    );
    assert_eq!(
        WeekKey {
            year: 2010,
            week: 52
        }
        .to_string(),
        "2010-W52"
    );
}

#[test]
fn truth_params_ramp_endpoints() {
    let cfg = GenerateConfig {
        weeks: 11,
        drift_amplitude: 0.1,
        ..GenerateConfig::default()
    };
    let first = truth_params_for_week(&cfg, 0);
    let mid = truth_params_for_week(&cfg, 5);
    let last = truth_params_for_week(&cfg, 10);
    assert!((first.sigma - 0.9 * cfg.base.sigma).abs() <= 1e-12);
    assert!((mid.sigma - cfg.base.sigma).abs() <= 1e-12);
    assert!((last.sigma - 1.1 * cfg.base.sigma).abs() <= 1e-12);
    assert!((last.nu - 1.1 * cfg.base.nu).abs() <= 1e-12);
    assert!((last.theta - 1.1 * cfg.base.theta).abs() <= 1e-15);
}

#[test]
fn generate_chain_shape_and_determinism() {
    let cfg = GenerateConfig {
        weeks: 4,
        quotes_per_week: 12,
        ..GenerateConfig::default()
    };
    let quad = QuadratureSpec::default();
    let a = generate_chain(&cfg, 9, &quad).unwrap();
    let b = generate_chain(&cfg, 9, &quad).unwrap();
    let c = generate_chain(&cfg, 10, &quad).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.len(), 48);

    for q in &a {
        assert!(q.market_price > 0.0);
        assert!((20..=500).contains(&q.volume));
        assert!(q.expiry_date > q.trade_date);
        assert!(q.strike > 0.0);
        assert!(!matches!(
            q.trade_date.weekday(),
            Weekday::Sat | Weekday::Sun
        ));
    }

    // one ISO week per configured week
    let weeks: std::collections::BTreeSet<WeekKey> =
        a.iter().map(|q| WeekKey::of(q.trade_date)).collect();
    assert_eq!(weeks.len(), 4);
}

#[test]
fn generate_chain_zero_noise_prices_are_clean() {
    let cfg = GenerateConfig {
        weeks: 2,
        quotes_per_week: 6,
        noise_level: 0.0,
        drift_amplitude: 0.0,
        ..GenerateConfig::default()
    };
    let quad = QuadratureSpec::default();
    let a = generate_chain(&cfg, 1, &quad).unwrap();
    let b = generate_chain(&cfg, 2, &quad).unwrap();
    // prices identical across seeds once noise is off; only volumes differ
    for (qa, qb) in a.iter().zip(&b) {
        assert_eq!(qa.market_price, qb.market_price);
    }
    assert!(a.iter().zip(&b).any(|(qa, qb)| qa.volume != qb.volume));
}

#[test]
fn generate_chain_validation() {
    let quad = QuadratureSpec::default();
    let mut cfg = GenerateConfig {
        weeks: 0,
        ..GenerateConfig::default()
    };
    assert!(generate_chain(&cfg, 1, &quad).is_err());
    cfg.weeks = 2;
    cfg.drift_amplitude = 1.0;
    assert!(generate_chain(&cfg, 1, &quad).is_err());
    cfg.drift_amplitude = 0.1;
    cfg.noise_level = -0.5;
    assert!(generate_chain(&cfg, 1, &quad).is_err());
}

#[test]
fn generate_returns_skips_weekends() {
    let params = DensityParams {
        vg: VgParams {
            sigma: 0.1044,
            nu: 0.211,
            theta: -0.00118,
        },
        horizon_t: 1.0 / 252.0,
        drift_m: 0.0,
    };
    // start on a Saturday; first row must land on the following Monday
    let rows = generate_returns(&params, 12, date(2011, 3, 5), 3).unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0].0, date(2011, 3, 7));
    for (d, _) in &rows {
        assert!(!matches!(d.weekday(), Weekday::Sat | Weekday::Sun));
    }
    for pair in rows.windows(2) {
        assert!(pair[0].0 < pair[1].0);
    }
}
