//! Quote ingestion, liquidity filtering, bucket classification, ISO-week
//! grouping, and the synthetic chain/return generators that stand in for
//! exchange data.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng as _;
use rand::SeedableRng as _;
use serde::{Deserialize, Serialize};

use crate::calibration::WeeklyQuote;
use crate::error::{Error, Result};
use crate::pricing::{price_vg_closed, OptionSpec};
use crate::specfun::QuadratureSpec;
use crate::vgcore::{DensityParams, MarketEnv, VgParams};

pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub trade_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub strike: f64,
    pub market_price: f64,
    pub volume: u64,
    pub spot: f64,
    pub r_d: f64,
    pub r_f: f64,
}

impl OptionQuote {
    pub fn env(&self) -> MarketEnv {
        MarketEnv {
            spot: self.spot,
            r_d: self.r_d,
            r_f: self.r_f,
        }
    }

    /// ACT/365 time to expiry.
    pub fn maturity_t(&self) -> f64 {
        (self.expiry_date - self.trade_date).num_days() as f64 / DAYS_PER_YEAR
    }

    pub fn option_spec(&self) -> OptionSpec {
        OptionSpec::call(self.strike, self.maturity_t())
    }

    pub fn to_weekly(&self) -> WeeklyQuote {
        WeeklyQuote {
            env: self.env(),
            opt: self.option_spec(),
            market_price: self.market_price,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOutcome {
    pub quotes: Vec<OptionQuote>,
    pub rejects: Vec<RejectRecord>,
}

const QUOTE_HEADERS: [&str; 8] = [
    "trade_date",
    "expiry_date",
    "strike",
    "price",
    "volume",
    "spot",
    "r_d",
    "r_f",
];

fn parse_date(s: &str, field: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| format!("bad date '{}' in {field}", s.trim()))
}

fn parse_f64(s: &str, field: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("bad number '{}' in {field}", s.trim()))
}

/// Reads the quote CSV. Every data row either becomes a quote or a
/// line-numbered reject; only structural problems (missing file, missing
/// or wrong header, no data rows at all) are errors.
pub fn load_quotes(path: &Path) -> Result<LoadOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Data(format!("{}: cannot open", path.display())),
            _ => Error::Csv(e),
        })?;

    let headers = reader.headers()?.clone();
    let mut col = [0usize; 8];
    for (i, name) in QUOTE_HEADERS.iter().enumerate() {
        col[i] = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| {
                Error::Data(format!(
                    "{}: missing required column '{name}' (header: {})",
                    path.display(),
                    headers.iter().collect::<Vec<_>>().join(",")
                ))
            })?;
    }

    let mut out = LoadOutcome::default();
    let mut saw_rows = false;
    for record in reader.records() {
        let record = record?;
        saw_rows = true;
        let line = record.position().map(|p| p.line()).unwrap_or(0);

        let field = |i: usize| -> std::result::Result<&str, String> {
            record
                .get(col[i])
                .ok_or_else(|| format!("missing field '{}'", QUOTE_HEADERS[i]))
        };

        let parsed: std::result::Result<OptionQuote, String> = (|| {
            let trade_date = parse_date(field(0)?, "trade_date")?;
            let expiry_date = parse_date(field(1)?, "expiry_date")?;
            let strike = parse_f64(field(2)?, "strike")?;
            let market_price = parse_f64(field(3)?, "price")?;
            let volume = field(4)?
                .trim()
                .parse::<u64>()
                .map_err(|_| format!("bad count '{}' in volume", field(4).unwrap_or("").trim()))?;
            let spot = parse_f64(field(5)?, "spot")?;
            let r_d = parse_f64(field(6)?, "r_d")?;
            let r_f = parse_f64(field(7)?, "r_f")?;

            if expiry_date <= trade_date {
                return Err(format!(
                    "expiry {expiry_date} not after trade date {trade_date}"
                ));
            }
            if !(strike > 0.0) || !strike.is_finite() {
                return Err(format!("strike must be positive, got {strike}"));
            }
            if !(market_price > 0.0) || !market_price.is_finite() {
                return Err(format!("price must be positive, got {market_price}"));
            }
            if !(spot > 0.0) || !spot.is_finite() {
                return Err(format!("spot must be positive, got {spot}"));
            }
            if !r_d.is_finite() || !r_f.is_finite() {
                return Err("rates must be finite".into());
            }
            Ok(OptionQuote {
                trade_date,
                expiry_date,
                strike,
                market_price,
                volume,
                spot,
                r_d,
                r_f,
            })
        })();

        match parsed {
            Ok(q) => out.quotes.push(q),
            Err(reason) => out.rejects.push(RejectRecord { line, reason }),
        }
    }

    if !saw_rows {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

pub fn write_quotes_csv(path: &Path, quotes: &[OptionQuote]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        _ => Error::Csv(e),
    })?;
    writer.write_record(QUOTE_HEADERS)?;
    for q in quotes {
        writer.write_record(&[
            q.trade_date.to_string(),
            q.expiry_date.to_string(),
            format!("{}", q.strike),
            format!("{}", q.market_price),
            format!("{}", q.volume),
            format!("{}", q.spot),
            format!("{}", q.r_d),
            format!("{}", q.r_f),
        ])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_rejects_csv(path: &Path, rejects: &[RejectRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        _ => Error::Csv(e),
    })?;
    writer.write_record(["line_number", "reason"])?;
    for r in rejects {
        writer.write_record(&[r.line.to_string(), r.reason.clone()])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Returns CSV: date, log_return. Malformed rows are hard errors with line
/// numbers — a return series with holes is not usable for MLE.
pub fn load_returns(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Data(format!("{}: cannot open", path.display())),
            _ => Error::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let date_col = headers
        .iter()
        .position(|h| h.trim() == "date")
        .ok_or_else(|| Error::Data(format!("{}: missing column 'date'", path.display())))?;
    let ret_col = headers
        .iter()
        .position(|h| h.trim() == "log_return")
        .ok_or_else(|| Error::Data(format!("{}: missing column 'log_return'", path.display())))?;

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = parse_date(record.get(date_col).unwrap_or(""), "date")
            .map_err(|r| Error::Data(format!("{}: line {line}: {r}", path.display())))?;
        let z = parse_f64(record.get(ret_col).unwrap_or(""), "log_return")
            .map_err(|r| Error::Data(format!("{}: line {line}: {r}", path.display())))?;
        if !z.is_finite() {
            return Err(Error::Data(format!(
                "{}: line {line}: non-finite log_return",
                path.display()
            )));
        }
        out.push((date, z));
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

pub fn write_returns_csv(path: &Path, rows: &[(NaiveDate, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        _ => Error::Csv(e),
    })?;
    writer.write_record(["date", "log_return"])?;
    for (d, z) in rows {
        writer.write_record(&[d.to_string(), format!("{z}")])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Keeps quotes with volume strictly above the threshold.
pub fn liquidity_filter(quotes: &[OptionQuote], min_volume: u64) -> Vec<OptionQuote> {
    quotes
        .iter()
        .filter(|q| q.volume > min_volume)
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Moneyness {
    Itm,
    Atm,
    Otm,
}

impl Moneyness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Moneyness::Itm => "ITM",
            Moneyness::Atm => "ATM",
            Moneyness::Otm => "OTM",
        }
    }
}

impl fmt::Display for Moneyness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maturity {
    Short,
    Medium,
    Long,
}

impl Maturity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Maturity::Short => "short",
            Maturity::Medium => "medium",
            Maturity::Long => "long",
        }
    }
}

impl fmt::Display for Maturity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LowVol,
    HighVol,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::LowVol => "low_vol",
            Regime::HighVol => "high_vol",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketLabel {
    pub moneyness: Moneyness,
    pub maturity: Maturity,
    pub regime: Regime,
}

/// ATM for 0.95 < S/K < 1.05; ITM at or above 1.05; OTM at or below 0.95.
/// Boundaries go to the outer buckets so the partition is total.
pub fn classify_moneyness(spot: f64, strike: f64) -> Result<Moneyness> {
    if !(spot > 0.0) || !(strike > 0.0) {
        return Err(Error::Domain(format!(
            "moneyness needs positive spot and strike, got S={spot}, K={strike}"
        )));
    }
    let ratio = spot / strike;
    Ok(if ratio >= 1.05 {
        Moneyness::Itm
    } else if ratio <= 0.95 {
        Moneyness::Otm
    } else {
        Moneyness::Atm
    })
}

/// Calendar days to expiry: short < 30, medium 30–60 inclusive, long > 60.
pub fn classify_maturity(trade_date: NaiveDate, expiry_date: NaiveDate) -> Result<Maturity> {
    let days = (expiry_date - trade_date).num_days();
    if days <= 0 {
        return Err(Error::Domain(format!(
            "expiry {expiry_date} not after trade date {trade_date}"
        )));
    }
    Ok(if days < 30 {
        Maturity::Short
    } else if days <= 60 {
        Maturity::Medium
    } else {
        Maturity::Long
    })
}

/// The regime split: [span_start, boundary) is low-vol, [boundary,
/// span_end] is high-vol. Dates outside the span are an error so a new
/// dataset cannot silently inherit the default periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub span_start: NaiveDate,
    pub boundary: NaiveDate,
    pub span_end: NaiveDate,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig {
            span_start: NaiveDate::from_ymd_opt(2010, 11, 1).unwrap(),
            boundary: NaiveDate::from_ymd_opt(2011, 7, 28).unwrap(),
            span_end: NaiveDate::from_ymd_opt(2012, 9, 28).unwrap(),
        }
    }
}

impl RegimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.span_start > self.boundary || self.boundary > self.span_end {
            return Err(Error::Domain(format!(
                "regime dates must satisfy span_start <= boundary <= span_end, got {} / {} / {}",
                self.span_start, self.boundary, self.span_end
            )));
        }
        Ok(())
    }
}

pub fn classify_regime(trade_date: NaiveDate, cfg: &RegimeConfig) -> Result<Regime> {
    cfg.validate()?;
    if trade_date < cfg.span_start || trade_date > cfg.span_end {
        return Err(Error::Domain(format!(
            "date {trade_date} outside the configured regime span {}..{}",
            cfg.span_start, cfg.span_end
        )));
    }
    Ok(if trade_date < cfg.boundary {
        Regime::LowVol
    } else {
        Regime::HighVol
    })
}

pub fn classify(quote: &OptionQuote, regime_cfg: &RegimeConfig) -> Result<BucketLabel> {
    Ok(BucketLabel {
        moneyness: classify_moneyness(quote.spot, quote.strike)?,
        maturity: classify_maturity(quote.trade_date, quote.expiry_date)?,
        regime: classify_regime(quote.trade_date, regime_cfg)?,
    })
}

/// ISO week-year and week number; the derived Ord is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeekKey {
    pub year: i32,
    pub week: u32,
}

impl WeekKey {
    pub fn of(date: NaiveDate) -> Self {
        let iso = date.iso_week();
        WeekKey {
            year: iso.year(),
            week: iso.week(),
        }
    }
}

impl fmt::Display for WeekKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-W{:02}", self.year, self.week)
    }
}

impl FromStr for WeekKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (y, w) = s
            .split_once("-W")
            .ok_or_else(|| Error::Domain(format!("bad week key '{s}' (expected YYYY-Www)")))?;
        Ok(WeekKey {
            year: y
                .parse()
                .map_err(|_| Error::Domain(format!("bad year in week key '{s}'")))?,
            week: w
                .parse()
                .map_err(|_| Error::Domain(format!("bad week in week key '{s}'")))?,
        })
    }
}

/// Groups by the ISO week of the trade date, chronologically ordered.
pub fn group_by_week(quotes: &[OptionQuote]) -> BTreeMap<WeekKey, Vec<OptionQuote>> {
    let mut map: BTreeMap<WeekKey, Vec<OptionQuote>> = BTreeMap::new();
    for q in quotes {
        map.entry(WeekKey::of(q.trade_date)).or_default().push(*q);
    }
    map
}

/// Synthetic chain generator configuration. The truth parameters ramp
/// linearly from −drift_amplitude to +drift_amplitude (relative) across the
/// weeks, the spot wanders on a slow deterministic cycle, and volumes are
/// drawn uniformly so a fixed share lands under the liquidity threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub weeks: u32,
    pub quotes_per_week: u32,
    pub start: NaiveDate,
    pub base: VgParams,
    pub drift_amplitude: f64,
    pub noise_level: f64,
    pub spot0: f64,
    pub r_d: f64,
    pub r_f: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            weeks: 92,
            quotes_per_week: 80,
            start: NaiveDate::from_ymd_opt(2010, 11, 1).unwrap(),
            base: VgParams {
                sigma: 0.116,
                nu: 0.099,
                theta: 0.0026,
            },
            drift_amplitude: 0.1,
            noise_level: 0.01,
            spot0: 50.0,
            r_d: 0.065,
            r_f: 0.015,
        }
    }
}

const GEN_MATURITY_DAYS: [i64; 6] = [15, 25, 40, 50, 75, 90];
const GEN_MONEYNESS: [f64; 8] = [0.90, 0.94, 0.97, 1.00, 1.02, 1.03, 1.06, 1.10];

/// Truth parameters for week w under the linear ramp.
pub fn truth_params_for_week(cfg: &GenerateConfig, week_idx: u32) -> VgParams {
    let f = if cfg.weeks > 1 {
        -1.0 + 2.0 * week_idx as f64 / (cfg.weeks - 1) as f64
    } else {
        0.0
    };
    let scale = 1.0 + cfg.drift_amplitude * f;
    VgParams {
        sigma: cfg.base.sigma * scale,
        nu: cfg.base.nu * scale,
        theta: cfg.base.theta * scale,
    }
}

fn spot_for_week(cfg: &GenerateConfig, week_idx: u32) -> f64 {
    cfg.spot0 * (1.0 + 0.01 * (2.0 * std::f64::consts::PI * week_idx as f64 / 26.0).sin())
}

/// Emits a synthetic chain priced by the VG closed form, with multiplicative
/// lognormal price noise. Deterministic for a fixed seed: one volume draw
/// and one noise draw per quote, in row order.
pub fn generate_chain(
    cfg: &GenerateConfig,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<Vec<OptionQuote>> {
    if cfg.weeks == 0 || cfg.quotes_per_week == 0 {
        return Err(Error::Domain(
            "weeks and quotes_per_week must be positive".into(),
        ));
    }
    cfg.base.validate()?;
    if !(cfg.noise_level >= 0.0) || !(cfg.drift_amplitude >= 0.0) || cfg.drift_amplitude >= 1.0 {
        return Err(Error::Domain(
            "noise_level must be >= 0 and drift_amplitude in [0, 1)".into(),
        ));
    }
    // anchor each synthetic week on its Monday
    let start_monday =
        cfg.start - Duration::days(cfg.start.weekday().num_days_from_monday() as i64);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    let mut out = Vec::with_capacity((cfg.weeks * cfg.quotes_per_week) as usize);

    for w in 0..cfg.weeks {
        let params = truth_params_for_week(cfg, w);
        let spot = spot_for_week(cfg, w);
        let env = MarketEnv {
            spot,
            r_d: cfg.r_d,
            r_f: cfg.r_f,
        };
        let monday = start_monday + Duration::weeks(w as i64);
        debug_assert_eq!(monday.weekday(), Weekday::Mon);

        for i in 0..cfg.quotes_per_week {
            let trade_date = monday + Duration::days((i % 5) as i64);
            let m_days = GEN_MATURITY_DAYS[(i as usize) % GEN_MATURITY_DAYS.len()];
            let mny = GEN_MONEYNESS[(i as usize / GEN_MATURITY_DAYS.len()) % GEN_MONEYNESS.len()];
            let expiry_date = trade_date + Duration::days(m_days);
            let strike = spot / mny;
            let opt = OptionSpec::call(strike, m_days as f64 / DAYS_PER_YEAR);

            let volume = {
                let u: f64 = rng.gen();
                20 + (480.0 * u) as u64
            };
            let noise: f64 = if cfg.noise_level > 0.0 {
                let z: f64 = rng.sample(normal);
                (cfg.noise_level * z).exp()
            } else {
                1.0
            };

            let clean = price_vg_closed(&env, &params, &opt, quad)?;
            out.push(OptionQuote {
                trade_date,
                expiry_date,
                strike,
                market_price: clean * noise,
                volume,
                spot,
                r_d: cfg.r_d,
                r_f: cfg.r_f,
            });
        }
    }
    Ok(out)
}

/// Simulated daily log-return series on weekdays, for the historical fit.
pub fn generate_returns(
    params: &DensityParams,
    n: usize,
    start: NaiveDate,
    seed: u64,
) -> Result<Vec<(NaiveDate, f64)>> {
    let zs = crate::vgcore::simulate_returns(params, n, seed)?;
    let mut date = start;
    let mut out = Vec::with_capacity(n);
    for z in zs {
        while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            date += Duration::days(1);
        }
        out.push((date, z));
        date += Duration::days(1);
    }
    Ok(out)
}
