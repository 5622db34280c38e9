//! Historical data ingestion and process parameter estimation.
//!
//! Load files are `timestamp,power` CSVs with a `# units: MVA` or
//! `# units: kW` header. Over-limit energy is aggregated per day or month and
//! converted to an over-limit capacity series, which is then fitted with a
//! GBM. Diesel prices are fitted with an AR(1) regression mapped onto the
//! exact mean-reverting transition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::GbmParams;

/// Dickey-Fuller 5% critical value for a regression with intercept.
pub const DF_CRITICAL_5PCT: f64 = -2.86;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PowerUnit {
    #[serde(rename = "MVA")]
    Mva,
    #[serde(rename = "kW")]
    Kw,
}

impl PowerUnit {
    /// Kilowatts per unit, assuming unity power factor for apparent power.
    pub fn kw_factor(self) -> f64 {
        match self {
            PowerUnit::Mva => 1000.0,
            PowerUnit::Kw => 1.0,
        }
    }
}

impl fmt::Display for PowerUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerUnit::Mva => "MVA",
            PowerUnit::Kw => "kW",
        })
    }
}

impl FromStr for PowerUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mva" => Ok(PowerUnit::Mva),
            "kw" => Ok(PowerUnit::Kw),
            other => Err(Error::Config(format!("unknown power unit {other:?}"))),
        }
    }
}

/// A power level with its unit, e.g. a transformer thermal limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power {
    pub value: f64,
    pub unit: PowerUnit,
}

impl Power {
    pub fn new(value: f64, unit: PowerUnit) -> Self {
        Self { value, unit }
    }
}

impl FromStr for Power {
    type Err = Error;

    /// Parses `35MVA`, `35 MVA` or `35000kW`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|c: char| c.is_ascii_alphabetic())
            .ok_or_else(|| Error::Config(format!("power {s:?} has no unit (use MVA or kW)")))?;
        let value = s[..split]
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("power {s:?}: {e}")))?;
        Ok(Power {
            value,
            unit: s[split..].parse()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRecord {
    pub timestamp: NaiveDateTime,
    pub power: f64,
}

/// Load records of one file, all in the unit declared by its header.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    pub unit: PowerUnit,
    pub records: Vec<LoadRecord>,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn parse_unit_comment(line: &str) -> Option<&str> {
    let body = line.trim_start_matches('#').trim();
    let (key, value) = body.split_once(':')?;
    key.trim().eq_ignore_ascii_case("units").then(|| value.trim())
}

/// Reads a load CSV. The unit header is mandatory and may not change within
/// the file; timestamps must be strictly increasing and powers nonnegative.
pub fn read_load_csv<R: BufRead>(reader: R) -> Result<LoadSeries> {
    let mut unit: Option<PowerUnit> = None;
    let mut records: Vec<LoadRecord> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some(u) = parse_unit_comment(trimmed) {
                let u: PowerUnit = u
                    .parse()
                    .map_err(|_| Error::ingestion(Some(lineno), format!("unknown unit {u:?}")))?;
                match unit {
                    Some(prev) if prev != u => {
                        return Err(Error::ingestion(
                            Some(lineno),
                            format!("mixed units: {prev} then {u}"),
                        ))
                    }
                    _ => unit = Some(u),
                }
            }
            continue;
        }
        let mut fields = trimmed.split(',');
        let (ts, pw) = match (fields.next(), fields.next()) {
            (Some(ts), Some(pw)) => (ts, pw),
            _ => {
                return Err(Error::ingestion(
                    Some(lineno),
                    "expected `timestamp,power`",
                ))
            }
        };
        if ts.trim().eq_ignore_ascii_case("timestamp") {
            continue;
        }
        let timestamp = parse_timestamp(ts)
            .ok_or_else(|| Error::ingestion(Some(lineno), format!("bad timestamp {ts:?}")))?;
        let power: f64 = pw
            .trim()
            .parse()
            .map_err(|_| Error::ingestion(Some(lineno), format!("bad power {pw:?}")))?;
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::ingestion(
                Some(lineno),
                format!("power must be >= 0, got {power}"),
            ));
        }
        if let Some(prev) = records.last() {
            if timestamp <= prev.timestamp {
                return Err(Error::ingestion(
                    Some(lineno),
                    format!("timestamp {timestamp} is not after {}", prev.timestamp),
                ));
            }
        }
        records.push(LoadRecord { timestamp, power });
    }
    let unit = unit.ok_or_else(|| {
        Error::ingestion(None, "missing `# units: MVA` or `# units: kW` header")
    })?;
    Ok(LoadSeries { unit, records })
}

/// Reads `timestamp,price` rows (header and `#` comments allowed).
pub fn read_price_csv<R: BufRead>(reader: R) -> Result<Vec<(NaiveDateTime, f64)>> {
    let mut out: Vec<(NaiveDateTime, f64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (ts, px) = trimmed
            .split_once(',')
            .ok_or_else(|| Error::ingestion(Some(lineno), "expected `timestamp,price`"))?;
        if ts.trim().eq_ignore_ascii_case("timestamp") {
            continue;
        }
        let t = parse_timestamp(ts)
            .ok_or_else(|| Error::ingestion(Some(lineno), format!("bad timestamp {ts:?}")))?;
        let p: f64 = px
            .trim()
            .parse()
            .map_err(|_| Error::ingestion(Some(lineno), format!("bad price {px:?}")))?;
        if let Some((prev, _)) = out.last() {
            if t <= *prev {
                return Err(Error::ingestion(
                    Some(lineno),
                    format!("timestamp {t} is not after {prev}"),
                ));
            }
        }
        out.push((t, p));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Daily,
    #[default]
    Monthly,
}

impl FromStr for Bucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "daily" => Ok(Bucket::Daily),
            "monthly" => Ok(Bucket::Monthly),
            other => Err(Error::Config(format!("unknown bucket {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateOptions {
    pub bucket: Bucket,
    /// Sampling interval in minutes; inferred from the most common spacing
    /// when absent (15 minutes for single-record files).
    pub interval_minutes: Option<f64>,
    /// Gaps shorter than this are interpolated, longer ones drop their days.
    pub max_gap_hours: f64,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            bucket: Bucket::Monthly,
            interval_minutes: None,
            max_gap_hours: 2.0,
        }
    }
}

impl AggregateOptions {
    pub fn daily() -> Self {
        Self {
            bucket: Bucket::Daily,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketEnergy {
    /// First day of the bucket.
    pub start: NaiveDate,
    pub energy_kwh: f64,
    /// Days of the bucket that entered the sum.
    pub days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverLimitSeries {
    pub bucket: Bucket,
    pub entries: Vec<BucketEnergy>,
    pub excluded_days: usize,
    pub interpolated_intervals: usize,
}

impl OverLimitSeries {
    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy_kwh).collect()
    }

    /// Over-limit capacity (kW) per bucket: energy divided by the daily peak
    /// exposure times the number of days in the bucket.
    pub fn capacity_kw(&self, peak_hours_per_day: f64) -> Result<Vec<f64>> {
        if !(peak_hours_per_day > 0.0) {
            return Err(Error::domain("peak hours per day must be > 0"));
        }
        Ok(self
            .entries
            .iter()
            .map(|e| e.energy_kwh / (peak_hours_per_day * e.days as f64))
            .collect())
    }
}

fn modal_spacing_minutes(records: &[LoadRecord]) -> f64 {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for w in records.windows(2) {
        let secs = (w[1].timestamp - w[0].timestamp).num_seconds();
        *counts.entry(secs).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(secs, _)| secs as f64 / 60.0)
        .unwrap_or(15.0)
}

/// Sums energy above `thermal_limit` per bucket. The limit must be in the
/// same unit the file declares.
pub fn aggregate_over_limit(
    series: &LoadSeries,
    thermal_limit: Power,
    options: AggregateOptions,
) -> Result<OverLimitSeries> {
    if series.records.is_empty() {
        return Err(Error::ingestion(None, "no load records"));
    }
    if thermal_limit.unit != series.unit {
        return Err(Error::UnitMismatch(format!(
            "thermal limit given in {} but load data is in {}",
            thermal_limit.unit, series.unit
        )));
    }
    if !(thermal_limit.value > 0.0 && thermal_limit.value.is_finite()) {
        return Err(Error::domain("thermal limit must be > 0"));
    }
    for w in series.records.windows(2) {
        if w[1].timestamp <= w[0].timestamp {
            return Err(Error::ingestion(None, "timestamps are not strictly increasing"));
        }
    }
    let interval_min = options
        .interval_minutes
        .unwrap_or_else(|| modal_spacing_minutes(&series.records));
    if !(interval_min > 0.0) {
        return Err(Error::domain("sampling interval must be > 0"));
    }
    let interval = Duration::milliseconds((interval_min * 60_000.0).round() as i64);
    let hours = interval_min / 60.0;
    let factor = series.unit.kw_factor();
    let over = |p: f64| (p - thermal_limit.value).max(0.0) * factor * hours;

    let mut daily: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    let mut excluded: BTreeSet<NaiveDate> = BTreeSet::new();
    let mut interpolated = 0usize;
    let recs = &series.records;
    for (i, rec) in recs.iter().enumerate() {
        *daily.entry(rec.timestamp.date()).or_default() += over(rec.power);
        let Some(next) = recs.get(i + 1) else { break };
        let gap = next.timestamp - rec.timestamp;
        let steps = (gap.num_milliseconds() as f64 / interval.num_milliseconds() as f64).round();
        if steps <= 1.0 {
            continue;
        }
        if gap.num_milliseconds() as f64 >= options.max_gap_hours * 3_600_000.0 {
            let mut d = rec.timestamp.date();
            while d <= next.timestamp.date() {
                excluded.insert(d);
                d = d.succ_opt().expect("date in range");
            }
            continue;
        }
        let missing = steps as usize - 1;
        for k in 1..=missing {
            let w = k as f64 / steps;
            let p = rec.power + w * (next.power - rec.power);
            let ts = rec.timestamp + interval * k as i32;
            *daily.entry(ts.date()).or_default() += over(p);
            interpolated += 1;
        }
    }

    let first = recs[0].timestamp.date();
    let last = recs[recs.len() - 1].timestamp.date();
    let mut buckets: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    let mut d = first;
    while d <= last {
        if !excluded.contains(&d) {
            let key = match options.bucket {
                Bucket::Daily => d,
                Bucket::Monthly => d.with_day(1).expect("first of month"),
            };
            let e = buckets.entry(key).or_default();
            e.0 += daily.get(&d).copied().unwrap_or(0.0);
            e.1 += 1;
        }
        d = d.succ_opt().expect("date in range");
    }
    Ok(OverLimitSeries {
        bucket: options.bucket,
        entries: buckets
            .into_iter()
            .map(|(start, (energy_kwh, days))| BucketEnergy {
                start,
                energy_kwh,
                days,
            })
            .collect(),
        excluded_days: excluded.iter().filter(|d| **d >= first && **d <= last).count(),
        interpolated_intervals: interpolated,
    })
}

/// Fitted parameters with their standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedParams {
    Gbm {
        mu: f64,
        sigma: f64,
        stderr_mu: f64,
        stderr_sigma: f64,
    },
    MeanReverting {
        /// `None` when the series has no variation to identify the speed.
        beta: Option<f64>,
        s_bar: f64,
        sigma: f64,
        stderr_beta: Option<f64>,
        stderr_s_bar: f64,
        stderr_sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    #[serde(flatten)]
    pub params: FittedParams,
    #[serde(rename = "n_obs")]
    pub n_observations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CalibrationResult {
    pub fn gbm_params(&self) -> Option<GbmParams> {
        match self.params {
            FittedParams::Gbm { mu, sigma, .. } => Some(GbmParams { mu, sigma }),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_series(series: &[f64], needed: usize) -> Result<()> {
    if series.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: series.len(),
        });
    }
    if let Some(v) = series.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("series values must be > 0, found {v}")));
    }
    Ok(())
}

/// Closed-form maximum likelihood for GBM observed every `dt` years.
pub fn calibrate_gbm(series: &[f64], dt: f64) -> Result<CalibrationResult> {
    check_series(series, 3)?;
    if !(dt > 0.0) {
        return Err(Error::domain("dt must be > 0"));
    }
    let returns: Vec<f64> = series.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sigma = (var / dt).sqrt();
    let mu = mean / dt + 0.5 * sigma * sigma;
    let stderr_sigma = sigma / (2.0 * n).sqrt();
    let stderr_mu = (sigma * sigma / (n * dt) + sigma.powi(4) / (2.0 * n)).sqrt();
    Ok(CalibrationResult {
        params: FittedParams::Gbm {
            mu,
            sigma,
            stderr_mu,
            stderr_sigma,
        },
        n_observations: series.len(),
        warnings: Vec::new(),
    })
}

/// AR(1) fit mapped onto the exact mean-reverting transition, rejecting
/// series whose unit root cannot be ruled out at the 5% level.
pub fn calibrate_mean_reverting(series: &[f64], dt: f64) -> Result<CalibrationResult> {
    calibrate_mean_reverting_with(series, dt, Some(DF_CRITICAL_5PCT))
}

/// As [`calibrate_mean_reverting`] with an explicit Dickey-Fuller critical
/// value; `None` only requires the slope to lie in (0, 1).
pub fn calibrate_mean_reverting_with(
    series: &[f64],
    dt: f64,
    unit_root_critical: Option<f64>,
) -> Result<CalibrationResult> {
    check_series(series, 4)?;
    if !(dt > 0.0) {
        return Err(Error::domain("dt must be > 0"));
    }
    let x = &series[..series.len() - 1];
    let y = &series[1..];
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - x_mean).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - x_mean) * (b - y_mean)).sum();

    let level = series.iter().sum::<f64>() / series.len() as f64;
    if sxx <= 1e-24 * level * level * n {
        let spread = series.iter().map(|v| (v - level).abs()).fold(0.0, f64::max);
        if spread <= 1e-12 * level {
            return Ok(CalibrationResult {
                params: FittedParams::MeanReverting {
                    beta: None,
                    s_bar: level,
                    sigma: 0.0,
                    stderr_beta: None,
                    stderr_s_bar: 0.0,
                    stderr_sigma: 0.0,
                },
                n_observations: series.len(),
                warnings: vec![
                    "constant series: reversion speed is unidentifiable".to_string(),
                ],
            });
        }
        return Err(Error::NonReverting(
            "lagged series has no variation; regression is degenerate".into(),
        ));
    }

    let b = sxy / sxx;
    let a = y_mean - b * x_mean;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let s2 = rss / (n - 2.0);
    let s = s2.sqrt();
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::NonReverting(format!(
            "AR(1) slope {b:.6} lies outside (0, 1)"
        )));
    }
    let var_b = s2 / sxx;
    let se_b = var_b.sqrt();
    if let Some(crit) = unit_root_critical {
        let t = (b - 1.0) / se_b;
        if !(t < crit) {
            return Err(Error::NonReverting(format!(
                "unit root not rejected: Dickey-Fuller t = {t:.3}, critical value {crit}"
            )));
        }
    }

    let beta = -b.ln() / dt;
    let s_bar = a / (1.0 - b);
    let scale = |b: f64| (-2.0 * b.ln() / dt / (1.0 - b * b)).sqrt();
    let sigma = s * scale(b);

    let var_a = s2 * (1.0 / n + x_mean * x_mean / sxx);
    let cov_ab = -x_mean * s2 / sxx;
    let (ga, gb) = (1.0 / (1.0 - b), a / (1.0 - b).powi(2));
    let var_s_bar = ga * ga * var_a + gb * gb * var_b + 2.0 * ga * gb * cov_ab;
    let h = 1e-6 * b.min(1.0 - b);
    let dscale = (scale(b + h) - scale(b - h)) / (2.0 * h);
    let var_s = s2 / (2.0 * (n - 2.0));
    let var_sigma = scale(b).powi(2) * var_s + s2 * dscale * dscale * var_b;

    Ok(CalibrationResult {
        params: FittedParams::MeanReverting {
            beta: Some(beta),
            s_bar,
            sigma,
            stderr_beta: Some(se_b / (b * dt)),
            stderr_s_bar: var_s_bar.max(0.0).sqrt(),
            stderr_sigma: var_sigma.max(0.0).sqrt(),
        },
        n_observations: series.len(),
        warnings: Vec::new(),
    })
}
