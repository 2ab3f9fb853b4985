//! Hourly close prices to daily returns and the 24-hour realized variance.
//!
//! Input is a CSV with header `timestamp,close`. A timestamp is either an
//! RFC 3339 instant or integer epoch seconds, detected per row. Each
//! timestamp is the instant at which its close was observed.
//!
//! Returns are log differences of consecutive closes exactly one hour apart;
//! a longer gap produces no return. A return over `(t - 1h, t]` belongs to
//! the calendar day of `t - 1h` (shifted by the configured boundary offset),
//! so a complete day holds the 24 returns from its midnight close to the
//! next midnight close.

use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::dgp::ordered_sum;
use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;
const HOUR: i64 = 3600;
const DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRecord {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub close: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapPolicy {
    /// Days with fewer than 24 returns are removed.
    #[default]
    Drop,
    /// Partial days are kept and their realized variance is scaled by `24 / k`.
    Scale,
}

impl FromStr for GapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "drop" => Ok(GapPolicy::Drop),
            "scale" => Ok(GapPolicy::Scale),
            _ => Err(Error::Config(format!("unknown gap policy '{s}' (drop or scale)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestConfig {
    pub gap_policy: GapPolicy,
    /// Day boundary in seconds after UTC midnight.
    pub boundary_offset_secs: i64,
}

fn parse_timestamp(field: &str) -> std::result::Result<i64, String> {
    let field = field.trim();
    if let Ok(secs) = field.parse::<i64>() {
        return Ok(secs);
    }
    DateTime::parse_from_rfc3339(field)
        .map(|t| t.timestamp())
        .map_err(|e| format!("timestamp '{field}': {e}"))
}

/// Reads and validates prices. Rows are sorted by time (with a warning if
/// the input was out of order); duplicate timestamps are rejected.
pub fn parse_prices<R: Read>(input: R) -> Result<Vec<PriceRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["timestamp", "close"] {
        return Err(Error::Data {
            line: 1,
            message: format!("expected header timestamp,close, got {headers:?}"),
        });
    }
    let mut rows: Vec<(PriceRecord, u64)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Data { line, message };
        if record.len() != 2 {
            return Err(bad(format!("expected 2 fields, got {}", record.len())));
        }
        let timestamp = parse_timestamp(&record[0]).map_err(bad)?;
        let close: f64 = record[1].parse().map_err(|e| bad(format!("close '{}': {e}", &record[1])))?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(bad(format!("close {close} must be positive")));
        }
        rows.push((PriceRecord { timestamp, close }, line));
    }
    if rows.windows(2).any(|w| w[1].0.timestamp < w[0].0.timestamp) {
        log::warn!("price rows are out of order; sorting by timestamp");
        rows.sort_by_key(|(r, _)| r.timestamp);
    }
    if let Some(w) = rows.windows(2).find(|w| w[0].0.timestamp == w[1].0.timestamp) {
        return Err(Error::Data {
            line: w[0].1.max(w[1].1),
            message: format!("duplicate timestamp {}", w[1].0.timestamp),
        });
    }
    Ok(rows.into_iter().map(|(r, _)| r).collect())
}

/// One output row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub daily_return: f64,
    pub rv24: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyAlignedSeries {
    pub records: Vec<DailyRecord>,
    /// Hourly returns of each kept day, in time order.
    pub hourly: Vec<Vec<f64>>,
    /// Days removed by the drop policy.
    pub dropped: Vec<NaiveDate>,
    /// Calendar days with at least one return, kept or not.
    pub days_covered: usize,
}

impl DailyAlignedSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn daily_returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.daily_return).collect()
    }

    pub fn rv24(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rv24).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.hourly.iter().all(|h| h.len() == HOURS_PER_DAY)
    }

    /// `date,daily_return,rv24`, floats in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_daily_csv(&self.records, out)
    }
}

pub fn write_daily_csv<W: Write>(records: &[DailyRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "daily_return", "rv24"])?;
    for r in records {
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.daily_return.to_string(),
            r.rv24.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_daily_csv<R: Read>(input: R) -> Result<Vec<DailyRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "daily_return", "rv24"] {
        return Err(Error::Data {
            line: 1,
            message: format!("expected header date,daily_return,rv24, got {headers:?}"),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Data { line, message };
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| bad(format!("date '{}': {e}", &record[0])))?;
        let daily_return = record[1].parse().map_err(|e| bad(format!("daily_return: {e}")))?;
        let rv24: f64 = record[2].parse().map_err(|e| bad(format!("rv24: {e}")))?;
        if !(rv24 >= 0.0) {
            return Err(bad(format!("rv24 {rv24} must be nonnegative")));
        }
        out.push(DailyRecord { date, daily_return, rv24 });
    }
    Ok(out)
}

fn day_index(timestamp: i64, offset: i64) -> i64 {
    (timestamp - offset).div_euclid(DAY)
}

fn day_date(index: i64) -> Result<NaiveDate> {
    DateTime::from_timestamp(index * DAY, 0)
        .map(|t| t.date_naive())
        .ok_or_else(|| Error::Domain(format!("day index {index} out of range")))
}

/// Buckets hourly returns into days and applies the gap policy.
pub fn to_daily(records: &[PriceRecord], cfg: &IngestConfig) -> Result<DailyAlignedSeries> {
    if records.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(Error::InvalidParameter("price records must be strictly increasing".into()));
    }
    let mut days: Vec<(i64, Vec<f64>)> = Vec::new();
    for w in records.windows(2) {
        if w[1].timestamp - w[0].timestamp != HOUR {
            continue;
        }
        let r = w[1].close.ln() - w[0].close.ln();
        let day = day_index(w[0].timestamp, cfg.boundary_offset_secs);
        match days.last_mut() {
            Some((d, v)) if *d == day => v.push(r),
            _ => days.push((day, vec![r])),
        }
    }
    let days_covered = days.len();
    let mut out_records = Vec::new();
    let mut hourly = Vec::new();
    let mut dropped = Vec::new();
    for (day, returns) in days {
        let date = day_date(day)?;
        let k = returns.len();
        let squares: Vec<f64> = returns.iter().map(|r| r * r).collect();
        let rv = ordered_sum(&squares);
        let rv24 = if k == HOURS_PER_DAY {
            rv
        } else {
            match cfg.gap_policy {
                GapPolicy::Drop => {
                    dropped.push(date);
                    continue;
                }
                GapPolicy::Scale => rv * HOURS_PER_DAY as f64 / k as f64,
            }
        };
        out_records.push(DailyRecord { date, daily_return: ordered_sum(&returns), rv24 });
        hourly.push(returns);
    }
    if out_records.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(DailyAlignedSeries { records: out_records, hourly, dropped, days_covered })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hourly(start: i64, closes: &[f64]) -> Vec<PriceRecord> {
        closes
            .iter()
            .enumerate()
            .map(|(i, c)| PriceRecord { timestamp: start + HOUR * i as i64, close: *c })
            .collect()
    }

    #[test]
    fn single_return() {
        let text = format!("timestamp,close\n0,100\n3600,{}\n", 100.0 * 0.01f64.exp());
        let p = parse_prices(text.as_bytes()).unwrap();
        let r = p[1].close.ln() - p[0].close.ln();
        assert!((r - 0.01).abs() < 1e-15);
    }

    #[test]
    fn mixed_timestamp_formats() {
        let text = "timestamp,close\n2021-01-01T00:00:00Z,1\n1609462800,2\n2021-01-01T03:00:00+01:00,3\n";
        let p = parse_prices(text.as_bytes()).unwrap();
        assert_eq!(p[0].timestamp, 1_609_459_200);
        assert_eq!(p[1].timestamp, 1_609_462_800);
        assert_eq!(p[2].timestamp, 1_609_466_400);
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let text = "timestamp,close\n7200,3\n0,1\n3600,2\n";
        let p = parse_prices(text.as_bytes()).unwrap();
        assert_eq!(p.iter().map(|r| r.close).collect::<Vec<_>>(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn bad_rows_report_lines() {
        let dup = "timestamp,close\n0,1\n3600,2\n3600,3\n";
        assert!(matches!(parse_prices(dup.as_bytes()), Err(Error::Data { line: 4, .. })));
        let neg = "timestamp,close\n0,1\n3600,-2\n";
        assert!(matches!(parse_prices(neg.as_bytes()), Err(Error::Data { line: 3, .. })));
        let junk = "timestamp,close\n0,1\nyesterday,2\n";
        assert!(matches!(parse_prices(junk.as_bytes()), Err(Error::Data { line: 3, .. })));
        assert!(matches!(parse_prices("time,price\n".as_bytes()), Err(Error::Data { line: 1, .. })));
    }

    #[test]
    fn complete_days() {
        // 49 closes give 48 returns: two complete days
        let closes: Vec<f64> = (0..49).map(|i| 100.0 + (i % 5) as f64).collect();
        let s = to_daily(&hourly(0, &closes), &IngestConfig::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.is_complete());
        for (rec, h) in s.records.iter().zip(&s.hourly) {
            assert_eq!(rec.rv24, ordered_sum(&h.iter().map(|r| r * r).collect::<Vec<_>>()));
            assert_eq!(rec.daily_return, ordered_sum(h));
        }
        assert_eq!(s.records[0].date, NaiveDate::from_ymd_opt(1970, 1, 1).unwrap());
    }

    #[test]
    fn partial_day_policies() {
        // 48 closes give 47 returns: day two has 23
        let closes: Vec<f64> = (0..48).map(|i| 50.0 * (1.0 + 0.01 * ((i * 7 % 11) as f64))).collect();
        let records = hourly(0, &closes);
        let drop = to_daily(&records, &IngestConfig::default()).unwrap();
        assert_eq!(drop.len(), 1);
        assert_eq!(drop.dropped.len(), 1);
        let scale = to_daily(&records, &IngestConfig { gap_policy: GapPolicy::Scale, ..Default::default() }).unwrap();
        assert_eq!(scale.len(), 2);
        let h = &scale.hourly[1];
        assert_eq!(h.len(), 23);
        let rv: f64 = ordered_sum(&h.iter().map(|r| r * r).collect::<Vec<_>>());
        assert_eq!(scale.records[1].rv24, rv * 24.0 / 23.0);
    }

    #[test]
    fn gaps_break_returns_and_offset_moves_boundary() {
        let mut records = hourly(0, &[1.0, 2.0, 3.0]);
        records.push(PriceRecord { timestamp: 4 * HOUR, close: 4.0 });
        let cfg = IngestConfig { gap_policy: GapPolicy::Scale, ..Default::default() };
        let s = to_daily(&records, &cfg).unwrap();
        assert_eq!(s.hourly[0].len(), 2);

        let records = hourly(22 * HOUR, &[1.0, 2.0, 4.0, 8.0]);
        let s = to_daily(&records, &cfg).unwrap();
        assert_eq!(s.hourly.iter().map(Vec::len).collect::<Vec<_>>(), [2, 1]);
        let shifted = IngestConfig { boundary_offset_secs: -2 * HOUR, ..cfg };
        let s = to_daily(&records, &shifted).unwrap();
        assert_eq!(s.hourly.iter().map(Vec::len).collect::<Vec<_>>(), [3]);
    }

    #[test]
    fn empty_after_policy_is_an_error() {
        let records = hourly(0, &[1.0, 2.0, 3.0]);
        assert!(to_daily(&records, &IngestConfig::default()).is_err());
    }

    #[test]
    fn daily_csv_round_trip() {
        let records = vec![
            DailyRecord { date: NaiveDate::from_ymd_opt(2021, 3, 4).unwrap(), daily_return: -0.012345678901234567, rv24: 1e-5 },
            DailyRecord { date: NaiveDate::from_ymd_opt(2021, 3, 5).unwrap(), daily_return: 0.1 + 0.2, rv24: 3.0e-300 },
        ];
        let mut buf = Vec::new();
        write_daily_csv(&records, &mut buf).unwrap();
        let back = read_daily_csv(buf.as_slice()).unwrap();
        assert_eq!(back, records);
        for (a, b) in back.iter().zip(&records) {
            assert_eq!(a.daily_return.to_bits(), b.daily_return.to_bits());
            assert_eq!(a.rv24.to_bits(), b.rv24.to_bits());
        }
    }
}
