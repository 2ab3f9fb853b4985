//! Per-day proxies for conditional moments of the daily return.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dgp::IntradayPanel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyKind {
    /// `r_t^2`
    SquaredReturn,
    /// `r_t^3`
    CubedReturn,
    /// `r_t^4`
    QuarticReturn,
    /// `sum_i r_{t,i}^2`
    RealizedVariance,
    /// `sum_i r_{t,i}^3`
    RealizedThird,
    /// `sum_i r_{t,i}^4 + 6 sum_{i<j} r_{t,i}^2 r_{t,j}^2`
    CorrectedFourth,
    /// squared intraday log range over `4 log 2`
    AdjustedLogRange,
}

impl ProxyKind {
    pub const ALL: [ProxyKind; 7] = [
        ProxyKind::SquaredReturn,
        ProxyKind::CubedReturn,
        ProxyKind::QuarticReturn,
        ProxyKind::RealizedVariance,
        ProxyKind::RealizedThird,
        ProxyKind::CorrectedFourth,
        ProxyKind::AdjustedLogRange,
    ];

    pub fn target_moment(self) -> u32 {
        match self {
            ProxyKind::SquaredReturn | ProxyKind::RealizedVariance | ProxyKind::AdjustedLogRange => 2,
            ProxyKind::CubedReturn | ProxyKind::RealizedThird => 3,
            ProxyKind::QuarticReturn | ProxyKind::CorrectedFourth => 4,
        }
    }

    /// The daily power `r_t^n` for moment `n`.
    pub fn return_power(n: u32) -> Result<Self> {
        match n {
            2 => Ok(ProxyKind::SquaredReturn),
            3 => Ok(ProxyKind::CubedReturn),
            4 => Ok(ProxyKind::QuarticReturn),
            _ => Err(Error::Config(format!("no return-power proxy for moment {n}"))),
        }
    }

    pub fn is_return_power(self) -> bool {
        matches!(
            self,
            ProxyKind::SquaredReturn | ProxyKind::CubedReturn | ProxyKind::QuarticReturn
        )
    }

    pub fn needs_intraday(self) -> bool {
        !self.is_return_power()
    }

    pub fn name(self) -> &'static str {
        match self {
            ProxyKind::SquaredReturn => "squared_return",
            ProxyKind::CubedReturn => "cubed_return",
            ProxyKind::QuarticReturn => "quartic_return",
            ProxyKind::RealizedVariance => "realized_variance",
            ProxyKind::RealizedThird => "realized_third",
            ProxyKind::CorrectedFourth => "corrected_fourth",
            ProxyKind::AdjustedLogRange => "adjusted_log_range",
        }
    }

    pub fn short_label(self) -> &'static str {
        match self {
            ProxyKind::SquaredReturn => "r^2",
            ProxyKind::CubedReturn => "r^3",
            ProxyKind::QuarticReturn => "r^4",
            ProxyKind::RealizedVariance => "RV",
            ProxyKind::RealizedThird => "RM(3)",
            ProxyKind::CorrectedFourth => "cRM(4)",
            ProxyKind::AdjustedLogRange => "Range",
        }
    }

    pub fn compute(self, panel: &IntradayPanel) -> ProxySeries {
        match self {
            ProxyKind::SquaredReturn => squared_return(panel.daily_returns()),
            ProxyKind::CubedReturn => return_power(panel.daily_returns(), 3),
            ProxyKind::QuarticReturn => return_power(panel.daily_returns(), 4),
            ProxyKind::RealizedVariance => realized_variance(panel),
            ProxyKind::RealizedThird => realized_third(panel),
            ProxyKind::CorrectedFourth => corrected_fourth(panel),
            ProxyKind::AdjustedLogRange => adjusted_log_range(panel),
        }
    }
}

impl fmt::Display for ProxyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProxyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let alias = match key.as_str() {
            "r2" | "sq" => Some(ProxyKind::SquaredReturn),
            "r3" => Some(ProxyKind::CubedReturn),
            "r4" => Some(ProxyKind::QuarticReturn),
            "rv" => Some(ProxyKind::RealizedVariance),
            "rm3" => Some(ProxyKind::RealizedThird),
            "crm4" => Some(ProxyKind::CorrectedFourth),
            "range" => Some(ProxyKind::AdjustedLogRange),
            _ => None,
        };
        alias
            .or_else(|| {
                ProxyKind::ALL
                    .into_iter()
                    .find(|k| k.name() == key || k.short_label().eq_ignore_ascii_case(&key))
            })
            .ok_or_else(|| Error::Config(format!("unknown proxy '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxySeries {
    pub kind: ProxyKind,
    pub values: Vec<f64>,
}

impl ProxySeries {
    pub fn target_moment(&self) -> u32 {
        self.kind.target_moment()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Two-column CSV `day,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "value"])?;
        for (t, v) in self.values.iter().enumerate() {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `day,value` rows; days must be consecutive from 0.
    pub fn read_csv<R: Read>(kind: ProxyKind, input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let bad = |message: String| Error::Data { line, message };
            let day: usize = record
                .get(0)
                .unwrap_or("")
                .parse()
                .map_err(|e| bad(format!("day: {e}")))?;
            if day != values.len() {
                return Err(bad(format!("expected day {}, got {day}", values.len())));
            }
            let v: f64 = record
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|e| bad(format!("value: {e}")))?;
            values.push(v);
        }
        Ok(Self { kind, values })
    }
}

pub fn squared_return(daily: &[f64]) -> ProxySeries {
    ProxySeries {
        kind: ProxyKind::SquaredReturn,
        values: daily.iter().map(|r| r * r).collect(),
    }
}

/// `r_t^n` for `n` in 2..=4.
pub fn return_power(daily: &[f64], n: u32) -> ProxySeries {
    let kind = ProxyKind::return_power(n).expect("power proxy order in 2..=4");
    ProxySeries {
        kind,
        values: daily.iter().map(|r| r.powi(n as i32)).collect(),
    }
}

fn per_day(panel: &IntradayPanel, kind: ProxyKind, f: impl Fn(&[f64]) -> f64) -> ProxySeries {
    ProxySeries {
        kind,
        values: panel.intraday_rows().map(f).collect(),
    }
}

pub fn realized_variance(panel: &IntradayPanel) -> ProxySeries {
    per_day(panel, ProxyKind::RealizedVariance, |row| {
        row.iter().fold(0.0, |acc, r| acc + r * r)
    })
}

pub fn realized_third(panel: &IntradayPanel) -> ProxySeries {
    per_day(panel, ProxyKind::RealizedThird, |row| {
        row.iter().fold(0.0, |acc, r| acc + r * r * r)
    })
}

/// Uses `sum_{i<j} r_i^2 r_j^2 = ((sum r_i^2)^2 - sum r_i^4) / 2`, so
/// `cRM(4) = 3 (sum r_i^2)^2 - 2 sum r_i^4`.
pub fn corrected_fourth(panel: &IntradayPanel) -> ProxySeries {
    per_day(panel, ProxyKind::CorrectedFourth, corrected_fourth_row)
}

fn corrected_fourth_row(row: &[f64]) -> f64 {
    let (s2, s4) = row.iter().fold((0.0, 0.0), |(s2, s4), r| {
        let q = r * r;
        (s2 + q, s4 + q * q)
    });
    let cross = 0.5 * (s2 * s2 - s4);
    // the cross sum is nonnegative; clamp rounding residue
    s4 + 6.0 * cross.max(0.0)
}

/// `((max - min of the within-day log-price path) / (2 sqrt(log 2)))^2`, with
/// the day-open point included in the path.
pub fn adjusted_log_range(panel: &IntradayPanel) -> ProxySeries {
    let scale = 4.0 * std::f64::consts::LN_2;
    per_day(panel, ProxyKind::AdjustedLogRange, |row| {
        let (mut level, mut hi, mut lo) = (0.0f64, 0.0f64, 0.0f64);
        for r in row {
            level += r;
            hi = hi.max(level);
            lo = lo.min(level);
        }
        let range = hi - lo;
        range * range / scale
    })
}
