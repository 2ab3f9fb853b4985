use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum in index order starting from `0.0`.
#[inline]
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v)
}

/// `T` days of `m` intraday log returns, their daily sums and, for simulated
/// data, the true conditional scale `sigma_t` of each day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayPanel {
    days: usize,
    intraday_count: usize,
    intraday: Vec<f64>,
    daily: Vec<f64>,
    sigma: Option<Vec<f64>>,
}

const MAGIC: &[u8; 8] = b"PXPANEL1";

impl IntradayPanel {
    /// Builds a panel from row-major intraday returns; daily returns are their sums.
    pub fn from_intraday(
        intraday_count: usize,
        intraday: Vec<f64>,
        sigma: Option<Vec<f64>>,
    ) -> Result<Self> {
        if intraday_count == 0 {
            return Err(Error::InvalidParameter("intraday count must be at least 1".into()));
        }
        if intraday.len() % intraday_count != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} intraday values do not fill rows of {intraday_count}",
                intraday.len()
            )));
        }
        let days = intraday.len() / intraday_count;
        if let Some(s) = &sigma {
            if s.len() != days {
                return Err(Error::InvalidParameter(format!(
                    "sigma path has {} entries for {days} days",
                    s.len()
                )));
            }
        }
        let daily = intraday.chunks_exact(intraday_count).map(ordered_sum).collect();
        Ok(Self {
            days,
            intraday_count,
            intraday,
            daily,
            sigma,
        })
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn intraday_count(&self) -> usize {
        self.intraday_count
    }

    pub fn intraday(&self, day: usize) -> &[f64] {
        let m = self.intraday_count;
        &self.intraday[day * m..(day + 1) * m]
    }

    pub fn intraday_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.intraday.chunks_exact(self.intraday_count)
    }

    pub fn daily_returns(&self) -> &[f64] {
        &self.daily
    }

    /// True `sigma_t`; `None` for observed data.
    pub fn sigma_path(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    pub fn is_simulated(&self) -> bool {
        self.sigma.is_some()
    }

    /// Cumulative intraday log-price offsets of a day, starting with the
    /// day-open point `0`; `m + 1` values.
    pub fn intraday_path(&self, day: usize) -> Vec<f64> {
        let mut path = Vec::with_capacity(self.intraday_count + 1);
        let mut level = 0.0;
        path.push(level);
        for r in self.intraday(day) {
            level += r;
            path.push(level);
        }
        path
    }

    /// Columnar CSV: `day,intraday,return,sigma` (sigma empty for observed data).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "intraday", "return", "sigma"])?;
        for (t, row) in self.intraday_rows().enumerate() {
            let sigma = self.sigma.as_ref().map(|s| s[t].to_string()).unwrap_or_default();
            for (i, r) in row.iter().enumerate() {
                w.write_record([t.to_string(), i.to_string(), r.to_string(), sigma.clone()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["day", "intraday", "return", "sigma"] {
            return Err(Error::Data {
                line: 1,
                message: format!("expected header day,intraday,return,sigma, got {headers:?}"),
            });
        }
        let mut intraday = Vec::new();
        let mut sigma: Vec<f64> = Vec::new();
        let mut any_sigma = None;
        let mut m: Option<usize> = None;
        let mut expect_day = 0usize;
        let mut expect_i = 0usize;
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let bad = |message: String| Error::Data { line, message };
            let field = |k: usize| record.get(k).unwrap_or("");
            let day: usize = field(0).parse().map_err(|e| bad(format!("day: {e}")))?;
            let i: usize = field(1).parse().map_err(|e| bad(format!("intraday: {e}")))?;
            let r: f64 = field(2).parse().map_err(|e| bad(format!("return: {e}")))?;
            if i == 0 && expect_i != 0 {
                if m.is_none() {
                    m = Some(expect_i);
                }
                if Some(expect_i) != m {
                    return Err(bad(format!("day {} has {expect_i} intraday rows", expect_day)));
                }
                expect_day += 1;
                expect_i = 0;
            }
            if day != expect_day || i != expect_i {
                return Err(bad(format!("expected (day {expect_day}, intraday {expect_i})")));
            }
            let s = field(3);
            let has = !s.is_empty();
            if *any_sigma.get_or_insert(has) != has {
                return Err(bad("sigma column must be filled on all rows or none".into()));
            }
            if has && i == 0 {
                sigma.push(s.parse().map_err(|e| bad(format!("sigma: {e}")))?);
            }
            intraday.push(r);
            expect_i += 1;
        }
        if intraday.is_empty() {
            return Err(Error::Data { line: 1, message: "empty panel".into() });
        }
        let m = m.unwrap_or(expect_i);
        if expect_i != m {
            return Err(Error::Data {
                line: 0,
                message: format!("last day has {expect_i} of {m} intraday rows"),
            });
        }
        Self::from_intraday(m, intraday, any_sigma.unwrap_or(false).then_some(sigma))
    }

    /// Little-endian cache: magic, `days` u64, `m` u64, sigma flag u8,
    /// intraday values, then sigma values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.days as u64).to_le_bytes())?;
        out.write_all(&(self.intraday_count as u64).to_le_bytes())?;
        out.write_all(&[self.sigma.is_some() as u8])?;
        for v in self.intraday.iter().chain(self.sigma.iter().flatten()) {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut input: R) -> Result<Self> {
        let bad = |message: &str| Error::Data { line: 0, message: message.to_string() };
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a panel cache"));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let days = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let m = u64::from_le_bytes(word) as usize;
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let mut read_vec = |n: usize| -> Result<Vec<f64>> {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                input.read_exact(&mut word)?;
                v.push(f64::from_le_bytes(word));
            }
            Ok(v)
        };
        let intraday = read_vec(days * m)?;
        let sigma = match flag[0] {
            0 => None,
            1 => Some(read_vec(days)?),
            _ => return Err(bad("corrupt sigma flag")),
        };
        Self::from_intraday(m, intraday, sigma)
    }
}
