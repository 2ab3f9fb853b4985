//! Diebold-Mariano comparative backtests with three-zone verdicts.
//!
//! For loss differences `d_t = L(x1_t, v_{t+1}) - L(x2_t, v_{t+1})` the
//! statistic is `S = sqrt(n) mean(d) / tau`, with `tau^2` a long-run variance
//! estimate built from the sample autocovariances
//!
//! ```text
//! gamma_j = (1/n) sum_{t=j+1}^{n} (d_t - mean)(d_{t-j} - mean)
//! ```
//!
//! Large positive `S` says `x1` is worse than the benchmark `x2` (red),
//! large negative `S` says it is better (green).

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const MIN_OBSERVATIONS: usize = 30;

/// Significance levels shown in zone matrices, loosest first.
pub const LEVELS: [f64; 3] = [0.10, 0.05, 0.01];

/// A `tau^2` at or below this multiple of `gamma_0` counts as nonpositive.
const NONPOSITIVE_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDiffSeries {
    pub d: Vec<f64>,
    pub model_1: String,
    pub model_2: String,
    pub proxy: String,
    pub loss: String,
}

impl LossDiffSeries {
    pub fn new(
        d: Vec<f64>,
        model_1: impl Into<String>,
        model_2: impl Into<String>,
        proxy: impl Into<String>,
        loss: impl Into<String>,
    ) -> Result<Self> {
        if let Some(t) = d.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("loss difference {t} is not finite")));
        }
        Ok(Self {
            d,
            model_1: model_1.into(),
            model_2: model_2.into(),
            proxy: proxy.into(),
            loss: loss.into(),
        })
    }

    pub fn test(&self, variant: HacVariant) -> Result<DmRecord> {
        let result = dm_statistic(&self.d, variant)?;
        Ok(DmRecord {
            model_1: self.model_1.clone(),
            model_2: self.model_2.clone(),
            proxy: self.proxy.clone(),
            loss: self.loss.clone(),
            variant,
            result,
        })
    }
}

/// Long-run variance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "h", rename_all = "snake_case")]
pub enum HacVariant {
    /// `gamma_0`
    Lag0,
    /// `gamma_0 + 2 gamma_1`
    #[default]
    CompromiseLag1,
    /// `gamma_0 + 2 sum_{j=1}^{h-1} gamma_j`
    HStep(usize),
    /// `gamma_0 + 2 sum_{j=1}^{J} (1 - j/J) gamma_j`, `J = floor(n^{1/4})`
    Bartlett,
}

impl fmt::Display for HacVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HacVariant::Lag0 => f.write_str("lag0"),
            HacVariant::CompromiseLag1 => f.write_str("lag1"),
            HacVariant::HStep(h) => write!(f, "h{h}"),
            HacVariant::Bartlett => f.write_str("bartlett"),
        }
    }
}

impl FromStr for HacVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        match key.as_str() {
            "lag0" => Ok(HacVariant::Lag0),
            "lag1" | "compromise" => Ok(HacVariant::CompromiseLag1),
            "bartlett" => Ok(HacVariant::Bartlett),
            _ => key
                .strip_prefix('h')
                .and_then(|h| h.parse().ok())
                .filter(|h| *h >= 1)
                .map(HacVariant::HStep)
                .ok_or_else(|| Error::Config(format!("unknown HAC variant '{s}'"))),
        }
    }
}

/// Bartlett truncation `floor(n^{1/4})`, computed without floating error.
pub fn bartlett_truncation(n: usize) -> usize {
    let mut j = (n as f64).powf(0.25).floor() as usize;
    while (j + 1).pow(4) <= n {
        j += 1;
    }
    while j > 0 && j.pow(4) > n {
        j -= 1;
    }
    j
}

fn mean(d: &[f64]) -> f64 {
    d.iter().sum::<f64>() / d.len() as f64
}

fn autocov_centered(d: &[f64], mean: f64, j: usize) -> f64 {
    let n = d.len();
    let s: f64 = (j..n).map(|t| (d[t] - mean) * (d[t - j] - mean)).sum();
    s / n as f64
}

/// Lag-`j` sample autocovariance with `1/n` normalisation.
pub fn sample_autocov(d: &[f64], j: usize) -> Result<f64> {
    if j >= d.len() {
        return Err(Error::InsufficientData {
            needed: j + 1,
            got: d.len(),
        });
    }
    Ok(autocov_centered(d, mean(d), j))
}

/// Long-run variance estimate and whether the `gamma_0` fallback was used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HacEstimate {
    pub tau2: f64,
    pub fallback: bool,
}

pub fn hac_variance(d: &[f64], variant: HacVariant) -> Result<HacEstimate> {
    hac_with_mean(d, mean(d), variant)
}

fn hac_with_mean(d: &[f64], mean: f64, variant: HacVariant) -> Result<HacEstimate> {
    let n = d.len();
    if n < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData {
            needed: MIN_OBSERVATIONS,
            got: n,
        });
    }
    let gamma0 = autocov_centered(d, mean, 0);
    if !(gamma0 > 0.0) || d.iter().all(|x| *x == d[0]) {
        return Err(Error::Degenerate("loss differences have zero variance".into()));
    }
    let lags = |weights: &mut dyn Iterator<Item = (usize, f64)>| -> f64 {
        weights
            .filter(|(j, _)| *j < n)
            .map(|(j, w)| w * autocov_centered(d, mean, j))
            .sum()
    };
    let tau2 = match variant {
        HacVariant::Lag0 => gamma0,
        HacVariant::CompromiseLag1 => gamma0 + 2.0 * lags(&mut std::iter::once((1, 1.0))),
        HacVariant::HStep(h) => {
            if h == 0 {
                return Err(Error::InvalidParameter("HAC horizon must be at least 1".into()));
            }
            gamma0 + 2.0 * lags(&mut (1..h).map(|j| (j, 1.0)))
        }
        HacVariant::Bartlett => {
            let big_j = bartlett_truncation(n);
            if big_j == 0 {
                gamma0
            } else {
                let jf = big_j as f64;
                gamma0 + 2.0 * lags(&mut (1..=big_j).map(|j| (j, 1.0 - j as f64 / jf)))
            }
        }
    };
    if tau2 <= NONPOSITIVE_RELATIVE * gamma0 {
        Ok(HacEstimate {
            tau2: gamma0,
            fallback: true,
        })
    } else {
        Ok(HacEstimate {
            tau2,
            fallback: false,
        })
    }
}

fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

fn upper_quantiles() -> &'static [f64; 3] {
    static Q: OnceLock<[f64; 3]> = OnceLock::new();
    Q.get_or_init(|| LEVELS.map(|eta| normal_quantile(1.0 - eta)))
}

/// Colour of a cell, by the smallest level at which a hypothesis is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    DarkGreen,
    Green,
    LightGreen,
    Yellow,
    LightRed,
    Red,
    DarkRed,
}

impl Zone {
    pub fn tag(self) -> &'static str {
        match self {
            Zone::DarkGreen => "G3",
            Zone::Green => "G2",
            Zone::LightGreen => "G1",
            Zone::Yellow => "Y",
            Zone::LightRed => "R1",
            Zone::Red => "R2",
            Zone::DarkRed => "R3",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Zone::DarkGreen => "dark green",
            Zone::Green => "green",
            Zone::LightGreen => "light green",
            Zone::Yellow => "yellow",
            Zone::LightRed => "light red",
            Zone::Red => "red",
            Zone::DarkRed => "dark red",
        }
    }

    pub fn is_red(self) -> bool {
        matches!(self, Zone::LightRed | Zone::Red | Zone::DarkRed)
    }

    pub fn is_green(self) -> bool {
        matches!(self, Zone::LightGreen | Zone::Green | Zone::DarkGreen)
    }
}

/// Per-level verdicts at the levels in [`LEVELS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneVerdict {
    /// `H0-` rejected (`S >= Phi^{-1}(1 - eta)`): `x1` worse than `x2`.
    pub red: [bool; 3],
    /// `H0+` rejected (`S <= Phi^{-1}(eta)`): `x1` better than `x2`.
    pub green: [bool; 3],
}

impl ZoneVerdict {
    pub fn zone(&self) -> Zone {
        const RED: [Zone; 3] = [Zone::LightRed, Zone::Red, Zone::DarkRed];
        const GREEN: [Zone; 3] = [Zone::LightGreen, Zone::Green, Zone::DarkGreen];
        if let Some(k) = (0..3).rev().find(|&k| self.red[k]) {
            RED[k]
        } else if let Some(k) = (0..3).rev().find(|&k| self.green[k]) {
            GREEN[k]
        } else {
            Zone::Yellow
        }
    }

    /// Smallest rejected level, if any.
    pub fn intensity(&self) -> Option<f64> {
        (0..3)
            .rev()
            .find(|&k| self.red[k] || self.green[k])
            .map(|k| LEVELS[k])
    }
}

/// Three-zone classification at the standard levels.
pub fn three_zone(s: f64) -> ZoneVerdict {
    let q = upper_quantiles();
    let mut v = ZoneVerdict {
        red: [false; 3],
        green: [false; 3],
    };
    for k in 0..3 {
        v.red[k] = s >= q[k];
        // Phi^{-1}(eta) = -Phi^{-1}(1 - eta)
        v.green[k] = s <= -q[k];
    }
    v
}

/// Three-zone classification at arbitrary levels, one verdict pair per level.
pub fn three_zone_at(s: f64, levels: &[f64]) -> Result<Vec<(bool, bool)>> {
    levels
        .iter()
        .map(|&eta| {
            if !(eta > 0.0 && eta < 0.5) {
                return Err(Error::InvalidParameter(format!("level {eta} outside (0, 0.5)")));
            }
            let q = normal_quantile(1.0 - eta);
            Ok((s >= q, s <= -q))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    #[serde(rename = "S")]
    pub statistic: f64,
    pub n: usize,
    pub tau2: f64,
    pub mean_diff: f64,
    pub fallback: bool,
    pub zone: Zone,
    pub verdict: ZoneVerdict,
}

impl DmResult {
    pub fn zone(&self) -> Zone {
        self.zone
    }
}

pub fn dm_statistic(d: &[f64], variant: HacVariant) -> Result<DmResult> {
    if let Some(t) = d.iter().position(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("loss difference {t} is not finite")));
    }
    let n = d.len();
    let m = if n > 0 { mean(d) } else { 0.0 };
    let hac = hac_with_mean(d, m, variant)?;
    let statistic = (n as f64).sqrt() * m / hac.tau2.sqrt();
    let verdict = three_zone(statistic);
    Ok(DmResult {
        statistic,
        n,
        tau2: hac.tau2,
        mean_diff: m,
        fallback: hac.fallback,
        zone: verdict.zone(),
        verdict,
    })
}

/// A labelled test outcome; serialises to the JSON records emitted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmRecord {
    pub model_1: String,
    pub model_2: String,
    pub proxy: String,
    pub loss: String,
    pub variant: HacVariant,
    #[serde(flatten)]
    pub result: DmResult,
}

impl DmRecord {
    pub fn zone(&self) -> Zone {
        self.result.zone()
    }
}
