//! Plain-text experiment configuration: one `key = value` pair per line,
//! `#` starts a comment. See the README for the key list.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dgp::{ApArchParams, Dgp, GarchParams, InnovationSpec, IntradayScaling, DEFAULT_BURNIN};
use crate::dm::HacVariant;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::models::{MeanSpec, ModelSpec, RollingConfig, ORACLE_LABEL};
use crate::proxies::ProxyKind;

/// A forecaster in the comparison grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelEntry {
    Oracle,
    Fitted(ModelSpec),
}

impl fmt::Display for ModelEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelEntry::Oracle => f.write_str(ORACLE_LABEL),
            ModelEntry::Fitted(spec) => spec.fmt(f),
        }
    }
}

impl FromStr for ModelEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case(ORACLE_LABEL) {
            Ok(ModelEntry::Oracle)
        } else {
            s.parse().map(ModelEntry::Fitted)
        }
    }
}

impl TryFrom<String> for ModelEntry {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelEntry> for String {
    fn from(m: ModelEntry) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Simulated {
        dgp: Dgp,
        innovation: InnovationSpec,
        days: usize,
        burnin: usize,
    },
    /// Daily CSV as written by the ingest step (`date,daily_return,rv24`).
    Observed { path: PathBuf },
}

impl DataSource {
    pub fn is_simulated(&self) -> bool {
        matches!(self, DataSource::Simulated { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub moment: u32,
    pub models: Vec<ModelEntry>,
    pub proxies: Vec<ProxyKind>,
    pub losses: Vec<LossKind>,
    pub rolling: RollingConfig,
    pub nloop: usize,
    pub seed: u64,
    pub hac: HacVariant,
}

/// Splits on commas outside parentheses, so `GARCH(1,1)` stays whole.
fn split_list(value: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in value.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if c == ',' && depth == 0 {
            items.push(current.trim().to_string());
            current.clear();
        } else {
            current.push(c);
        }
    }
    items.push(current.trim().to_string());
    items.retain(|s| !s.is_empty());
    items
}

fn parse_number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_floats(key: &str, value: &str, count: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = split_list(value)
        .iter()
        .map(|s| parse_number(key, s))
        .collect::<Result<_>>()?;
    if v.len() != count {
        return Err(Error::Config(format!("{key}: expected {count} numbers, got {}", v.len())));
    }
    Ok(v)
}

const KEYS: [&str; 21] = [
    "source", "data", "dgp", "dgp.params", "T", "m", "innovation", "nig.alpha", "nig.beta",
    "scaling", "burnin", "moment", "models", "proxies", "losses", "window", "refit_every",
    "nloop", "seed", "hac", "mean",
];

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = text.parse()?;
        // relative data paths are resolved against the config file
        if let DataSource::Observed { path: data } = &mut cfg.source {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.rolling.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.models.is_empty() {
            return bad("models: at least one model is required".into());
        }
        if self.proxies.is_empty() || self.losses.is_empty() {
            return bad("proxies and losses must be non-empty".into());
        }
        if let Some(p) = self.proxies.iter().find(|p| p.target_moment() != self.moment) {
            return bad(format!("proxy {} targets moment {}, not {}", p.short_label(), p.target_moment(), self.moment));
        }
        if self.nloop == 0 {
            return bad("nloop must be at least 1".into());
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(m) = self.models.iter().find(|m| !seen.insert(**m)) {
            return bad(format!("model {m} listed twice"));
        }
        match &self.source {
            DataSource::Simulated { days, innovation, .. } => {
                innovation.validate()?;
                if self.rolling.window >= *days {
                    return bad(format!("window {} must be below T = {days}", self.rolling.window));
                }
            }
            DataSource::Observed { .. } => {
                if self.models.contains(&ModelEntry::Oracle) {
                    return bad("the oracle needs a simulated source".into());
                }
                if let Some(p) = self
                    .proxies
                    .iter()
                    .find(|p| !matches!(p, ProxyKind::SquaredReturn | ProxyKind::RealizedVariance))
                {
                    return bad(format!("observed data provides r^2 and RV only, not {}", p.short_label()));
                }
                if self.moment != 2 {
                    return bad("observed data supports moment 2 only".into());
                }
            }
        }
        Ok(())
    }

    /// Model labels in grid order.
    pub fn model_labels(&self) -> Vec<String> {
        self.models.iter().map(ToString::to_string).collect()
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let observed = match get("source").unwrap_or("simulated") {
            "simulated" => false,
            "data" | "observed" => true,
            other => return Err(Error::Config(format!("source: unknown '{other}'"))),
        };

        let moment: u32 = get("moment").map(|v| parse_number("moment", v)).transpose()?.unwrap_or(2);
        let nloop: usize = get("nloop").map(|v| parse_number("nloop", v)).transpose()?.unwrap_or(50);
        let seed: u64 = get("seed").map(|v| parse_number("seed", v)).transpose()?.unwrap_or(1);
        let hac = get("hac").map(str::parse).transpose()?.unwrap_or_default();
        let refit_every = get("refit_every").map(|v| parse_number("refit_every", v)).transpose()?.unwrap_or(10);

        let (source, days_hint) = if observed {
            let path = get("data").ok_or_else(|| Error::Config("data: path required for source = data".into()))?;
            for key in ["dgp", "dgp.params", "T", "m", "innovation", "nig.alpha", "nig.beta", "scaling", "burnin"] {
                if map.contains_key(key) {
                    return Err(Error::Config(format!("{key}: not used with source = data")));
                }
            }
            (DataSource::Observed { path: PathBuf::from(path) }, None)
        } else {
            if map.contains_key("data") {
                return Err(Error::Config("data: only used with source = data".into()));
            }
            let dgp = match get("dgp").unwrap_or("garch") {
                "garch" => {
                    let p = match get("dgp.params") {
                        Some(v) => parse_floats("dgp.params", v, 3)?,
                        None => vec![0.02, 0.08, 0.85],
                    };
                    Dgp::Garch(GarchParams::new(p[0], p[1], p[2])?)
                }
                "aparch4" | "aparch" => {
                    let p = match get("dgp.params") {
                        Some(v) => parse_floats("dgp.params", v, 3)?,
                        None => vec![0.02, 0.08, 0.75],
                    };
                    Dgp::Aparch4(ApArchParams::new(p[0], p[1], p[2])?)
                }
                other => return Err(Error::Config(format!("dgp: unknown '{other}'"))),
            };
            let days: usize = get("T").map(|v| parse_number("T", v)).transpose()?.unwrap_or(1500);
            let m: usize = get("m").map(|v| parse_number("m", v)).transpose()?.unwrap_or(100);
            let innovation = match get("innovation").unwrap_or("normal") {
                "normal" => {
                    if map.contains_key("nig.alpha") || map.contains_key("nig.beta") {
                        return Err(Error::Config("nig.*: only used with innovation = nig".into()));
                    }
                    InnovationSpec::normal(m)?
                }
                "nig" => {
                    let alpha = get("nig.alpha").map(|v| parse_number("nig.alpha", v)).transpose()?.unwrap_or(2.0);
                    let beta = get("nig.beta").map(|v| parse_number("nig.beta", v)).transpose()?.unwrap_or(1.0);
                    InnovationSpec::nig(alpha, beta, m)?
                }
                other => return Err(Error::Config(format!("innovation: unknown '{other}'"))),
            };
            let scaling = match get("scaling").unwrap_or("inverse_count") {
                "inverse_count" => IntradayScaling::InverseCount,
                "inverse_sqrt_count" => IntradayScaling::InverseSqrtCount,
                other => return Err(Error::Config(format!("scaling: unknown '{other}'"))),
            };
            let burnin = get("burnin").map(|v| parse_number("burnin", v)).transpose()?.unwrap_or(DEFAULT_BURNIN);
            let source = DataSource::Simulated {
                dgp,
                innovation: innovation.with_scaling(scaling),
                days,
                burnin,
            };
            (source, Some(days))
        };

        let window = match (get("window"), days_hint) {
            (Some(v), _) => parse_number("window", v)?,
            (None, Some(days)) => days / 3,
            (None, None) => return Err(Error::Config("window: required for source = data".into())),
        };

        let mean = match get("mean") {
            None => None,
            Some("zero") => Some(MeanSpec::Zero),
            Some("constant") => Some(MeanSpec::Constant),
            Some(other) => return Err(Error::Config(format!("mean: unknown '{other}'"))),
        }
        .or(observed.then_some(MeanSpec::Constant));

        let default_models = "oracle, GARCH(1,1), ARCH(1), ARCH(2), ARCH(7)";
        let models = split_list(get("models").unwrap_or(default_models))
            .iter()
            .map(|s| {
                s.parse().map(|m| match (m, mean) {
                    (ModelEntry::Fitted(spec), Some(mean)) => ModelEntry::Fitted(spec.with_mean(mean)),
                    (m, _) => m,
                })
            })
            .collect::<Result<Vec<ModelEntry>>>()?;

        let default_proxies = match moment {
            2 => "r^2, RV".to_string(),
            3 => "r^3, RM(3)".to_string(),
            4 => "r^4, cRM(4)".to_string(),
            _ => String::new(),
        };
        let proxies = split_list(get("proxies").unwrap_or(&default_proxies))
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<ProxyKind>>>()?;
        let losses = split_list(get("losses").unwrap_or("MSE, QLIKE"))
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<LossKind>>>()?;

        let cfg = Self {
            source,
            moment,
            models,
            proxies,
            losses,
            rolling: RollingConfig { window, refit_every },
            nloop: if observed { 1 } else { nloop },
            seed,
            hac,
        };
        if observed && nloop != 1 && map.contains_key("nloop") {
            return Err(Error::Config("nloop: observed data runs a single pass".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", i + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", i + 1)));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", i + 1)));
            }
        }
        Self::from_map(&map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_garch_study() {
        let cfg: ExperimentConfig = "".parse().unwrap();
        assert_eq!(cfg.rolling, RollingConfig { window: 500, refit_every: 10 });
        assert_eq!(cfg.nloop, 50);
        assert_eq!(cfg.models.len(), 5);
        assert_eq!(cfg.models[1], ModelEntry::Fitted(ModelSpec::garch()));
        assert_eq!(cfg.proxies, [ProxyKind::SquaredReturn, ProxyKind::RealizedVariance]);
        assert_eq!(cfg.losses, [LossKind::Mse, LossKind::Qlike]);
        assert_eq!(cfg.hac, HacVariant::CompromiseLag1);
        match cfg.source {
            DataSource::Simulated { days, innovation, .. } => {
                assert_eq!(days, 1500);
                assert_eq!(innovation.intraday_count, 100);
            }
            _ => panic!("expected a simulated source"),
        }
    }

    #[test]
    fn full_file() {
        let text = "
            # fourth moment under the apARCH process
            dgp = aparch4
            T = 1500
            m = 100
            moment = 4
            models = oracle, apARCH(1,1), apARCH(1), apARCH(2), apARCH(3)
            proxies = r^4, cRM(4)
            losses = MSE
            refit_every = 10
            nloop = 5
            seed = 7
            hac = bartlett
        ";
        let cfg: ExperimentConfig = text.parse().unwrap();
        assert_eq!(cfg.moment, 4);
        assert_eq!(cfg.models[1], ModelEntry::Fitted(ModelSpec::aparch4(1, true)));
        assert_eq!(cfg.proxies, [ProxyKind::QuarticReturn, ProxyKind::CorrectedFourth]);
        assert_eq!(cfg.hac, HacVariant::Bartlett);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn observed_source() {
        let text = "source = data\ndata = btc.csv\nwindow = 420\nrefit_every = 1\nmodels = GARCH(1,1), ARCH(1), ARCH(4), EGARCH(1,1), CGARCH(1,1)\n";
        let cfg: ExperimentConfig = text.parse().unwrap();
        assert_eq!(cfg.nloop, 1);
        assert!(matches!(cfg.models[0], ModelEntry::Fitted(s) if s.mean == MeanSpec::Constant));
        assert!("source = data\ndata = x.csv\nwindow = 100\nmodels = oracle, GARCH".parse::<ExperimentConfig>().is_err());
        assert!("source = data\nwindow = 100".parse::<ExperimentConfig>().is_err());
    }

    #[test]
    fn rejections() {
        for text in [
            "T = 400\nwindow = 400",
            "proxies = RV, cRM(4)",
            "moment = 3\nproxies = RV",
            "models = GARCH, GARCH(1,1)",
            "colour = blue",
            "T = 1500\nT = 1000",
            "just some words",
            "window = 20",
            "nloop = 0",
            "innovation = nig\nnig.alpha = 1\nnig.beta = 2",
        ] {
            assert!(text.parse::<ExperimentConfig>().is_err(), "{text}");
        }
    }

    #[test]
    fn list_splitting_respects_parentheses() {
        assert_eq!(split_list("GARCH(1,1), ARCH(2) ,oracle,"), ["GARCH(1,1)", "ARCH(2)", "oracle"]);
    }
}
