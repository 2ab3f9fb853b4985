use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::filter::{sigma_pow_from_variance, VarianceFilter};
use super::fit::{fit_qmle_with, FitOptions};
use super::spec::ModelSpec;
use crate::dgp::{IntradayPanel, InnovationMoments};
use crate::error::{Error, Result};

pub const ORACLE_LABEL: &str = "oracle";

/// `sigma^n E[eps^n]` from a variance forecast.
pub fn moment_forecast(sigma2: f64, n: u32, moments: &InnovationMoments) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("variance forecast {sigma2} must be positive")));
    }
    Ok(sigma_pow_from_variance(sigma2, n) * moments.get(n)?)
}

/// `E[(mu + sigma eps)^n]` by binomial expansion, with `sigma^k` supplied by
/// `sigma_pow`. Reduces to `sigma^n E[eps^n]` when `mu = 0`.
fn raw_moment(mu: f64, n: u32, moments: &InnovationMoments, sigma_pow: impl Fn(u32) -> f64) -> Result<f64> {
    if mu == 0.0 {
        return Ok(sigma_pow(n) * moments.get(n)?);
    }
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..=n {
        total += binom * mu.powi((n - k) as i32) * sigma_pow(k) * moments.get(k)?;
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    Ok(total)
}

/// Forecast of `E[r^n]` for a return `r = mu + sigma eps`.
pub fn raw_moment_forecast(mu: f64, sigma2: f64, n: u32, moments: &InnovationMoments) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("variance forecast {sigma2} must be positive")));
    }
    raw_moment(mu, n, moments, |k| sigma_pow_from_variance(sigma2, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window: usize,
    pub refit_every: usize,
}

impl RollingConfig {
    pub fn new(window: usize, refit_every: usize) -> Result<Self> {
        let cfg = Self { window, refit_every };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 50 {
            return Err(Error::InvalidParameter(format!("window {} below 50", self.window)));
        }
        if self.refit_every == 0 {
            return Err(Error::InvalidParameter("refit_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One-step-ahead forecasts of `E[r^n | past]`; `values[k]` targets day
/// `first_target + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub label: String,
    pub target_moment: u32,
    pub first_target: usize,
    pub values: Vec<f64>,
    /// Whether a refit was attempted before forecast `k`.
    pub refit: Vec<bool>,
    /// Refits whose result was rejected in favour of earlier parameters.
    pub fallbacks: usize,
}

impl ForecastSeries {
    pub fn new(label: impl Into<String>, target_moment: u32, first_target: usize, values: Vec<f64>) -> Result<Self> {
        let refit = vec![false; values.len()];
        let s = Self {
            label: label.into(),
            target_moment,
            first_target,
            values,
            refit,
            fallbacks: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.refit.len() != self.values.len() {
            return Err(Error::InvalidParameter("refit flags misaligned with values".into()));
        }
        let even = self.target_moment % 2 == 0;
        for (k, v) in self.values.iter().enumerate() {
            if !v.is_finite() || (even && *v <= 0.0) {
                return Err(Error::Domain(format!(
                    "{} forecast {k} of moment {} is {v}",
                    self.label, self.target_moment
                )));
            }
        }
        Ok(())
    }

    /// CSV with header `index,value,model,refit`; `index` is the target day.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "value", "model", "refit"])?;
        for (k, (v, r)) in self.values.iter().zip(&self.refit).enumerate() {
            w.write_record([
                (self.first_target + k).to_string(),
                v.to_string(),
                self.label.clone(),
                (*r as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, target_moment: u32) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["index", "value", "model", "refit"] {
            return Err(Error::Data {
                line: 1,
                message: format!("expected header index,value,model,refit, got {headers:?}"),
            });
        }
        let mut label = None;
        let mut first = 0;
        let mut values = Vec::new();
        let mut refit = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let bad = |message: String| Error::Data { line, message };
            let index: usize = record[0].parse().map_err(|e| bad(format!("index: {e}")))?;
            if values.is_empty() {
                first = index;
            } else if index != first + values.len() {
                return Err(bad(format!("index {index} out of sequence")));
            }
            values.push(record[1].parse().map_err(|e| bad(format!("value: {e}")))?);
            match label.get_or_insert_with(|| record[2].to_string()) {
                l if l == &record[2] => {}
                _ => return Err(bad("mixed model labels".into())),
            }
            refit.push(match &record[3] {
                "0" | "false" => false,
                "1" | "true" => true,
                other => return Err(bad(format!("refit flag '{other}'"))),
            });
        }
        let s = Self {
            label: label.unwrap_or_default(),
            target_moment,
            first_target: first,
            values,
            refit,
            fallbacks: 0,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Rolling one-step-ahead forecasts of `E[r^n]` over `series`.
///
/// Forecast `k` uses `series[k .. k + window]` and targets day `k + window`.
/// Parameters are refitted when `k % refit_every == 0` (warm-started from the
/// last accepted fit) and frozen in between, while the recursion keeps
/// absorbing each new return. A fit that fails to converge is replaced by
/// the last accepted parameters.
pub fn rolling_forecasts(
    spec: &ModelSpec,
    series: &[f64],
    cfg: &RollingConfig,
    n: u32,
    moments: &InnovationMoments,
) -> Result<ForecastSeries> {
    rolling_forecasts_with(spec, series, cfg, n, moments, &FitOptions::default())
}

pub fn rolling_forecasts_with(
    spec: &ModelSpec,
    series: &[f64],
    cfg: &RollingConfig,
    n: u32,
    moments: &InnovationMoments,
    opts: &FitOptions,
) -> Result<ForecastSeries> {
    cfg.validate()?;
    moments.get(n)?;
    let w = cfg.window;
    if series.len() <= w {
        return Err(Error::InsufficientData { needed: w + 1, got: series.len() });
    }
    let count = series.len() - w;
    let mut values = Vec::with_capacity(count);
    let mut refit = Vec::with_capacity(count);
    let mut fallbacks = 0;
    let mut accepted: Option<Vec<f64>> = None;
    let mut filter: Option<VarianceFilter> = None;

    for k in 0..count {
        let window = &series[k..k + w];
        if k % cfg.refit_every == 0 {
            let fit = fit_qmle_with(spec, window, accepted.as_deref(), opts)?;
            let params = if fit.converged {
                accepted = Some(fit.params.clone());
                fit.params
            } else {
                fallbacks += 1;
                log::debug!("{spec}: fit at forecast {k} did not converge, reusing previous parameters");
                accepted.clone().unwrap_or(fit.params)
            };
            let mut f = VarianceFilter::backcast(spec, &params, window)
                .or_else(|_| VarianceFilter::with_scale_state(spec, &params, f64::MIN_POSITIVE.sqrt()))?;
            f.run(window);
            filter = Some(f);
            refit.push(true);
        } else {
            let f = filter.as_mut().expect("filter set at k = 0");
            f.push_return(series[k + w - 1]);
            refit.push(false);
        }
        let f = filter.as_ref().expect("filter set at k = 0");
        values.push(raw_moment(f.mean(), n, moments, |j| f.sigma_pow(j))?);
    }

    let out = ForecastSeries {
        label: spec.to_string(),
        target_moment: n,
        first_target: w,
        values,
        refit,
        fallbacks,
    };
    out.validate()?;
    Ok(out)
}

/// Forecasts from the true scale path: `values[k] = sigma_{first_target + k}^n E[eps^n]`.
pub fn oracle_forecast(
    panel: &IntradayPanel,
    n: u32,
    moments: &InnovationMoments,
    first_target: usize,
) -> Result<ForecastSeries> {
    let sigma = panel
        .sigma_path()
        .ok_or_else(|| Error::Unsupported("oracle forecasts need a simulated panel".into()))?;
    if first_target >= sigma.len() {
        return Err(Error::InsufficientData { needed: first_target + 1, got: sigma.len() });
    }
    let e = moments.get(n)?;
    let values = sigma[first_target..].iter().map(|s| s.powi(n as i32) * e).collect();
    ForecastSeries::new(ORACLE_LABEL, n, first_target, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_forecast_examples() {
        let normal = InnovationMoments::standard_normal();
        assert_eq!(moment_forecast(0.37, 2, &normal).unwrap(), 0.37);
        assert_eq!(moment_forecast(2.0, 4, &normal).unwrap(), 12.0);
        let nig = InnovationMoments::new(vec![0.0, 1.0, 1.0, 17.0 / 3.0]);
        assert!((moment_forecast(1.44, 3, &nig).unwrap() - 1.728).abs() < 1e-14);
        assert!(matches!(moment_forecast(1.0, 5, &normal), Err(Error::Config(_))));
        assert!(moment_forecast(0.0, 2, &normal).is_err());
    }

    #[test]
    fn raw_moment_with_mean() {
        let normal = InnovationMoments::standard_normal();
        // E[(mu + s Z)^2] = mu^2 + s^2, E[(mu + s Z)^4] = mu^4 + 6 mu^2 s^2 + 3 s^4
        assert!((raw_moment_forecast(0.5, 2.0, 2, &normal).unwrap() - 2.25).abs() < 1e-15);
        let want = 0.0625 + 6.0 * 0.25 * 2.0 + 12.0;
        assert!((raw_moment_forecast(0.5, 2.0, 4, &normal).unwrap() - want).abs() < 1e-13);
        assert_eq!(raw_moment_forecast(0.0, 2.0, 4, &normal).unwrap(), 12.0);
    }

    #[test]
    fn rolling_config_bounds() {
        assert!(RollingConfig::new(49, 1).is_err());
        assert!(RollingConfig::new(50, 0).is_err());
        assert!(RollingConfig::new(50, 1).is_ok());
    }

    #[test]
    fn forecast_csv_round_trip() {
        let mut s = ForecastSeries::new("GARCH(1,1)", 2, 500, vec![0.25, 1.0 / 3.0, 2.5e-8]).unwrap();
        s.refit[0] = true;
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,value,model,refit\n500,0.25,\"GARCH(1,1)\",1\n"));
        assert_eq!(ForecastSeries::read_csv(buf.as_slice(), 2).unwrap(), s);
        assert!(ForecastSeries::new("x", 2, 0, vec![1.0, -1.0]).is_err());
        assert!(ForecastSeries::new("x", 3, 0, vec![1.0, -1.0]).is_ok());
    }
}
