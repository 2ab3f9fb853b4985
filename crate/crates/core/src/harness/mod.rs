//! End-to-end experiments: simulate or load data, forecast with every model,
//! test every model pair under every (proxy, loss) panel and average the
//! statistics over replications.
//!
//! Matrix orientation: the row model is the benchmark and the column model
//! the compared forecast. Cell `[row][col]` holds the statistic for
//! `d_t = L(x_col, v_t) - L(x_row, v_t)`, so a positive (red) value means the
//! column forecast is worse than the row forecast.

pub mod config;
pub mod render;

use std::collections::BTreeMap;
use std::fs::File;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{InnovationMoments, IntradayPanel};
use crate::dm::{dm_statistic, three_zone, DmResult, Zone, LEVELS};
use crate::error::{Error, Result};
use crate::ingest::read_daily_csv;
use crate::losses::LossKind;
use crate::models::{oracle_forecast, rolling_forecasts, ForecastSeries};
use crate::proxies::{ProxyKind, ProxySeries};
use crate::rng::replication_seed;

pub use config::{DataSource, ExperimentConfig, ModelEntry};
pub use render::{render_matrix, RenderFormat};

/// One model pair in one replication; `row < col`, `d = L(col) - L(row)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub row: usize,
    pub col: usize,
    /// Sample mean and variance (divisor `n - 1`) of the loss differences.
    pub mean_diff: Option<f64>,
    pub var_diff: Option<f64>,
    pub dm: Option<DmResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelOutcome {
    pub proxy: ProxyKind,
    pub loss: LossKind,
    pub pairs: Vec<PairOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    /// Refits that fell back to earlier parameters, per model.
    pub fallbacks: Vec<usize>,
    /// Forecasting failures, per model.
    pub model_errors: Vec<Option<String>>,
    pub panels: Vec<PanelOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Mean statistic over the replications where the test was available.
    pub statistic: Option<f64>,
    pub zone: Option<Zone>,
    pub valid: usize,
    /// Share of valid replications rejecting towards red / green at each level in [`LEVELS`].
    pub red_frequency: [f64; 3],
    pub green_frequency: [f64; 3],
    pub mean_loss_diff: Option<f64>,
}

impl Cell {
    fn mirrored(&self) -> Self {
        let statistic = self.statistic.map(|s| -s);
        Self {
            statistic,
            zone: statistic.map(|s| three_zone(s).zone()),
            valid: self.valid,
            red_frequency: self.green_frequency,
            green_frequency: self.red_frequency,
            mean_loss_diff: self.mean_loss_diff.map(|d| -d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePanel {
    pub proxy: ProxyKind,
    pub loss: LossKind,
    /// `cells[row][col]`, `None` on the diagonal.
    pub cells: Vec<Vec<Option<Cell>>>,
}

impl ZonePanel {
    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.cells.get(row)?.get(col)?.as_ref()
    }

    pub fn statistic(&self, row: usize, col: usize) -> Option<f64> {
        self.cell(row, col)?.statistic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneMatrix {
    pub models: Vec<String>,
    pub panels: Vec<ZonePanel>,
}

impl ZoneMatrix {
    pub fn panel(&self, proxy: ProxyKind, loss: LossKind) -> Option<&ZonePanel> {
        self.panels.iter().find(|p| p.proxy == proxy && p.loss == loss)
    }

    pub fn model_index(&self, label: &str) -> Option<usize> {
        self.models.iter().position(|m| m == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub config: ExperimentConfig,
    pub matrix: ZoneMatrix,
    pub replications: Vec<ReplicationRecord>,
    pub warnings: Vec<String>,
}

impl ResultsBundle {
    pub fn write_json<W: std::io::Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read_json<R: std::io::Read>(input: R) -> Result<Self> {
        serde_json::from_reader(input).map_err(|e| Error::Data { line: e.line() as u64, message: e.to_string() })
    }
}

/// Everything one replication evaluates against.
struct ReplicationData {
    returns: Vec<f64>,
    proxies: Vec<ProxySeries>,
    panel: Option<IntradayPanel>,
    moments: InnovationMoments,
}

fn load_observed(cfg: &ExperimentConfig) -> Result<Option<ReplicationData>> {
    let DataSource::Observed { path } = &cfg.source else {
        return Ok(None);
    };
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let records = read_daily_csv(file)?;
    let returns: Vec<f64> = records.iter().map(|r| r.daily_return).collect();
    let proxies = cfg
        .proxies
        .iter()
        .map(|&kind| {
            let values = match kind {
                ProxyKind::SquaredReturn => returns.iter().map(|r| r * r).collect(),
                ProxyKind::RealizedVariance => records.iter().map(|r| r.rv24).collect(),
                other => unreachable!("{other:?} rejected by validation"),
            };
            ProxySeries { kind, values }
        })
        .collect();
    Ok(Some(ReplicationData {
        returns,
        proxies,
        panel: None,
        moments: InnovationMoments::standard_normal(),
    }))
}

fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicationData> {
    let DataSource::Simulated { dgp, innovation, days, burnin } = &cfg.source else {
        unreachable!("observed data is loaded once");
    };
    let panel = dgp.simulate(innovation, *days, *burnin, seed)?;
    Ok(ReplicationData {
        returns: panel.daily_returns().to_vec(),
        proxies: cfg.proxies.iter().map(|p| p.compute(&panel)).collect(),
        moments: innovation.daily_moments(),
        panel: Some(panel),
    })
}

fn forecast(cfg: &ExperimentConfig, model: &ModelEntry, data: &ReplicationData) -> Result<ForecastSeries> {
    match model {
        ModelEntry::Oracle => {
            let panel = data
                .panel
                .as_ref()
                .ok_or_else(|| Error::Unsupported("oracle needs a simulated panel".into()))?;
            oracle_forecast(panel, cfg.moment, &data.moments, cfg.rolling.window)
        }
        ModelEntry::Fitted(spec) => rolling_forecasts(spec, &data.returns, &cfg.rolling, cfg.moment, &data.moments),
    }
}

fn mean_and_variance(d: &[f64]) -> (f64, f64) {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = if d.len() > 1 {
        d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        f64::NAN
    };
    (mean, var)
}

fn loss_differences(loss: LossKind, moment: u32, row: &[f64], col: &[f64], proxy: &[f64]) -> Result<Vec<f64>> {
    let spec = loss.spec(moment);
    row.iter()
        .zip(col)
        .zip(proxy)
        .map(|((&xr, &xc), &v)| Ok(spec.loss_diff_affine(xc, xr)?.eval(v)))
        .collect()
}

fn evaluate(cfg: &ExperimentConfig, index: usize, seed: u64, data: &ReplicationData) -> ReplicationRecord {
    let forecasts: Vec<Result<ForecastSeries>> = cfg.models.iter().map(|m| forecast(cfg, m, data)).collect();
    let w = cfg.rolling.window;
    let k = cfg.models.len();
    let mut panels = Vec::with_capacity(cfg.proxies.len() * cfg.losses.len());
    for proxy in &data.proxies {
        let target = &proxy.values[w..];
        for &loss in &cfg.losses {
            let mut pairs = Vec::new();
            for row in 0..k {
                for col in row + 1..k {
                    let outcome = match (&forecasts[row], &forecasts[col]) {
                        (Ok(fr), Ok(fc)) => loss_differences(loss, cfg.moment, &fr.values, &fc.values, target),
                        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                    };
                    pairs.push(match outcome {
                        Ok(d) => {
                            let (mean, var) = mean_and_variance(&d);
                            let (mean_diff, var_diff) = (Some(mean).filter(|m| m.is_finite()), Some(var).filter(|v| v.is_finite()));
                            let (dm, error) = match dm_statistic(&d, cfg.hac) {
                                Ok(r) => (Some(r), None),
                                Err(e) => (None, Some(e.to_string())),
                            };
                            PairOutcome { row, col, mean_diff, var_diff, dm, error }
                        }
                        Err(e) => PairOutcome {
                            row,
                            col,
                            mean_diff: None,
                            var_diff: None,
                            dm: None,
                            error: Some(e.to_string()),
                        },
                    });
                }
            }
            panels.push(PanelOutcome { proxy: proxy.kind, loss, pairs });
        }
    }
    ReplicationRecord {
        index,
        seed,
        fallbacks: forecasts.iter().map(|f| f.as_ref().map_or(0, |f| f.fallbacks)).collect(),
        model_errors: forecasts.iter().map(|f| f.as_ref().err().map(ToString::to_string)).collect(),
        panels,
    }
}

/// Runs every replication; the result is ordered by replication index.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<Vec<ReplicationRecord>> {
    cfg.validate()?;
    let observed = load_observed(cfg)?;
    if let Some(data) = &observed {
        if data.returns.len() <= cfg.rolling.window {
            return Err(Error::InsufficientData { needed: cfg.rolling.window + 1, got: data.returns.len() });
        }
    }
    (0..cfg.nloop)
        .into_par_iter()
        .map(|index| {
            let seed = replication_seed(cfg.seed, index as u64);
            let record = match &observed {
                Some(data) => evaluate(cfg, index, seed, data),
                None => evaluate(cfg, index, seed, &simulate(cfg, seed)?),
            };
            log::debug!("replication {index} done");
            Ok(record)
        })
        .collect()
}

/// Averages replication records into a zone matrix. Records are summed in
/// index order, whatever order they are passed in.
pub fn aggregate(cfg: &ExperimentConfig, records: &[ReplicationRecord]) -> ZoneMatrix {
    let mut sorted: Vec<&ReplicationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.index);
    let k = cfg.models.len();
    let mut panels = Vec::new();
    for (pi, proxy) in cfg.proxies.iter().enumerate() {
        for (li, &loss) in cfg.losses.iter().enumerate() {
            let slot = pi * cfg.losses.len() + li;
            let mut cells: Vec<Vec<Option<Cell>>> = vec![vec![None; k]; k];
            let mut pair_index = 0;
            for row in 0..k {
                for col in row + 1..k {
                    let results: Vec<&DmResult> = sorted
                        .iter()
                        .filter_map(|r| r.panels[slot].pairs[pair_index].dm.as_ref())
                        .collect();
                    let cell = summarize(&results);
                    cells[col][row] = Some(cell.mirrored());
                    cells[row][col] = Some(cell);
                    pair_index += 1;
                }
            }
            panels.push(ZonePanel { proxy: *proxy, loss, cells });
        }
    }
    ZoneMatrix { models: cfg.model_labels(), panels }
}

fn summarize(results: &[&DmResult]) -> Cell {
    let valid = results.len();
    if valid == 0 {
        return Cell {
            statistic: None,
            zone: None,
            valid,
            red_frequency: [0.0; 3],
            green_frequency: [0.0; 3],
            mean_loss_diff: None,
        };
    }
    let n = valid as f64;
    let statistic = results.iter().map(|r| r.statistic).sum::<f64>() / n;
    let mut red = [0.0; 3];
    let mut green = [0.0; 3];
    for r in results {
        for i in 0..LEVELS.len() {
            red[i] += r.verdict.red[i] as u8 as f64;
            green[i] += r.verdict.green[i] as u8 as f64;
        }
    }
    Cell {
        statistic: Some(statistic),
        zone: Some(three_zone(statistic).zone()),
        valid,
        red_frequency: red.map(|c| c / n),
        green_frequency: green.map(|c| c / n),
        mean_loss_diff: Some(results.iter().map(|r| r.mean_diff).sum::<f64>() / n),
    }
}

fn collect_warnings(cfg: &ExperimentConfig, records: &[ReplicationRecord]) -> Vec<String> {
    let labels = cfg.model_labels();
    let mut warnings = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let fallbacks: usize = records.iter().map(|r| r.fallbacks[i]).sum();
        if fallbacks > 0 {
            warnings.push(format!("{label}: {fallbacks} refits reused earlier parameters"));
        }
        let failed = records.iter().filter(|r| r.model_errors[i].is_some()).count();
        if failed > 0 {
            warnings.push(format!("{label}: forecasting failed in {failed} replications"));
        }
    }
    let mut pair_errors: BTreeMap<String, usize> = BTreeMap::new();
    let mut hac_fallbacks = 0;
    for r in records {
        for p in &r.panels {
            for pair in &p.pairs {
                let models_ok = r.model_errors[pair.row].is_none() && r.model_errors[pair.col].is_none();
                if pair.error.is_some() && models_ok {
                    let key = format!("{} / {}: {} vs {}", p.proxy.short_label(), p.loss, labels[pair.row], labels[pair.col]);
                    *pair_errors.entry(key).or_default() += 1;
                }
                hac_fallbacks += pair.dm.is_some_and(|d| d.fallback) as usize;
            }
        }
    }
    for (key, count) in pair_errors {
        warnings.push(format!("{key}: test unavailable in {count} replications"));
    }
    if hac_fallbacks > 0 {
        warnings.push(format!("{hac_fallbacks} tests used the lag-0 variance after a non-positive long-run estimate"));
    }
    warnings
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsBundle> {
    let replications = run_replications(cfg)?;
    let matrix = aggregate(cfg, &replications);
    let warnings = collect_warnings(cfg, &replications);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ResultsBundle { config: cfg.clone(), matrix, replications, warnings })
}

/// Comparison of a proxy against the raw return power for one model pair and loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub loss: LossKind,
    pub proxy: ProxyKind,
    pub model_1: String,
    pub model_2: String,
    pub replications: usize,
    /// Mean over replications of the average loss difference `L(model_2) - L(model_1)`.
    pub mean_diff_return_power: f64,
    pub mean_diff_proxy: f64,
    /// `sqrt(se_1^2 + se_2^2)` from the two across-replication standard errors.
    pub combined_se: f64,
    pub within_3se: bool,
    /// Share of replications where the loss differences have smaller variance under the proxy.
    pub variance_reduction_frequency: f64,
    pub mean_variance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn all_within_3se(&self) -> bool {
        self.entries.iter().all(|e| e.within_3se)
    }

    pub fn min_variance_reduction_frequency(&self) -> f64 {
        self.entries.iter().map(|e| e.variance_reduction_frequency).fold(f64::INFINITY, f64::min)
    }

    pub fn find(&self, loss: LossKind, proxy: ProxyKind, model_1: &str, model_2: &str) -> Option<&AuditEntry> {
        self.entries
            .iter()
            .find(|e| e.loss == loss && e.proxy == proxy && e.model_1 == model_1 && e.model_2 == model_2)
    }
}

fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let (mean, var) = mean_and_variance(x);
    (mean, (var / x.len() as f64).sqrt())
}

/// Runs `cfg` with the raw return power added as a proxy (when missing) and
/// audits every other proxy against it.
pub fn proxy_audit(cfg: &ExperimentConfig) -> Result<AuditReport> {
    if !cfg.source.is_simulated() {
        return Err(Error::Unsupported("the audit needs simulated data".into()));
    }
    let base = ProxyKind::return_power(cfg.moment)?;
    let mut cfg = cfg.clone();
    if !cfg.proxies.contains(&base) {
        cfg.proxies.insert(0, base);
    }
    let bundle = run_experiment(&cfg)?;
    audit_bundle(&bundle)
}

/// The audit computed from an existing bundle, which must contain the raw return power proxy.
pub fn audit_bundle(bundle: &ResultsBundle) -> Result<AuditReport> {
    let cfg = &bundle.config;
    let base = ProxyKind::return_power(cfg.moment)?;
    let nl = cfg.losses.len();
    let base_index = cfg
        .proxies
        .iter()
        .position(|p| *p == base)
        .ok_or_else(|| Error::Config(format!("bundle lacks the {} proxy", base.short_label())))?;
    let labels = cfg.model_labels();
    let mut entries = Vec::new();
    for (pi, &proxy) in cfg.proxies.iter().enumerate() {
        if proxy == base {
            continue;
        }
        for (li, &loss) in cfg.losses.iter().enumerate() {
            let npairs = bundle.replications.first().map_or(0, |r| r.panels[pi * nl + li].pairs.len());
            for q in 0..npairs {
                let mut base_means = Vec::new();
                let mut proxy_means = Vec::new();
                let mut reductions = 0usize;
                let mut ratio_sum = 0.0;
                for r in &bundle.replications {
                    let b = &r.panels[base_index * nl + li].pairs[q];
                    let p = &r.panels[pi * nl + li].pairs[q];
                    let (Some(bm), Some(pm), Some(bv), Some(pv)) = (b.mean_diff, p.mean_diff, b.var_diff, p.var_diff) else {
                        continue;
                    };
                    base_means.push(bm);
                    proxy_means.push(pm);
                    reductions += (pv < bv) as usize;
                    ratio_sum += pv / bv;
                }
                let pair = &bundle.replications[0].panels[pi * nl + li].pairs[q];
                let count = base_means.len();
                let (mb, sb) = mean_and_se(&base_means);
                let (mp, sp) = mean_and_se(&proxy_means);
                let combined_se = (sb * sb + sp * sp).sqrt();
                entries.push(AuditEntry {
                    loss,
                    proxy,
                    model_1: labels[pair.row].clone(),
                    model_2: labels[pair.col].clone(),
                    replications: count,
                    mean_diff_return_power: mb,
                    mean_diff_proxy: mp,
                    combined_se,
                    within_3se: (mb - mp).abs() <= 3.0 * combined_se,
                    variance_reduction_frequency: reductions as f64 / count as f64,
                    mean_variance_ratio: ratio_sum / count as f64,
                });
            }
        }
    }
    Ok(AuditReport { entries })
}
