use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use proxy_eval::dgp::{ApArchParams, Dgp, GarchParams, InnovationMoments, InnovationSpec, IntradayPanel};
use proxy_eval::dm::{HacVariant, LossDiffSeries};
use proxy_eval::harness::{audit_bundle, render_matrix, run_experiment, ExperimentConfig, RenderFormat, ResultsBundle};
use proxy_eval::ingest::{parse_prices, read_daily_csv, to_daily, GapPolicy, IngestConfig};
use proxy_eval::losses::LossKind;
use proxy_eval::models::{oracle_forecast, rolling_forecasts, ForecastSeries, ModelSpec, RollingConfig, ORACLE_LABEL};
use proxy_eval::proxies::{ProxyKind, ProxySeries};
use proxy_eval::{Error, Result};

#[derive(Parser)]
#[command(name = "proxy-eval", version, about = "Comparative volatility backtests with high-frequency proxies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Process {
    Garch,
    Aparch4,
}

#[derive(Clone, Copy, ValueEnum)]
enum Innovation {
    Normal,
    Nig,
}

#[derive(clap::Args)]
struct InnovationArgs {
    #[arg(long, value_enum, default_value = "normal")]
    innovation: Innovation,
    #[arg(long, default_value_t = 2.0)]
    nig_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    nig_beta: f64,
}

impl InnovationArgs {
    fn spec(&self, m: usize) -> Result<InnovationSpec> {
        match self.innovation {
            Innovation::Normal => InnovationSpec::normal(m),
            Innovation::Nig => InnovationSpec::nig(self.nig_alpha, self.nig_beta, m),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an intraday panel and write it as CSV.
    Simulate {
        #[arg(long, value_enum, default_value = "garch")]
        dgp: Process,
        /// Three comma-separated parameters (defaults depend on the process).
        #[arg(long, value_delimiter = ',', num_args = 3)]
        params: Option<Vec<f64>>,
        #[arg(long, short = 'T', default_value_t = 1500)]
        days: usize,
        #[arg(long, short, default_value_t = 100)]
        m: usize,
        #[command(flatten)]
        innovation: InnovationArgs,
        #[arg(long, default_value_t = 500)]
        burnin: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Panel CSV destination; standard output when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Proxies to write next to the panel (repeatable), e.g. RV or cRM(4).
        #[arg(long = "proxy")]
        proxies: Vec<String>,
        /// Directory for proxy CSVs, one `<name>.csv` per proxy.
        #[arg(long, default_value = ".")]
        proxy_dir: PathBuf,
    },
    /// Rolling one-step-ahead forecasts of one model.
    Forecast {
        /// Panel CSV from `simulate`.
        #[arg(long, conflicts_with = "daily", required_unless_present = "daily")]
        panel: Option<PathBuf>,
        /// Daily CSV from `ingest`.
        #[arg(long)]
        daily: Option<PathBuf>,
        /// Model label such as GARCH(1,1), ARCH(7), EGARCH(1,1)+mu or oracle.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 2)]
        moment: u32,
        #[arg(long)]
        window: usize,
        #[arg(long, default_value_t = 10)]
        refit_every: usize,
        #[command(flatten)]
        innovation: InnovationArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Diebold-Mariano test of two forecast CSVs against a proxy CSV.
    Dm {
        #[arg(long)]
        forecast_1: PathBuf,
        #[arg(long)]
        forecast_2: PathBuf,
        #[arg(long)]
        proxy: PathBuf,
        #[arg(long, default_value = "RV")]
        proxy_kind: String,
        #[arg(long, default_value = "QLIKE")]
        loss: String,
        /// lag0, lag1, h<N> or bartlett.
        #[arg(long, default_value = "lag1")]
        hac: String,
    },
    /// Run an experiment from a key = value configuration file.
    Backtest {
        #[arg(long, short)]
        config: PathBuf,
        /// Results bundle (JSON) destination.
        #[arg(long, short)]
        out: PathBuf,
        /// Also print the matrices in this format.
        #[arg(long)]
        render: Option<String>,
        /// Write the proxy audit (needs the raw return power among the proxies).
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Render a results bundle.
    Render {
        #[arg(long, short)]
        bundle: PathBuf,
        #[arg(long, short, default_value = "text")]
        format: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Aggregate hourly prices to daily returns and 24-hour realized variance.
    Ingest {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value = "drop")]
        gap_policy: String,
        /// Day boundary in seconds after UTC midnight.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        boundary_offset_secs: i64,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn json_line<T: serde::Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn simulate(
    dgp: Process,
    params: Option<Vec<f64>>,
    days: usize,
    innov: InnovationSpec,
    burnin: usize,
    seed: u64,
) -> Result<IntradayPanel> {
    let dgp = match (dgp, params.as_deref()) {
        (Process::Garch, None) => Dgp::Garch(GarchParams::new(0.02, 0.08, 0.85)?),
        (Process::Garch, Some([a, b, c])) => Dgp::Garch(GarchParams::new(*a, *b, *c)?),
        (Process::Aparch4, None) => Dgp::Aparch4(ApArchParams::new(0.02, 0.08, 0.75)?),
        (Process::Aparch4, Some([a, b, c])) => Dgp::Aparch4(ApArchParams::new(*a, *b, *c)?),
        _ => return Err(Error::Config("--params takes three numbers".into())),
    };
    dgp.simulate(&innov, days, burnin, seed)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { dgp, params, days, m, innovation, burnin, seed, out, proxies, proxy_dir } => {
            let kinds = proxies.iter().map(|p| p.parse()).collect::<Result<Vec<ProxyKind>>>()?;
            let panel = simulate(dgp, params, days, innovation.spec(m)?, burnin, seed)?;
            panel.write_csv(output(out.as_deref())?)?;
            for kind in kinds {
                let path = proxy_dir.join(format!("{}.csv", kind.name()));
                kind.compute(&panel).write_csv(create(&path)?)?;
                log::info!("wrote {}", path.display());
            }
        }
        Command::Forecast { panel, daily, model, moment, window, refit_every, innovation, out } => {
            let cfg = RollingConfig::new(window, refit_every)?;
            let moments: InnovationMoments = match innovation.innovation {
                Innovation::Normal => InnovationMoments::standard_normal(),
                Innovation::Nig => innovation.spec(1)?.daily_moments(),
            };
            let series = match (&panel, &daily) {
                (Some(p), _) => {
                    let panel = IntradayPanel::read_csv(open(p)?)?;
                    if model.trim().eq_ignore_ascii_case(ORACLE_LABEL) {
                        oracle_forecast(&panel, moment, &moments, window)?
                    } else {
                        let spec: ModelSpec = model.parse()?;
                        rolling_forecasts(&spec, panel.daily_returns(), &cfg, moment, &moments)?
                    }
                }
                (None, Some(d)) => {
                    let records = read_daily_csv(open(d)?)?;
                    let returns: Vec<f64> = records.iter().map(|r| r.daily_return).collect();
                    let spec: ModelSpec = model.parse()?;
                    rolling_forecasts(&spec, &returns, &cfg, moment, &moments)?
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            if series.fallbacks > 0 {
                log::warn!("{}: {} refits reused earlier parameters", series.label, series.fallbacks);
            }
            series.write_csv(output(out.as_deref())?)?;
        }
        Command::Dm { forecast_1, forecast_2, proxy, proxy_kind, loss, hac } => {
            let kind: ProxyKind = proxy_kind.parse()?;
            let loss: LossKind = loss.parse()?;
            let hac: HacVariant = hac.parse()?;
            let n = kind.target_moment();
            let f1 = ForecastSeries::read_csv(open(&forecast_1)?, n)?;
            let f2 = ForecastSeries::read_csv(open(&forecast_2)?, n)?;
            if f1.first_target != f2.first_target || f1.len() != f2.len() {
                return Err(Error::Data {
                    line: 0,
                    message: "the two forecast files cover different days".into(),
                });
            }
            let v = ProxySeries::read_csv(kind, open(&proxy)?)?;
            let end = f1.first_target + f1.len();
            if v.len() < end {
                return Err(Error::InsufficientData { needed: end, got: v.len() });
            }
            let spec = loss.spec(n);
            let d = f1
                .values
                .iter()
                .zip(&f2.values)
                .zip(&v.values[f1.first_target..end])
                .map(|((x1, x2), v)| Ok(spec.loss_diff_affine(*x1, *x2)?.eval(*v)))
                .collect::<Result<Vec<f64>>>()?;
            let record = LossDiffSeries::new(d, f1.label, f2.label, kind.short_label(), loss.label())?.test(hac)?;
            json_line(&record, &mut io::stdout().lock())?;
        }
        Command::Backtest { config, out, render, audit } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let format: Option<RenderFormat> = render.map(|f| f.parse()).transpose()?;
            let bundle = run_experiment(&cfg)?;
            let mut w = create(&out)?;
            bundle.write_json(&mut w)?;
            w.flush()?;
            if let Some(path) = audit {
                json_line(&audit_bundle(&bundle)?, &mut create(&path)?)?;
            }
            if let Some(format) = format {
                print!("{}", render_matrix(&bundle, format));
            }
        }
        Command::Render { bundle, format, out } => {
            let format: RenderFormat = format.parse()?;
            let bundle = ResultsBundle::read_json(open(&bundle)?)?;
            output(out.as_deref())?.write_all(render_matrix(&bundle, format).as_bytes())?;
        }
        Command::Ingest { input, output: out, gap_policy, boundary_offset_secs } => {
            let cfg = IngestConfig { gap_policy: gap_policy.parse::<GapPolicy>()?, boundary_offset_secs };
            let prices = parse_prices(open(&input)?)?;
            let series = to_daily(&prices, &cfg)?;
            let mut w = create(&out)?;
            series.write_csv(&mut w)?;
            w.flush()?;
            eprintln!(
                "{} hourly prices, {} calendar days, {} rows written, {} incomplete days dropped",
                prices.len(),
                series.days_covered,
                series.len(),
                series.dropped.len()
            );
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Unsupported(_) => 2,
        Error::Data { .. } | Error::Domain(_) | Error::InsufficientData { .. } | Error::Degenerate(_) => 3,
        Error::Io(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
