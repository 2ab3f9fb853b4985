use std::fs;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use proxy_eval::dm::{three_zone, Zone};
use proxy_eval::harness::*;
use proxy_eval::ingest::{to_daily, IngestConfig, PriceRecord};
use proxy_eval::losses::LossKind;
use proxy_eval::proxies::ProxyKind;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn quick(extra: &str) -> ExperimentConfig {
    quick_with("m = 20", extra)
}

fn quick_with(m: &str, extra: &str) -> ExperimentConfig {
    format!("T = 420\n{m}\nwindow = 320\nrefit_every = 25\nmodels = oracle, GARCH(1,1), ARCH(1), ARCH(2)\nseed = 99\n{extra}")
        .parse()
        .unwrap()
}

fn json(bundle: &ResultsBundle) -> Vec<u8> {
    let mut buf = Vec::new();
    bundle.write_json(&mut buf).unwrap();
    buf
}

#[test]
fn single_replication_is_bitwise_reproducible() {
    let cfg = quick("nloop = 1");
    assert_eq!(json(&run_experiment(&cfg).unwrap()), json(&run_experiment(&cfg).unwrap()));
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = quick("nloop = 4");
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| json(&run_experiment(&cfg).unwrap()))
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn averaging_ignores_replication_order() {
    let cfg = quick("nloop = 6");
    let mut records = run_replications(&cfg).unwrap();
    let reference = aggregate(&cfg, &records);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        records.shuffle(&mut rng);
        assert_eq!(serde_json::to_string(&aggregate(&cfg, &records)).unwrap(), serde_json::to_string(&reference).unwrap());
    }
}

#[test]
fn every_panel_is_antisymmetric() {
    let bundle = run_experiment(&quick("nloop = 3")).unwrap();
    let k = bundle.matrix.models.len();
    for panel in &bundle.matrix.panels {
        for i in 0..k {
            assert!(panel.cell(i, i).is_none());
            for j in 0..k {
                if i != j {
                    assert_eq!(panel.statistic(i, j).unwrap(), -panel.statistic(j, i).unwrap());
                }
            }
        }
    }
}

#[test]
fn single_intraday_sample_makes_proxies_identical() {
    let report = proxy_audit(&quick_with("m = 1", "nloop = 3\nproxies = RV")).unwrap();
    assert_eq!(report.entries.len(), 2 * 6);
    for e in &report.entries {
        assert_eq!(e.mean_diff_proxy, e.mean_diff_return_power);
        assert_eq!(e.mean_variance_ratio, 1.0);
        assert_eq!(e.variance_reduction_frequency, 0.0);
        assert!(e.within_3se);
    }
}

#[test]
fn observed_data_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut level: f64 = 10_000.0;
    let prices: Vec<PriceRecord> = (0..24 * 240 + 1)
        .map(|i| {
            let step: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            level *= (0.004 * step).exp();
            PriceRecord { timestamp: 1_600_000_000 - 1_600_000_000 % 86_400 + 3600 * i, close: level }
        })
        .collect();
    let daily = to_daily(&prices, &IngestConfig::default()).unwrap();
    assert_eq!(daily.len(), 240);
    daily.write_csv(fs::File::create(dir.path().join("daily.csv")).unwrap()).unwrap();
    let cfg_path = dir.path().join("exp.cfg");
    fs::write(&cfg_path, "source = data\ndata = daily.csv\nwindow = 200\nrefit_every = 20\nmodels = GARCH(1,1), ARCH(1)\n").unwrap();
    let cfg = ExperimentConfig::from_file(&cfg_path).unwrap();
    let bundle = run_experiment(&cfg).unwrap();
    assert_eq!(bundle.replications.len(), 1);
    let panel = bundle.matrix.panel(ProxyKind::RealizedVariance, LossKind::Qlike).unwrap();
    assert!(panel.statistic(0, 1).unwrap().is_finite());
    assert_eq!(bundle.replications[0].panels[0].pairs[0].dm.unwrap().n, 40);
}

fn synthetic_bundle(stats: &[[f64; 3]]) -> ResultsBundle {
    let config: ExperimentConfig = "models = GARCH(1,1), ARCH(1), ARCH(2)\nproxies = r^2\nlosses = QLIKE\nnloop = 1".parse().unwrap();
    let upper = |s: f64| Cell {
        statistic: Some(s),
        zone: Some(three_zone(s).zone()),
        valid: 1,
        red_frequency: three_zone(s).red.map(|b| b as u8 as f64),
        green_frequency: three_zone(s).green.map(|b| b as u8 as f64),
        mean_loss_diff: Some(s / 10.0),
    };
    let panels = stats
        .iter()
        .map(|s| {
            let mut cells = vec![vec![None; 3]; 3];
            for (q, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
                cells[i][j] = Some(upper(s[q]));
                cells[j][i] = Some(upper(-s[q]));
            }
            ZonePanel { proxy: config.proxies[0], loss: config.losses[0], cells }
        })
        .collect();
    ResultsBundle {
        matrix: ZoneMatrix { models: config.model_labels(), panels },
        config,
        replications: Vec::new(),
        warnings: Vec::new(),
    }
}

#[test]
fn svg_layout_matches_golden_file() {
    let bundle = synthetic_bundle(&[[5.589, 3.976, -1.4]]);
    let svg = render_matrix(&bundle, RenderFormat::Svg);
    let golden = data("matrix_golden.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &svg).unwrap();
    }
    assert_eq!(svg, fs::read_to_string(golden).unwrap());
}

#[test]
fn strong_cell_is_dark_red_against_the_column_model() {
    let bundle = synthetic_bundle(&[[5.589, 0.2, 0.1]]);
    let panel = &bundle.matrix.panels[0];
    assert_eq!(panel.cell(0, 1).unwrap().zone, Some(Zone::DarkRed));
    assert_eq!(panel.cell(1, 0).unwrap().zone, Some(Zone::DarkGreen));
    let text = render_matrix(&bundle, RenderFormat::Text);
    assert!(text.contains("5.589 R3"));
    assert!(text.contains("-5.589 G3"));
    let svg = render_matrix(&bundle, RenderFormat::Svg);
    assert!(svg.contains(r##"fill="#8e0000" stroke"##));
    let html = render_matrix(&bundle, RenderFormat::Html);
    assert!(html.contains("background:#8e0000;color:#ffffff\">5.589"));
}

#[test]
fn legend_is_emitted_for_all_yellow_bundles() {
    let bundle = synthetic_bundle(&[[0.788, 1.01, -0.3]]);
    for format in [RenderFormat::Text, RenderFormat::Svg, RenderFormat::Html] {
        let out = render_matrix(&bundle, format);
        assert!(out.contains("Legend"), "{format:?}");
        for z in ["G3", "G2", "G1", "Y", "R1", "R2", "R3"] {
            assert!(out.contains(z), "{format:?} lacks {z}");
        }
    }
}
