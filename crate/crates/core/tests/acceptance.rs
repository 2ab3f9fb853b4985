//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use proxy_eval::dgp::{simulate_aparch4, simulate_garch, ApArchParams, GarchParams, InnovationSpec};
use proxy_eval::dm::{dm_statistic, HacVariant, Zone, LEVELS};
use proxy_eval::harness::{audit_bundle, run_experiment, ExperimentConfig, ResultsBundle};
use proxy_eval::ingest::{parse_prices, to_daily, GapPolicy, IngestConfig};
use proxy_eval::losses::LossKind;
use proxy_eval::proxies::ProxyKind;

mod common;

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, title, pass, detail }
}

fn moments(sum: &[f64; 5]) -> (f64, f64, f64, f64) {
    // sum[k] = sum x^k; returns mean, variance, skewness, kurtosis
    let n = sum[0];
    let m1 = sum[1] / n;
    let (r2, r3, r4) = (sum[2] / n, sum[3] / n, sum[4] / n);
    let c2 = r2 - m1 * m1;
    let c3 = r3 - 3.0 * m1 * r2 + 2.0 * m1.powi(3);
    let c4 = r4 - 4.0 * m1 * r3 + 6.0 * m1 * m1 * r2 - 3.0 * m1.powi(4);
    (m1, c2, c3 / c2.powf(1.5), c4 / (c2 * c2))
}

fn accumulate(sum: &mut [f64; 5], x: f64) {
    let x2 = x * x;
    sum[0] += 1.0;
    sum[1] += x;
    sum[2] += x2;
    sum[3] += x2 * x;
    sum[4] += x2 * x2;
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
}

fn garch_study() -> ResultsBundle {
    let cfg: ExperimentConfig = "
        dgp = garch
        dgp.params = 0.02, 0.08, 0.85
        T = 1500
        m = 100
        innovation = normal
        window = 500
        refit_every = 10
        nloop = 50
        models = oracle, GARCH(1,1), ARCH(1), ARCH(2), ARCH(7)
        proxies = r^2, RV
        losses = MSE, QLIKE
        seed = 20240501
    "
    .parse()
    .expect("study configuration");
    run_experiment(&cfg).expect("GARCH study")
}

fn criterion_1(bundle: &ResultsBundle) -> Outcome {
    let report = audit_bundle(bundle).unwrap();
    let worst = report
        .entries
        .iter()
        .map(|e| ((e.mean_diff_return_power - e.mean_diff_proxy).abs() / e.combined_se, e))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    outcome(
        1,
        "proxy validity: mean loss differences agree under r^2 and RV",
        report.all_within_3se() && report.entries.len() == 20,
        format!(
            "{} pair/loss cells, largest gap {:.2} combined SE ({} vs {}, {})",
            report.entries.len(),
            worst.0,
            worst.1.model_1,
            worst.1.model_2,
            worst.1.loss
        ),
    )
}

fn criterion_2(bundle: &ResultsBundle) -> Outcome {
    let report = audit_bundle(bundle).unwrap();
    let freq = report.min_variance_reduction_frequency();

    // fixed sigma = 1: Var(RV) / Var(r^2) = (2/m) / 2
    let m = 100;
    let draws = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let sd = (1.0 / m as f64).sqrt();
    let mut rv = Vec::with_capacity(draws);
    let mut r2 = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..m {
            let z: f64 = StandardNormal.sample(&mut rng);
            let p = sd * z;
            sum += p;
            sq += p * p;
        }
        rv.push(sq);
        r2.push(sum * sum);
    }
    let ratio = mean_var(&rv).1 / mean_var(&r2).1;
    let target = 1.0 / m as f64;
    let ratio_ok = (ratio - target).abs() <= 0.2 * target;
    outcome(
        2,
        "variance reduction: Var(loss diff) smaller under RV",
        freq >= 0.95 && ratio_ok,
        format!("min share of replications with smaller variance {freq:.2}; fixed-scale Var(RV)/Var(r^2) = {ratio:.5} (1/m = {target})"),
    )
}

fn statistic(bundle: &ResultsBundle, proxy: ProxyKind, loss: LossKind, row: &str, col: &str) -> f64 {
    let m = &bundle.matrix;
    m.panel(proxy, loss)
        .unwrap()
        .statistic(m.model_index(row).unwrap(), m.model_index(col).unwrap())
        .unwrap()
}

fn zone(bundle: &ResultsBundle, proxy: ProxyKind, loss: LossKind, row: &str, col: &str) -> Zone {
    let m = &bundle.matrix;
    m.panel(proxy, loss)
        .unwrap()
        .cell(m.model_index(row).unwrap(), m.model_index(col).unwrap())
        .unwrap()
        .zone
        .unwrap()
}

const ARCHES: [&str; 3] = ["ARCH(1)", "ARCH(2)", "ARCH(7)"];

fn criterion_3(bundle: &ResultsBundle) -> Outcome {
    let threshold = 2.326;
    let oracle: Vec<f64> = ARCHES
        .iter()
        .map(|a| statistic(bundle, ProxyKind::RealizedVariance, LossKind::Qlike, "oracle", a))
        .collect();
    let dark = oracle.iter().all(|s| *s > threshold)
        && ARCHES
            .iter()
            .all(|a| zone(bundle, ProxyKind::RealizedVariance, LossKind::Qlike, "oracle", a) == Zone::DarkRed);
    let mse: Vec<(f64, Zone)> = ARCHES
        .iter()
        .map(|a| {
            (
                statistic(bundle, ProxyKind::SquaredReturn, LossKind::Mse, "GARCH(1,1)", a),
                zone(bundle, ProxyKind::SquaredReturn, LossKind::Mse, "GARCH(1,1)", a),
            )
        })
        .collect();
    let yellow = mse.iter().filter(|(_, z)| *z == Zone::Yellow).count();
    outcome(
        3,
        "three-zone picture: oracle dark red under QLIKE+RV, GARCH mostly yellow under MSE+r^2",
        dark && 2 * yellow > mse.len(),
        format!(
            "oracle vs ARCH(1,2,7) QLIKE+RV: {:.3} {:.3} {:.3}; GARCH vs ARCH MSE+r^2: {}",
            oracle[0],
            oracle[1],
            oracle[2],
            mse.iter().map(|(s, z)| format!("{s:.3} {}", z.tag())).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_4(bundle: &ResultsBundle) -> Outcome {
    let s = |p, l| statistic(bundle, p, l, "oracle", "ARCH(1)").abs();
    let qrv = s(ProxyKind::RealizedVariance, LossKind::Qlike);
    let mrv = s(ProxyKind::RealizedVariance, LossKind::Mse);
    let qr2 = s(ProxyKind::SquaredReturn, LossKind::Qlike);
    outcome(
        4,
        "power ordering for oracle vs ARCH(1)",
        qrv > mrv && qrv > qr2,
        format!("|S| QLIKE+RV {qrv:.3}, MSE+RV {mrv:.3}, QLIKE+r^2 {qr2:.3}"),
    )
}

fn criterion_5() -> Outcome {
    let params = ApArchParams::new(0.02, 0.08, 0.75).unwrap();
    let innov = InnovationSpec::normal(100).unwrap();
    let panel = simulate_aparch4(&params, &innov, 200_000, 500, 6).unwrap();
    let (_, var) = mean_var(panel.daily_returns());
    let target = 2f64.sqrt();
    let sigma4 = panel.sigma_path().unwrap().iter().map(|s| s.powi(4)).sum::<f64>() / panel.days() as f64;
    outcome(
        5,
        "apARCH calibration: unconditional variance near sqrt(2)",
        (var - target).abs() <= 0.05 * target,
        format!("sample variance {var:.4} vs {target:.5}; mean sigma^4 {sigma4:.4} (model value {:.4})", params.unconditional_fourth(3.0)),
    )
}

fn criterion_6() -> Outcome {
    let innov = InnovationSpec::nig(2.0, 1.0, 100).unwrap();
    let sampler = innov.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut pieces = vec![0.0; 100];
    let (mut daily, mut intraday) = ([0.0; 5], [0.0; 5]);
    for _ in 0..1_000_000 {
        sampler.fill(&mut rng, &mut pieces);
        let mut sum = 0.0;
        for p in &pieces {
            accumulate(&mut intraday, *p);
            sum += p;
        }
        accumulate(&mut daily, sum);
    }
    let (_, _, skew, kurt) = moments(&daily);
    let (_, _, piece_skew, piece_kurt) = moments(&intraday);
    let piece = innov.piece_nig().unwrap();
    let daily_ok = (skew - 1.0).abs() <= 0.05 && (kurt - 17.0 / 3.0).abs() <= 0.15;
    let within = |x: f64, t: f64| (x - t).abs() <= 0.05 * t;
    let intraday_ok = within(piece_skew, 10.0)
        && within(piece_kurt, 269.8)
        && within(piece.skewness(), 10.0)
        && within(piece.kurtosis(), 269.8);
    outcome(
        6,
        "NIG recipe moments",
        daily_ok && intraday_ok,
        format!(
            "daily skewness {skew:.4}, kurtosis {kurt:.4}; intraday skewness {piece_skew:.3} (exact {:.3}), kurtosis {piece_kurt:.2} (exact {:.3})",
            piece.skewness(),
            piece.kurtosis()
        ),
    )
}

fn criterion_7() -> Outcome {
    let garch = GarchParams::new(0.02, 0.08, 0.85).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for (innov, seed) in [(InnovationSpec::nig(2.0, 1.0, 100).unwrap(), 71), (InnovationSpec::normal(100).unwrap(), 72)] {
        let panel = simulate_garch(&garch, &innov, 100_000, 500, seed).unwrap();
        let sigma = panel.sigma_path().unwrap();
        let eps = innov.daily_moments();
        for kind in [ProxyKind::RealizedThird, ProxyKind::CorrectedFourth] {
            let n = kind.target_moment();
            let scaled: Vec<f64> =
                kind.compute(&panel).values.iter().zip(sigma).map(|(v, s)| v / s.powi(n as i32)).collect();
            let (m, v) = mean_var(&scaled);
            let se = (v / scaled.len() as f64).sqrt();
            let want = eps.get(n).unwrap();
            let ok = (m - want).abs() <= 3.0 * se;
            pass &= ok;
            let name = if innov.piece_nig().is_some() { "NIG" } else { "normal" };
            lines.push(format!("{name} {}: {m:.4} vs {want:.4} ({:.2} SE)", kind.short_label(), (m - want).abs() / se));
        }
    }
    outcome(7, "RM(3) and cRM(4) unbiased for the scaled moments", pass, lines.join("; "))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let reps = 2000;
    let mut rej = [0usize; 3];
    for _ in 0..reps {
        let d: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = dm_statistic(&d, HacVariant::default()).unwrap();
        for i in 0..3 {
            rej[i] += r.verdict.red[i] as usize;
        }
    }
    let rates = rej.map(|c| c as f64 / reps as f64);
    let size_ok = rates.iter().zip(LEVELS).all(|(r, eta)| (r - eta).abs() <= 0.015);

    let variants = [HacVariant::Lag0, HacVariant::CompromiseLag1, HacVariant::HStep(3), HacVariant::Bartlett];
    let len = Uniform::new(30usize, 300).unwrap();
    let value = Uniform::new(-10.0f64, 10.0).unwrap();
    let scale = Uniform::new(-3.0f64, 3.0).unwrap();
    let (mut anti_fail, mut scale_fail) = (0, 0);
    for i in 0..10_000 {
        let d: Vec<f64> = (0..len.sample(&mut rng)).map(|_| value.sample(&mut rng)).collect();
        let variant = variants[i % variants.len()];
        let base = dm_statistic(&d, variant).unwrap();
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        let flipped = dm_statistic(&neg, variant).unwrap();
        if flipped.statistic != -base.statistic || flipped.verdict.red != base.verdict.green {
            anti_fail += 1;
        }
        let mut c = 10f64.powf(scale.sample(&mut rng));
        if i % 2 == 1 {
            c = -c;
        }
        let scaled: Vec<f64> = d.iter().map(|x| c * x).collect();
        let s = dm_statistic(&scaled, variant).unwrap().statistic;
        if (s - c.signum() * base.statistic).abs() > 1e-9 * (1.0 + base.statistic.abs()) {
            scale_fail += 1;
        }
    }
    outcome(
        8,
        "DM size, antisymmetry and scale invariance",
        size_ok && anti_fail == 0 && scale_fail == 0,
        format!(
            "rejection rates {:.4} {:.4} {:.4} at 0.10 0.05 0.01; antisymmetry failures {anti_fail}, scale failures {scale_fail} of 10000",
            rates[0], rates[1], rates[2]
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let pos = Uniform::new(1e-3f64, 10.0).unwrap();
    let mut worst = 0.0f64;
    for kind in [LossKind::Mse, LossKind::Qlike] {
        let spec = kind.spec(2);
        for _ in 0..10_000 {
            let (x1, x2, v) = (pos.sample(&mut rng), pos.sample(&mut rng), pos.sample(&mut rng));
            let direct = spec.loss_difference(x1, x2, v).unwrap();
            let affine = spec.loss_diff_affine(x1, x2).unwrap().eval(v);
            worst = worst.max((direct - affine).abs() / (1.0 + direct.abs()));
        }
    }
    let k: Vec<i64> = [2, 1, 3, 2, 2].repeat(6);
    let s = dm_statistic(&common::tenths(&k), HacVariant::CompromiseLag1).unwrap().statistic;
    let oracle = common::integer_oracle(&k, HacVariant::CompromiseLag1);
    let hand_gap = (s - oracle).abs();
    outcome(
        9,
        "affine loss-difference form and hand-computed DM value",
        worst <= 1e-12 && hand_gap <= 1e-10,
        format!("largest relative affine gap {worst:.2e}; hand series S = {s:.12} vs oracle {oracle:.12}"),
    )
}

fn criterion_10() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let prices = parse_prices(fs::File::open(dir.join("prices_72h.csv")).unwrap()).unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for (policy, golden, rows) in [(GapPolicy::Scale, "daily_72h_scale.csv", 3), (GapPolicy::Drop, "daily_72h_drop.csv", 2)] {
        let series = to_daily(&prices, &IngestConfig { gap_policy: policy, ..Default::default() }).unwrap();
        let mut out = Vec::new();
        series.write_csv(&mut out).unwrap();
        let same = out == fs::read(dir.join(golden)).unwrap();
        pass &= same && series.len() == rows;
        details.push(format!("{golden}: {}", if same { "identical" } else { "differs" }));
    }
    outcome(10, "ingest golden files under both gap policies", pass, details.join(", "))
}

fn main() {
    let mut results = Vec::new();
    let start = Instant::now();
    let bundle = garch_study();
    let study_secs = start.elapsed().as_secs_f64();
    eprintln!("GARCH study (50 replications) finished in {study_secs:.1} s");
    results.push(criterion_1(&bundle));
    results.push(criterion_2(&bundle));
    results.push(criterion_3(&bundle));
    results.push(criterion_4(&bundle));
    results.push(criterion_5());
    results.push(criterion_6());
    results.push(criterion_7());
    results.push(criterion_8());
    results.push(criterion_9());
    results.push(criterion_10());

    for r in &results {
        println!("{} [{}] {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.title, r.detail);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
