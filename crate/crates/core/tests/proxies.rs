use proxy_eval::dgp::{simulate_garch, GarchParams, InnovationSpec, IntradayPanel};
use proxy_eval::proxies::ProxyKind;

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    (x.iter().sum::<f64>() / n, (variance(x) / n).sqrt())
}

fn panel(innov: &InnovationSpec, days: usize, seed: u64) -> IntradayPanel {
    simulate_garch(&GarchParams::new(0.02, 0.08, 0.85).unwrap(), innov, days, 100, seed).unwrap()
}

#[test]
fn moment_proxies_are_conditionally_unbiased() {
    for innov in [InnovationSpec::normal(20).unwrap(), InnovationSpec::nig(2.0, 1.0, 20).unwrap()] {
        let p = panel(&innov, 40_000, 8);
        let sigma = p.sigma_path().unwrap();
        let moments = innov.daily_moments();
        for kind in [ProxyKind::RealizedVariance, ProxyKind::RealizedThird, ProxyKind::CorrectedFourth] {
            let n = kind.target_moment();
            let values = kind.compute(&p).values;
            let scaled: Vec<f64> = values.iter().zip(sigma).map(|(v, s)| v / s.powi(n as i32)).collect();
            let (m, se) = mean_and_se(&scaled);
            let want = moments.get(n).unwrap();
            assert!((m - want).abs() <= 3.0 * se, "{kind} under {:?}: {m} vs {want} (se {se})", innov.kind);
        }
    }
}

#[test]
fn proxies_are_less_noisy_than_return_powers_at_fixed_scale() {
    // zero persistence keeps sigma fixed at sqrt(a0)
    let fixed = GarchParams::new(1.0, 0.0, 0.0).unwrap();
    for m in [2usize, 5, 50] {
        let innov = InnovationSpec::normal(m).unwrap();
        let p = simulate_garch(&fixed, &innov, 50_000, 0, m as u64).unwrap();
        for kind in [
            ProxyKind::RealizedVariance,
            ProxyKind::RealizedThird,
            ProxyKind::CorrectedFourth,
            ProxyKind::AdjustedLogRange,
        ] {
            let base = ProxyKind::return_power(kind.target_moment()).unwrap();
            let (vp, vb) = (variance(&kind.compute(&p).values), variance(&base.compute(&p).values));
            assert!(vp <= vb, "m = {m}, {kind}: {vp} vs {vb}");
        }
    }
}
