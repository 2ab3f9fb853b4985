#![allow(dead_code)]

use proxy_eval::dm::HacVariant;

/// Exact integer route for `d_t = k_t / 10`. With `e_t = n k_t - sum k` and
/// `G_j = sum_t e_t e_{t-j}`, the statistic is `n sum(k) / sqrt(G)` where `G`
/// is the integer long-run combination of the `G_j`.
pub fn integer_oracle(k: &[i64], variant: HacVariant) -> f64 {
    let n = k.len() as i64;
    let total: i64 = k.iter().sum();
    let e: Vec<i128> = k.iter().map(|v| (n * v - total) as i128).collect();
    let g = |j: usize| -> i128 { (j..e.len()).map(|t| e[t] * e[t - j]).sum() };
    let g0 = g(0) as f64;
    let combined = match variant {
        HacVariant::Lag0 => g0,
        HacVariant::CompromiseLag1 => (g(0) + 2 * g(1)) as f64,
        HacVariant::HStep(h) => (g(0) + 2 * (1..h).map(g).sum::<i128>()) as f64,
        HacVariant::Bartlett => {
            let mut big_j = 0usize;
            while ((big_j + 1) as i64).pow(4) <= n {
                big_j += 1;
            }
            g0 + (1..=big_j).map(|j| 2.0 * (1.0 - j as f64 / big_j as f64) * g(j) as f64).sum::<f64>()
        }
    };
    let denom = if combined <= 1e-12 * g0 { g0 } else { combined };
    (n * total) as f64 / denom.sqrt()
}

pub fn tenths(k: &[i64]) -> Vec<f64> {
    k.iter().map(|v| *v as f64 / 10.0).collect()
}
