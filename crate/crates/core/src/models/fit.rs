//! Gaussian quasi-maximum-likelihood fitting.

use serde::{Deserialize, Serialize};

use super::filter::{backcast_state, negative_qll};
use super::optim::{nelder_mead, NelderMeadOptions};
use super::spec::{Family, ModelSpec, GAUSSIAN_KURTOSIS};
use crate::error::{Error, Result};

/// Keeps starting points off the boundary of the constraint set.
const INTERIOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn named_params(&self) -> Vec<(String, f64)> {
        self.spec.param_names().into_iter().zip(self.params.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub optimizer: NelderMeadOptions,
    /// Simplex edge when warm-starting from a previous fit.
    pub warm_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: NelderMeadOptions::default(),
            warm_step: 0.1,
        }
    }
}

fn softmax_simplex(u: &[f64], scale: &[f64], out: &mut [f64]) {
    let top = u.iter().copied().fold(0.0, f64::max);
    let base = (-top).exp();
    let e: Vec<f64> = u.iter().map(|x| (x - top).exp()).collect();
    let denom = base + e.iter().sum::<f64>();
    for ((o, e), c) in out.iter_mut().zip(&e).zip(scale) {
        *o = e / denom / c;
    }
}

fn inverse_simplex(w: &[f64], scale: &[f64], out: &mut [f64]) {
    let s: Vec<f64> = w.iter().zip(scale).map(|(w, c)| (w * c).max(INTERIOR)).collect();
    let total: f64 = s.iter().sum();
    let slack = (1.0 - total).max(INTERIOR);
    let shrink = if total + slack > 1.0 { (1.0 - slack) / total } else { 1.0 };
    for (o, s) in out.iter_mut().zip(&s) {
        *o = (s * shrink / slack).ln();
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(INTERIOR, 1.0 - INTERIOR);
    (p / (1.0 - p)).ln()
}

/// Weights of the stationarity simplex of a family, or empty.
fn simplex_scale(spec: &ModelSpec) -> Vec<f64> {
    match spec.family {
        Family::Arch(p) => vec![1.0; p],
        Family::Garch11 | Family::Cgarch11 => vec![1.0; 2],
        Family::ApArch4 { arch, garch } => {
            let mut s = vec![GAUSSIAN_KURTOSIS; arch];
            if garch {
                s.push(1.0);
            }
            s
        }
        Family::Egarch11 => Vec::new(),
    }
}

/// Maps unconstrained coordinates to natural parameters.
pub(crate) fn to_natural(spec: &ModelSpec, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    let off = spec.mean_offset();
    if off == 1 {
        out[0] = u[0];
    }
    let (u, v) = (&u[off..], &mut out[off..]);
    match spec.family {
        Family::Arch(_) | Family::Garch11 | Family::ApArch4 { .. } => {
            v[0] = u[0].exp();
            softmax_simplex(&u[1..], &simplex_scale(spec), &mut v[1..]);
        }
        Family::Egarch11 => {
            v[..3].copy_from_slice(&u[..3]);
            v[3] = u[3].tanh();
        }
        Family::Cgarch11 => {
            v[0] = u[0].exp();
            softmax_simplex(&u[1..3], &[1.0, 1.0], &mut v[1..3]);
            v[3] = logistic(u[3]);
            v[4] = u[4].exp();
        }
    }
    out
}

pub(crate) fn to_unconstrained(spec: &ModelSpec, params: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; params.len()];
    let off = spec.mean_offset();
    if off == 1 {
        out[0] = params[0];
    }
    let (p, u) = (&params[off..], &mut out[off..]);
    match spec.family {
        Family::Arch(_) | Family::Garch11 | Family::ApArch4 { .. } => {
            u[0] = p[0].max(f64::MIN_POSITIVE).ln();
            inverse_simplex(&p[1..], &simplex_scale(spec), &mut u[1..]);
        }
        Family::Egarch11 => {
            u[..3].copy_from_slice(&p[..3]);
            u[3] = p[3].clamp(-1.0 + INTERIOR, 1.0 - INTERIOR).atanh();
        }
        Family::Cgarch11 => {
            u[0] = p[0].max(f64::MIN_POSITIVE).ln();
            inverse_simplex(&p[1..3], &[1.0, 1.0], &mut u[1..3]);
            u[3] = logit(p[3]);
            u[4] = p[4].max(INTERIOR).ln();
        }
    }
    out
}

/// Variance-targeting starting point.
pub fn starting_params(spec: &ModelSpec, returns: &[f64]) -> Vec<f64> {
    let n = returns.len().max(1) as f64;
    let mu = if spec.has_mean() { returns.iter().sum::<f64>() / n } else { 0.0 };
    let var = backcast_state(&ModelSpec::garch(), mu, returns).unwrap_or(1e-12);
    let mut out = Vec::with_capacity(spec.param_count());
    if spec.has_mean() {
        out.push(mu);
    }
    match spec.family {
        Family::Arch(p) => {
            let total = 0.3;
            out.push(var * (1.0 - total));
            out.extend(std::iter::repeat(total / p as f64).take(p));
        }
        Family::Garch11 => out.extend([var * 0.10, 0.05, 0.85]),
        Family::ApArch4 { arch, garch } => {
            let fourth = backcast_state(spec, mu, returns).unwrap_or(1e-24);
            let (alpha_total, beta) = if garch { (0.15, 0.75) } else { (0.3, 0.0) };
            out.push(fourth * (1.0 - alpha_total - beta));
            out.extend(std::iter::repeat(alpha_total / GAUSSIAN_KURTOSIS / arch as f64).take(arch));
            if garch {
                out.push(beta);
            }
        }
        Family::Egarch11 => {
            let beta = 0.9;
            out.extend([(1.0 - beta) * var.ln(), 0.1, 0.0, beta]);
        }
        Family::Cgarch11 => {
            let rho = 0.98;
            out.extend([var * (1.0 - rho), 0.05, 0.85, rho, 0.03]);
        }
    }
    out
}

fn loglik_from_nll(nll: f64, n: usize) -> f64 {
    -nll - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Fits `spec` from the variance-targeting start.
pub fn fit_qmle(spec: &ModelSpec, returns: &[f64]) -> Result<FitResult> {
    fit_qmle_with(spec, returns, None, &FitOptions::default())
}

/// Fits `spec`, optionally warm-started from `start` (natural parameters).
///
/// A degenerate window or an optimiser that stops without meeting its
/// tolerance yields `converged = false` rather than an error.
pub fn fit_qmle_with(
    spec: &ModelSpec,
    returns: &[f64],
    start: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    spec.validate()?;
    if returns.len() < spec.min_window() {
        return Err(Error::InsufficientData { needed: spec.min_window(), got: returns.len() });
    }
    if let Some(t) = returns.iter().position(|r| !r.is_finite()) {
        return Err(Error::Domain(format!("return {t} is not finite")));
    }
    let cold = starting_params(spec, returns);
    let mu0 = if spec.has_mean() { cold[0] } else { 0.0 };
    let degenerate =
        returns.iter().all(|r| *r == returns[0]) || backcast_state(spec, mu0, returns).is_err();
    if degenerate {
        let params = fallback_params(spec, cold);
        let nll = negative_qll(spec, &params, returns);
        return Ok(FitResult {
            spec: *spec,
            params,
            loglik: loglik_from_nll(nll, returns.len()),
            converged: false,
            iterations: 0,
        });
    }

    let (x0, step) = match start.filter(|s| spec.check_params(s).is_ok()) {
        Some(s) => (s.to_vec(), opts.warm_step),
        None => (cold, opts.optimizer.step),
    };
    let u0 = to_unconstrained(spec, &x0);
    let nm = NelderMeadOptions { step, ..opts.optimizer };
    let objective = |u: &[f64]| negative_qll(spec, &to_natural(spec, u), returns);
    let min = nelder_mead(objective, &u0, &nm);
    let params = to_natural(spec, &min.x);
    let ok = min.converged && min.f.is_finite() && spec.check_params(&params).is_ok();
    Ok(FitResult {
        spec: *spec,
        params,
        loglik: loglik_from_nll(min.f, returns.len()),
        converged: ok,
        iterations: min.iterations,
    })
}

/// A valid parameter vector for windows without usable variation.
fn fallback_params(spec: &ModelSpec, mut cold: Vec<f64>) -> Vec<f64> {
    let off = spec.mean_offset();
    match spec.family {
        Family::Egarch11 => {
            if !cold[off].is_finite() {
                cold[off] = (1.0 - cold[off + 3]) * 1e-12f64.ln();
            }
        }
        _ => {
            if !(cold[off] > 0.0) {
                cold[off] = 1e-12;
            }
        }
    }
    cold
}

/// Asymptotic standard errors from the inverse numerical Hessian of the
/// negative quasi-log-likelihood at `fit.params`. `None` when the Hessian is
/// not positive definite or a step leaves the parameter space.
pub fn standard_errors(fit: &FitResult, returns: &[f64]) -> Option<Vec<f64>> {
    let spec = &fit.spec;
    let theta = &fit.params;
    let k = theta.len();
    let h: Vec<f64> = theta.iter().map(|t| 1e-4 * t.abs().max(1e-2)).collect();
    let f = |x: &[f64]| negative_qll(spec, x, returns);
    let f0 = f(theta);
    let mut hess = vec![vec![0.0; k]; k];
    let mut x = theta.clone();
    for i in 0..k {
        for j in i..k {
            let mut eval = |di: f64, dj: f64| {
                x.copy_from_slice(theta);
                x[i] += di * h[i];
                x[j] += dj * h[j];
                f(&x)
            };
            let v = if i == j {
                (eval(1.0, 0.0) - 2.0 * f0 + eval(-1.0, 0.0)) / (h[i] * h[i])
            } else {
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                    / (4.0 * h[i] * h[j])
            };
            if !v.is_finite() {
                return None;
            }
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    let inv = invert(hess)?;
    (0..k)
        .map(|i| (inv[i][i] > 0.0).then(|| inv[i][i].sqrt()))
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for row in 0..n {
            if row != col {
                let factor = a[row][col];
                if factor != 0.0 {
                    for j in 0..n {
                        a[row][j] -= factor * a[col][j];
                        inv[row][j] -= factor * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}
