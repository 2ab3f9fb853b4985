//! Conditional-variance recursions for every supported family.

use super::spec::{Family, ModelSpec, GAUSSIAN_KURTOSIS, MEAN_ABS_NORMAL};
use crate::error::{Error, Result};

const LN_VARIANCE_BOUND: f64 = 700.0;

/// Ring buffer of the most recent lagged terms, newest at `head`.
#[derive(Debug, Clone, PartialEq)]
struct Lags {
    values: Vec<f64>,
    head: usize,
}

impl Lags {
    fn filled(p: usize, v: f64) -> Self {
        Self { values: vec![v; p], head: 0 }
    }

    fn push(&mut self, v: f64) {
        let p = self.values.len();
        self.head = (self.head + p - 1) % p;
        self.values[self.head] = v;
    }

    fn dot(&self, coef: &[f64]) -> f64 {
        let p = self.values.len();
        coef.iter()
            .enumerate()
            .map(|(i, c)| c * self.values[(self.head + i) % p])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    Arch { a0: f64, a: Vec<f64>, lags: Lags, next: f64 },
    Garch { a0: f64, a1: f64, b: f64, next: f64 },
    ApArch { omega: f64, alpha: Vec<f64>, beta: f64, lags: Lags, next4: f64 },
    Egarch { omega: f64, alpha: f64, gamma: f64, beta: f64, ln_next: f64 },
    Cgarch { omega: f64, alpha: f64, beta: f64, rho: f64, phi: f64, next: f64, q: f64 },
}

/// A recursion positioned just before the next period: `sigma2()` is the
/// one-step-ahead conditional variance, `push_return` feeds an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceFilter {
    mu: f64,
    state: State,
}

impl VarianceFilter {
    /// Starts the recursion from a scale state: `sigma^4` for apARCH models,
    /// `sigma^2` otherwise. Lagged squared (fourth-power) residuals are set to
    /// their conditional expectation under that state.
    pub fn with_scale_state(spec: &ModelSpec, params: &[f64], state: f64) -> Result<Self> {
        spec.check_params(params)?;
        if !(state > 0.0 && state.is_finite()) {
            return Err(Error::Domain(format!("scale state {state} must be positive")));
        }
        let off = spec.mean_offset();
        let mu = if off == 1 { params[0] } else { 0.0 };
        let v = &params[off..];
        let state = match spec.family {
            Family::Arch(p) => {
                let a = v[1..].to_vec();
                let lags = Lags::filled(p, state);
                let next = v[0] + lags.dot(&a);
                State::Arch { a0: v[0], a, lags, next }
            }
            Family::Garch11 => State::Garch { a0: v[0], a1: v[1], b: v[2], next: state },
            Family::ApArch4 { arch, garch } => {
                let alpha = v[1..=arch].to_vec();
                let beta = if garch { v[1 + arch] } else { 0.0 };
                let lags = Lags::filled(arch, GAUSSIAN_KURTOSIS * state);
                let next4 = if garch { state } else { v[0] + lags.dot(&alpha) };
                State::ApArch { omega: v[0], alpha, beta, lags, next4 }
            }
            Family::Egarch11 => State::Egarch {
                omega: v[0],
                alpha: v[1],
                gamma: v[2],
                beta: v[3],
                ln_next: state.ln(),
            },
            Family::Cgarch11 => State::Cgarch {
                omega: v[0],
                alpha: v[1],
                beta: v[2],
                rho: v[3],
                phi: v[4],
                next: state,
                q: state,
            },
        };
        Ok(Self { mu, state })
    }

    /// Backcast start: the scale state matches the sample second (fourth)
    /// moment of the residuals in `returns`.
    pub fn backcast(spec: &ModelSpec, params: &[f64], returns: &[f64]) -> Result<Self> {
        spec.check_params(params)?;
        let mu = if spec.has_mean() { params[0] } else { 0.0 };
        let state = backcast_state(spec, mu, returns)?;
        Self::with_scale_state(spec, params, state)
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    /// One-step-ahead conditional variance.
    pub fn sigma2(&self) -> f64 {
        match &self.state {
            State::Arch { next, .. } | State::Garch { next, .. } | State::Cgarch { next, .. } => {
                *next
            }
            State::ApArch { next4, .. } => next4.sqrt(),
            State::Egarch { ln_next, .. } => ln_next.exp(),
        }
    }

    /// One-step-ahead `sigma^n`; apARCH models use their `sigma^4` directly.
    pub fn sigma_pow(&self, n: u32) -> f64 {
        match &self.state {
            State::ApArch { next4, .. } => match n {
                4 => *next4,
                8 => next4 * next4,
                _ => next4.powf(n as f64 / 4.0),
            },
            _ => sigma_pow_from_variance(self.sigma2(), n),
        }
    }

    /// Advances by one observed return.
    pub fn push_return(&mut self, r: f64) {
        let e = r - self.mu;
        let e2 = e * e;
        match &mut self.state {
            State::Arch { a0, a, lags, next } => {
                lags.push(e2);
                *next = *a0 + lags.dot(a);
            }
            State::Garch { a0, a1, b, next } => {
                *next = *a0 + *a1 * e2 + *b * *next;
            }
            State::ApArch { omega, alpha, beta, lags, next4 } => {
                lags.push(e2 * e2);
                *next4 = *omega + lags.dot(alpha) + *beta * *next4;
            }
            State::Egarch { omega, alpha, gamma, beta, ln_next } => {
                let z = e / (0.5 * *ln_next).exp();
                let ln = *omega + *alpha * (z.abs() - MEAN_ABS_NORMAL) + *gamma * z + *beta * *ln_next;
                // keep exp(ln) a positive finite double
                *ln_next = ln.clamp(-LN_VARIANCE_BOUND, LN_VARIANCE_BOUND);
            }
            State::Cgarch { omega, alpha, beta, rho, phi, next, q } => {
                let q_new = *omega + *rho * *q + *phi * (e2 - *next);
                let s_new = q_new + *alpha * (e2 - *q) + *beta * (*next - *q);
                *q = q_new;
                *next = s_new;
            }
        }
    }

    /// Feeds every return of `returns` in order.
    pub fn run(&mut self, returns: &[f64]) {
        for &r in returns {
            self.push_return(r);
        }
    }
}

pub(crate) fn sigma_pow_from_variance(sigma2: f64, n: u32) -> f64 {
    if n % 2 == 0 {
        sigma2.powi((n / 2) as i32)
    } else {
        sigma2.sqrt().powi(n as i32)
    }
}

pub(crate) fn backcast_state(spec: &ModelSpec, mu: f64, returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let n = returns.len() as f64;
    let state = match spec.family {
        Family::ApArch4 { .. } => {
            returns.iter().map(|r| (r - mu).powi(4)).sum::<f64>() / n / GAUSSIAN_KURTOSIS
        }
        _ => returns.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / n,
    };
    if state > 0.0 && state.is_finite() {
        Ok(state)
    } else {
        Err(Error::Degenerate("residuals have zero dispersion".into()))
    }
}

/// Gaussian negative quasi-log-likelihood, without the `ln(2 pi)` constant:
/// `0.5 sum (ln sigma^2_t + e_t^2 / sigma^2_t)`. Returns `+inf` on invalid
/// parameters or a nonpositive variance.
pub fn negative_qll(spec: &ModelSpec, params: &[f64], returns: &[f64]) -> f64 {
    let mut filter = match VarianceFilter::backcast(spec, params, returns) {
        Ok(f) => f,
        Err(_) => return f64::INFINITY,
    };
    let mu = filter.mean();
    let mut total = 0.0;
    for &r in returns {
        let s2 = filter.sigma2();
        if !(s2 > 0.0 && s2.is_finite()) {
            return f64::INFINITY;
        }
        let e = r - mu;
        total += s2.ln() + e * e / s2;
        filter.push_return(r);
    }
    0.5 * total
}

/// One-step-ahead variance after filtering `history` from a backcast start.
pub fn one_step_sigma2(spec: &ModelSpec, params: &[f64], history: &[f64]) -> Result<f64> {
    if history.len() < spec.max_lag() {
        return Err(Error::InsufficientData { needed: spec.max_lag(), got: history.len() });
    }
    let mut filter = VarianceFilter::backcast(spec, params, history)?;
    filter.run(history);
    let s2 = filter.sigma2();
    if s2 > 0.0 && s2.is_finite() {
        Ok(s2)
    } else {
        Err(Error::Domain(format!("variance forecast {s2} is not positive")))
    }
}
