//! Data-generating processes with intraday decomposition.
//!
//! The conditional scale `sigma_t` is constant within a day, intraday returns
//! are `r_{t,i} = sigma_t eps_{t,i}` and the daily return is their sum.

mod innovations;
mod panel;

pub use innovations::{
    nig_intraday_params, sample_inverse_gaussian, InnovationKind, InnovationMoments,
    InnovationSpec, IntradayScaling, NigParams, PieceSampler,
};
pub use panel::{ordered_sum, IntradayPanel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::DayStreams;

pub const DEFAULT_BURNIN: usize = 500;

/// `sigma_t^2 = a0 + a1 r_{t-1}^2 + b sigma_{t-1}^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub a0: f64,
    pub a1: f64,
    pub b: f64,
}

impl GarchParams {
    pub fn new(a0: f64, a1: f64, b: f64) -> Result<Self> {
        let p = Self { a0, a1, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0) || !(self.a1 >= 0.0) || !(self.b >= 0.0) || !(self.a1 + self.b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "GARCH(1,1) needs a0 > 0, a1, b >= 0 and a1 + b < 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.a0 / (1.0 - self.a1 - self.b)
    }

    #[inline]
    pub fn next_variance(&self, r_prev: f64, var_prev: f64) -> f64 {
        self.a0 + self.a1 * r_prev * r_prev + self.b * var_prev
    }
}

/// Power ARCH with exponent 4: `sigma_t^4 = omega + alpha r_{t-1}^4 + beta sigma_{t-1}^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApArchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ApArchParams {
    pub const POWER: u32 = 4;

    pub fn new(omega: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(omega > 0.0) || !(alpha >= 0.0) || !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "apARCH needs omega > 0 and alpha, beta >= 0, got ({omega}, {alpha}, {beta})"
            )));
        }
        Ok(Self { omega, alpha, beta })
    }

    /// `1 - E[eps^4] alpha - beta > 0`.
    pub fn validate(&self, fourth_moment: f64) -> Result<()> {
        if !(self.persistence(fourth_moment) < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "apARCH needs 1 - E[eps^4] alpha - beta > 0, got {}",
                1.0 - self.persistence(fourth_moment)
            )));
        }
        Ok(())
    }

    pub fn persistence(&self, fourth_moment: f64) -> f64 {
        fourth_moment * self.alpha + self.beta
    }

    /// `E[sigma^4] = omega / (1 - E[eps^4] alpha - beta)`.
    pub fn unconditional_fourth(&self, fourth_moment: f64) -> f64 {
        self.omega / (1.0 - self.persistence(fourth_moment))
    }

    /// `(E[sigma^4])^{1/2}`, the power-4 analogue of the unconditional variance.
    pub fn power_variance(&self, fourth_moment: f64) -> f64 {
        self.unconditional_fourth(fourth_moment).sqrt()
    }

    #[inline]
    pub fn next_fourth(&self, r_prev: f64, fourth_prev: f64) -> f64 {
        let r2 = r_prev * r_prev;
        self.omega + self.alpha * r2 * r2 + self.beta * fourth_prev
    }
}

/// Process selector used by configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "lowercase")]
pub enum Dgp {
    Garch(GarchParams),
    Aparch4(ApArchParams),
}

impl Dgp {
    pub fn simulate(
        &self,
        innov: &InnovationSpec,
        days: usize,
        burnin: usize,
        seed: u64,
    ) -> Result<IntradayPanel> {
        match self {
            Dgp::Garch(p) => simulate_garch(p, innov, days, burnin, seed),
            Dgp::Aparch4(p) => simulate_aparch4(p, innov, days, burnin, seed),
        }
    }
}

/// Shared day loop; `state` is whatever the recursion carries.
fn simulate_days(
    innov: &InnovationSpec,
    days: usize,
    burnin: usize,
    seed: u64,
    mut state: f64,
    sigma_of: impl Fn(f64) -> f64,
    update: impl Fn(f64, f64) -> f64,
) -> Result<IntradayPanel> {
    innov.validate()?;
    if days == 0 {
        return Err(Error::InvalidParameter("panel needs at least one day".into()));
    }
    let m = innov.intraday_count;
    let sampler = innov.sampler();
    let streams = DayStreams::new(seed);
    let mut pieces = vec![0.0; m];
    let mut intraday = Vec::with_capacity(days * m);
    let mut sigma = Vec::with_capacity(days);
    for t in 0..burnin + days {
        let s = sigma_of(state);
        let mut rng = streams.day(t as u64);
        sampler.fill(&mut rng, &mut pieces);
        for p in pieces.iter_mut() {
            *p *= s;
        }
        let r = ordered_sum(&pieces);
        if t >= burnin {
            intraday.extend_from_slice(&pieces);
            sigma.push(s);
        }
        state = update(r, state);
    }
    IntradayPanel::from_intraday(m, intraday, Some(sigma))
}

/// GARCH(1,1) started at the unconditional variance; `burnin` days are discarded.
pub fn simulate_garch(
    params: &GarchParams,
    innov: &InnovationSpec,
    days: usize,
    burnin: usize,
    seed: u64,
) -> Result<IntradayPanel> {
    params.validate()?;
    let p = *params;
    simulate_days(
        innov,
        days,
        burnin,
        seed,
        p.unconditional_variance(),
        f64::sqrt,
        move |r, var| p.next_variance(r, var),
    )
}

/// Power-4 apARCH started at `E[sigma^4]`; stationarity is checked against the
/// fourth moment of the configured daily innovation.
pub fn simulate_aparch4(
    params: &ApArchParams,
    innov: &InnovationSpec,
    days: usize,
    burnin: usize,
    seed: u64,
) -> Result<IntradayPanel> {
    let m4 = innov.daily_moments().get(4)?;
    params.validate(m4)?;
    let p = *params;
    simulate_days(
        innov,
        days,
        burnin,
        seed,
        p.unconditional_fourth(m4),
        |q| q.sqrt().sqrt(),
        move |r, q| p.next_fourth(r, q),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calibrated_garch() -> GarchParams {
        GarchParams::new(0.02, 0.08, 0.85).unwrap()
    }

    #[test]
    fn garch_validation() {
        assert!(GarchParams::new(0.0, 0.1, 0.8).is_err());
        assert!(GarchParams::new(0.1, 0.2, 0.8).is_err());
        assert!(GarchParams::new(0.1, -0.1, 0.8).is_err());
        assert!((calibrated_garch().unconditional_variance() - 0.02 / 0.07).abs() < 1e-15);
    }

    #[test]
    fn aparch_validation() {
        let p = ApArchParams::new(0.02, 0.08, 0.75).unwrap();
        assert!(p.validate(3.0).is_ok());
        assert!((p.unconditional_fourth(3.0) - 2.0).abs() < 1e-12);
        assert!((p.power_variance(3.0) - 2f64.sqrt()).abs() < 1e-12);
        assert!(ApArchParams::new(0.02, 0.1, 0.75).unwrap().validate(3.0).is_err());
        let err = simulate_aparch4(
            &ApArchParams::new(0.02, 0.1, 0.75).unwrap(),
            &InnovationSpec::normal(4).unwrap(),
            10,
            0,
            1,
        );
        assert!(err.is_err());
    }

    #[test]
    fn intraday_sum_identity_and_recursion_replay() {
        let p = calibrated_garch();
        let innov = InnovationSpec::nig(2.0, 1.0, 13).unwrap();
        let panel = simulate_garch(&p, &innov, 300, 50, 17).unwrap();
        let sigma = panel.sigma_path().unwrap();
        for t in 0..panel.days() {
            assert_eq!(panel.daily_returns()[t], ordered_sum(panel.intraday(t)));
        }
        for t in 1..panel.days() {
            let r = panel.daily_returns()[t - 1];
            let replay = p.next_variance(r, sigma[t - 1] * sigma[t - 1]).sqrt();
            assert!((replay - sigma[t]).abs() <= 4.0 * f64::EPSILON * sigma[t]);
        }
    }

    #[test]
    fn aparch_recursion_replay() {
        let p = ApArchParams::new(0.02, 0.08, 0.75).unwrap();
        let panel = simulate_aparch4(&p, &InnovationSpec::normal(10).unwrap(), 200, 20, 3).unwrap();
        let sigma = panel.sigma_path().unwrap();
        for t in 1..panel.days() {
            let q = p.next_fourth(panel.daily_returns()[t - 1], sigma[t - 1].powi(4));
            assert!((q.sqrt().sqrt() - sigma[t]).abs() <= 1e-13 * sigma[t]);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let p = ApArchParams::new(0.02, 0.08, 0.75).unwrap();
        let innov = InnovationSpec::normal(5).unwrap();
        let a = simulate_aparch4(&p, &innov, 100, 10, 99).unwrap();
        let b = simulate_aparch4(&p, &innov, 100, 10, 99).unwrap();
        let c = simulate_aparch4(&p, &innov, 100, 10, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn burnin_prefix_is_shared() {
        // day streams are keyed by absolute day index
        let innov = InnovationSpec::normal(2).unwrap();
        let long = simulate_garch(&calibrated_garch(), &innov, 30, 0, 5).unwrap();
        let short = simulate_garch(&calibrated_garch(), &innov, 20, 10, 5).unwrap();
        assert_eq!(long.intraday(10), short.intraday(0));
    }

    #[test]
    fn degenerate_garch_is_iid() {
        let p = GarchParams::new(0.5, 0.0, 0.0).unwrap();
        let panel = simulate_garch(&p, &InnovationSpec::normal(1).unwrap(), 100_000, 0, 8).unwrap();
        assert!(panel.sigma_path().unwrap().iter().all(|s| *s == 0.5f64.sqrt()));
        let r = panel.daily_returns();
        let var = r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64;
        // SE of the second moment is sqrt(2/n) * a0
        assert!((var - 0.5).abs() < 4.0 * 0.5 * (2.0 / r.len() as f64).sqrt());
    }

    #[test]
    fn constant_aparch_scale() {
        let p = ApArchParams::new(0.0625, 0.0, 0.0).unwrap();
        let panel = simulate_aparch4(&p, &InnovationSpec::normal(3).unwrap(), 10, 5, 1).unwrap();
        assert!(panel.sigma_path().unwrap().iter().all(|s| (s * s - 0.25).abs() < 1e-15));
    }

    #[test]
    fn daily_innovation_has_unit_variance() {
        for innov in [InnovationSpec::normal(13).unwrap(), InnovationSpec::nig(2.0, 1.0, 13).unwrap()] {
            let p = GarchParams::new(1.0, 0.0, 0.0).unwrap();
            let panel = simulate_garch(&p, &innov, 200_000, 0, 21).unwrap();
            let r = panel.daily_returns();
            let n = r.len() as f64;
            let m2 = r.iter().map(|x| x * x).sum::<f64>() / n;
            let m4 = innov.daily_moments().get(4).unwrap();
            let se = ((m4 - 1.0) / n).sqrt();
            assert!((m2 - 1.0).abs() < 3.0 * se, "{:?}: {m2}", innov.kind);
        }
    }
}
