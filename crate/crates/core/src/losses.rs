//! Strictly consistent losses for moments and ratios of moments.
//!
//! A moment loss is the Bregman divergence of a strictly convex generator `phi`,
//! evaluated at a forecast `x` and a realised value `v = h(y)` (or a proxy for it):
//!
//! ```text
//! L(x, v) = phi(v) - phi(x) - phi'(x) (v - x)
//! ```
//!
//! The difference of two such losses is affine in `v`, which is what makes it
//! legitimate to swap `h(y)` for any conditionally unbiased proxy.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Open interval on which a generator is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Real,
    Positive,
    Open { lo: f64, hi: f64 },
}

impl Domain {
    pub fn contains(&self, t: f64) -> bool {
        match *self {
            Domain::Real => t.is_finite(),
            Domain::Positive => t.is_finite() && t > 0.0,
            Domain::Open { lo, hi } => t.is_finite() && t > lo && t < hi,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Real => write!(f, "(-inf, inf)"),
            Domain::Positive => write!(f, "(0, inf)"),
            Domain::Open { lo, hi } => write!(f, "({lo}, {hi})"),
        }
    }
}

/// A strictly convex function together with its derivative.
#[derive(Clone)]
pub struct BregmanGenerator {
    name: String,
    phi: ScalarFn,
    phi_prime: ScalarFn,
    domain: Domain,
}

impl fmt::Debug for BregmanGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BregmanGenerator")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish()
    }
}

impl BregmanGenerator {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: Domain,
    ) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
            phi_prime: Arc::new(phi_prime),
            domain,
        }
    }

    /// `phi(t) = t^2`, giving squared error.
    pub fn squared() -> Self {
        Self::new("squared", |t| t * t, |t| 2.0 * t, Domain::Real)
    }

    /// `phi(t) = -log t`, giving QLIKE.
    pub fn neg_log() -> Self {
        Self::new("neg_log", |t: f64| -t.ln(), |t| -1.0 / t, Domain::Positive)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    fn check(&self, what: &str, t: f64) -> Result<()> {
        if self.domain.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{what} = {t} outside the domain {} of generator '{}'",
                self.domain, self.name
            )))
        }
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        self.check("argument", t)?;
        Ok((self.phi)(t))
    }

    pub fn phi_prime(&self, t: f64) -> Result<f64> {
        self.check("argument", t)?;
        Ok((self.phi_prime)(t))
    }

    /// Checks strict convexity (chord above the graph) and a nondecreasing
    /// derivative on the sorted sample points that fall inside the domain.
    pub fn validate_on(&self, points: &[f64]) -> Result<()> {
        let mut grid: Vec<f64> = points
            .iter()
            .copied()
            .filter(|t| self.domain.contains(*t))
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for w in grid.windows(3) {
            let (a, c, b) = (w[0], w[1], w[2]);
            let chord = ((b - c) * (self.phi)(a) + (c - a) * (self.phi)(b)) / (b - a);
            let value = (self.phi)(c);
            let margin = 1e-12 * (1.0 + value.abs().max(chord.abs()));
            if !(value < chord - margin) {
                return Err(Error::InvalidParameter(format!(
                    "generator '{}' not strictly convex at {c}",
                    self.name
                )));
            }
        }
        for w in grid.windows(2) {
            if (self.phi_prime)(w[1]) < (self.phi_prime)(w[0]) {
                return Err(Error::InvalidParameter(format!(
                    "derivative of generator '{}' decreases on [{}, {}]",
                    self.name, w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Moment map `h`.
#[derive(Clone)]
pub enum MomentMap {
    Power(u32),
    Named { name: String, map: ScalarFn },
}

impl MomentMap {
    pub fn apply(&self, y: f64) -> f64 {
        match self {
            MomentMap::Power(n) => y.powi(*n as i32),
            MomentMap::Named { map, .. } => map(y),
        }
    }
}

impl fmt::Debug for MomentMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentMap::Power(n) => write!(f, "Power({n})"),
            MomentMap::Named { name, .. } => write!(f, "Named({name})"),
        }
    }
}

/// Intercept and slope of a loss difference viewed as a function of the
/// realised value: `Δ(x1, x2, v) = intercept + slope * v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineDiffCoefficients {
    pub intercept: f64,
    pub slope: f64,
}

impl AffineDiffCoefficients {
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        self.intercept + self.slope * v
    }
}

/// Consistent loss for the `h`-moment `E[h(Y)]`.
#[derive(Debug, Clone)]
pub struct MomentLossSpec {
    pub generator: BregmanGenerator,
    pub moment: MomentMap,
    pub label: String,
}

impl MomentLossSpec {
    pub fn new(generator: BregmanGenerator, moment: MomentMap, label: impl Into<String>) -> Self {
        Self {
            generator,
            moment,
            label: label.into(),
        }
    }

    pub fn mse(power: u32) -> Self {
        Self::new(BregmanGenerator::squared(), MomentMap::Power(power), "MSE")
    }

    pub fn qlike(power: u32) -> Self {
        Self::new(BregmanGenerator::neg_log(), MomentMap::Power(power), "QLIKE")
    }

    /// `phi(v) - phi(x) - phi'(x) (v - x)`.
    pub fn bregman_loss(&self, x: f64, v: f64) -> Result<f64> {
        let g = &self.generator;
        g.check("forecast", x)?;
        g.check("proxy value", v)?;
        let loss = (g.phi)(v) - (g.phi)(x) - (g.phi_prime)(x) * (v - x);
        // Rounding can leave a tiny negative value near the diagonal.
        Ok(if x == v { 0.0 } else { loss.max(0.0) })
    }

    /// Loss of forecast `x` against a raw observation `y`, via `v = h(y)`.
    pub fn loss_at_observation(&self, x: f64, y: f64) -> Result<f64> {
        self.bregman_loss(x, self.moment.apply(y))
    }

    /// `L(x1, v) - L(x2, v)` by direct subtraction.
    pub fn loss_difference(&self, x1: f64, x2: f64, v: f64) -> Result<f64> {
        if x1 == x2 {
            self.generator.check("forecast", x1)?;
            self.generator.check("proxy value", v)?;
            return Ok(0.0);
        }
        Ok(self.bregman_loss(x1, v)? - self.bregman_loss(x2, v)?)
    }

    /// Coefficients of the loss difference as an affine function of `v`.
    ///
    /// Only the forecasts must lie in the generator domain; the resulting
    /// affine map may be evaluated at any real proxy value.
    pub fn loss_diff_affine(&self, x1: f64, x2: f64) -> Result<AffineDiffCoefficients> {
        let g = &self.generator;
        g.check("forecast", x1)?;
        g.check("forecast", x2)?;
        if x1 == x2 {
            return Ok(AffineDiffCoefficients {
                intercept: 0.0,
                slope: 0.0,
            });
        }
        let (d1, d2) = ((g.phi_prime)(x1), (g.phi_prime)(x2));
        Ok(AffineDiffCoefficients {
            intercept: ((g.phi)(x2) - x2 * d2) - ((g.phi)(x1) - x1 * d1),
            slope: d2 - d1,
        })
    }
}

/// Consistent loss for a ratio of moments `E[h(Y)] / E[s(Y)]`.
#[derive(Clone)]
pub struct RatioLossSpec {
    pub generator: BregmanGenerator,
    numerator: ScalarFn,
    denominator: ScalarFn,
    pub label: String,
}

impl fmt::Debug for RatioLossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RatioLossSpec")
            .field("generator", &self.generator)
            .field("label", &self.label)
            .finish()
    }
}

impl RatioLossSpec {
    pub fn new(
        generator: BregmanGenerator,
        numerator: impl Fn(f64) -> f64 + Send + Sync + 'static,
        denominator: impl Fn(f64) -> f64 + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Self {
        Self {
            generator,
            numerator: Arc::new(numerator),
            denominator: Arc::new(denominator),
            label: label.into(),
        }
    }

    pub fn numerator(&self, y: f64) -> f64 {
        (self.numerator)(y)
    }

    pub fn denominator(&self, y: f64) -> Result<f64> {
        let s = (self.denominator)(y);
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::Domain(format!(
                "denominator map must be strictly positive, got s({y}) = {s}"
            )))
        }
    }

    /// `s(y)(phi(y) - phi(x)) - phi'(x)(h(y) - x s(y)) - phi'(y)(h(y) - y s(y))`.
    pub fn ratio_loss(&self, x: f64, y: f64) -> Result<f64> {
        let g = &self.generator;
        g.check("forecast", x)?;
        g.check("observation", y)?;
        let h = self.numerator(y);
        let s = self.denominator(y)?;
        Ok(s * ((g.phi)(y) - (g.phi)(x))
            - (g.phi_prime)(x) * (h - x * s)
            - (g.phi_prime)(y) * (h - y * s))
    }

    /// Loss difference from the two moment values (or proxies for them):
    /// `(phi'(x2) - phi'(x1)) v_h + (x1 phi'(x1) - phi(x1) - x2 phi'(x2) + phi(x2)) v_s`.
    pub fn ratio_loss_difference(&self, x1: f64, x2: f64, v_h: f64, v_s: f64) -> Result<f64> {
        let g = &self.generator;
        g.check("forecast", x1)?;
        g.check("forecast", x2)?;
        if x1 == x2 {
            return Ok(0.0);
        }
        let (d1, d2) = ((g.phi_prime)(x1), (g.phi_prime)(x2));
        let (p1, p2) = ((g.phi)(x1), (g.phi)(x2));
        Ok((d2 - d1) * v_h + (x1 * d1 - p1 - x2 * d2 + p2) * v_s)
    }
}

/// Built-in losses by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "MSE")]
    Mse,
    #[serde(rename = "QLIKE")]
    Qlike,
}

impl LossKind {
    pub fn spec(self, power: u32) -> MomentLossSpec {
        match self {
            LossKind::Mse => MomentLossSpec::mse(power),
            LossKind::Qlike => MomentLossSpec::qlike(power),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LossKind::Mse => "MSE",
            LossKind::Qlike => "QLIKE",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(LossKind::Mse),
            "qlike" => Ok(LossKind::Qlike),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
