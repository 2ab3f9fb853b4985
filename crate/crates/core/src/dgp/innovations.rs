//! Daily innovations built from independent intraday pieces.
//!
//! `eps_t = sum_i eps_{t,i}`, each piece centred with variance `1/m`, either
//! Gaussian or normal inverse Gaussian with fixed shape `(alpha, beta)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Draws from the inverse Gaussian distribution with the given mean and shape,
/// by the transformation-with-rejection method of Michael, Schucany and Haas.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    let nu: f64 = StandardNormal.sample(rng);
    let y = nu * nu;
    let my = mean * y;
    // mean - mean/(2 shape) * (my - sqrt(my^2 + 4 mean shape y)), rearranged
    // to avoid cancellation when shape is small.
    let root = (my * my + 4.0 * mean * shape * y).sqrt();
    let x = mean - 2.0 * mean * my / (my + root);
    let x = if x > 0.0 { x } else { f64::MIN_POSITIVE };
    let u: f64 = rng.random();
    if u * (mean + x) <= mean {
        x
    } else {
        mean * mean / x
    }
}

/// `nig(mu, delta, alpha, beta)` in the location/scale/tail/skew parameterisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub mu: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NigParams {
    pub fn new(mu: f64, delta: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > beta.abs()) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "NIG requires alpha > |beta|, got alpha={alpha}, beta={beta}"
            )));
        }
        if !(delta > 0.0) || !delta.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "NIG requires delta > 0 and finite mu, got delta={delta}, mu={mu}"
            )));
        }
        Ok(Self { mu, delta, alpha, beta })
    }

    pub fn gamma(&self) -> f64 {
        (self.alpha * self.alpha - self.beta * self.beta).sqrt()
    }

    /// First four cumulants.
    pub fn cumulants(&self) -> [f64; 4] {
        let (a, b, d) = (self.alpha, self.beta, self.delta);
        let g = self.gamma();
        [
            self.mu + d * b / g,
            d * a * a / g.powi(3),
            3.0 * d * b * a * a / g.powi(5),
            3.0 * d * a * a * (a * a + 4.0 * b * b) / g.powi(7),
        ]
    }

    pub fn mean(&self) -> f64 {
        self.cumulants()[0]
    }

    pub fn variance(&self) -> f64 {
        self.cumulants()[1]
    }

    pub fn skewness(&self) -> f64 {
        let k = self.cumulants();
        k[2] / k[1].powf(1.5)
    }

    /// Kurtosis (not excess).
    pub fn kurtosis(&self) -> f64 {
        let k = self.cumulants();
        3.0 + k[3] / (k[1] * k[1])
    }

    /// Raw moments `E[X^k]`, `k = 1..=4`.
    pub fn raw_moments(&self) -> [f64; 4] {
        raw_from_cumulants(self.cumulants())
    }

    /// Parameters of the sum of `n` independent copies.
    pub fn convolve(&self, n: usize) -> Self {
        Self {
            mu: self.mu * n as f64,
            delta: self.delta * n as f64,
            ..*self
        }
    }

    /// Variance-mean mixture: `mu + beta Z + sqrt(Z) N` with `Z ~ IG(delta/gamma, delta^2)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = sample_inverse_gaussian(self.delta / self.gamma(), self.delta * self.delta, rng);
        let n: f64 = StandardNormal.sample(rng);
        self.mu + self.beta * z + z.sqrt() * n
    }
}

fn raw_from_cumulants(k: [f64; 4]) -> [f64; 4] {
    let [k1, k2, k3, k4] = k;
    [
        k1,
        k2 + k1 * k1,
        k3 + 3.0 * k2 * k1 + k1.powi(3),
        k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 + k1.powi(4),
    ]
}

/// Centring and scaling of `nig(mu, delta, alpha, beta)` so each of `m`
/// intraday pieces has mean 0 and variance `1/m`:
/// `gamma = sqrt(alpha^2 - beta^2)`, `delta = gamma^3 / alpha^2 / m`,
/// `mu = -delta beta / gamma`.
pub fn nig_intraday_params(alpha: f64, beta: f64, m: usize) -> Result<(f64, f64)> {
    nig_params_for_variance(alpha, beta, 1.0 / count(m)?)
}

fn nig_params_for_variance(alpha: f64, beta: f64, variance: f64) -> Result<(f64, f64)> {
    if !(alpha > beta.abs()) {
        return Err(Error::InvalidParameter(format!(
            "NIG requires alpha > |beta|, got alpha={alpha}, beta={beta}"
        )));
    }
    let gamma = (alpha * alpha - beta * beta).sqrt();
    let delta = variance * gamma.powi(3) / (alpha * alpha);
    Ok((-delta * beta / gamma, delta))
}

fn count(m: usize) -> Result<f64> {
    if m == 0 {
        Err(Error::InvalidParameter("intraday count must be at least 1".into()))
    } else {
        Ok(m as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InnovationKind {
    Normal,
    Nig { alpha: f64, beta: f64 },
}

/// Variance of one intraday piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntradayScaling {
    /// `1/m`: the daily innovation has unit variance.
    #[default]
    InverseCount,
    /// `1/sqrt(m)`.
    InverseSqrtCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub kind: InnovationKind,
    pub intraday_count: usize,
    #[serde(default)]
    pub scaling: IntradayScaling,
}

impl InnovationSpec {
    pub fn normal(m: usize) -> Result<Self> {
        count(m)?;
        Ok(Self {
            kind: InnovationKind::Normal,
            intraday_count: m,
            scaling: IntradayScaling::InverseCount,
        })
    }

    pub fn nig(alpha: f64, beta: f64, m: usize) -> Result<Self> {
        count(m)?;
        nig_params_for_variance(alpha, beta, 1.0)?;
        Ok(Self {
            kind: InnovationKind::Nig { alpha, beta },
            intraday_count: m,
            scaling: IntradayScaling::InverseCount,
        })
    }

    pub fn with_scaling(mut self, scaling: IntradayScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        count(self.intraday_count)?;
        if let InnovationKind::Nig { alpha, beta } = self.kind {
            nig_params_for_variance(alpha, beta, 1.0)?;
        }
        Ok(())
    }

    pub fn piece_variance(&self) -> f64 {
        let m = self.intraday_count as f64;
        match self.scaling {
            IntradayScaling::InverseCount => 1.0 / m,
            IntradayScaling::InverseSqrtCount => 1.0 / m.sqrt(),
        }
    }

    /// Distribution of a single intraday piece, `None` for Gaussian pieces.
    pub fn piece_nig(&self) -> Option<NigParams> {
        match self.kind {
            InnovationKind::Normal => None,
            InnovationKind::Nig { alpha, beta } => {
                let (mu, delta) = nig_params_for_variance(alpha, beta, self.piece_variance())
                    .expect("validated on construction");
                Some(NigParams { mu, delta, alpha, beta })
            }
        }
    }

    /// Raw moments of the daily innovation `eps_t`.
    pub fn daily_moments(&self) -> InnovationMoments {
        let m = self.intraday_count;
        let var = self.piece_variance() * m as f64;
        let raw = match self.piece_nig() {
            None => [0.0, var, 0.0, 3.0 * var * var],
            Some(piece) => piece.convolve(m).raw_moments(),
        };
        InnovationMoments::new(raw.to_vec())
    }

    pub fn sampler(&self) -> PieceSampler {
        PieceSampler {
            sd: self.piece_variance().sqrt(),
            nig: self.piece_nig(),
        }
    }
}

/// Draws intraday innovation pieces.
#[derive(Debug, Clone, Copy)]
pub struct PieceSampler {
    sd: f64,
    nig: Option<NigParams>,
}

impl PieceSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.nig {
            None => {
                let z: f64 = StandardNormal.sample(rng);
                self.sd * z
            }
            Some(p) => p.sample(rng),
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for slot in out {
            *slot = self.sample(rng);
        }
    }
}

/// Raw moments `E[eps^k]` of the daily innovation, `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovationMoments {
    raw: Vec<f64>,
}

impl InnovationMoments {
    pub fn new(raw: Vec<f64>) -> Self {
        Self { raw }
    }

    pub fn standard_normal() -> Self {
        Self::new(vec![0.0, 1.0, 0.0, 3.0])
    }

    /// `E[eps^k]`; `k = 0` gives 1.
    pub fn get(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Ok(1.0);
        }
        self.raw.get(k as usize - 1).copied().ok_or_else(|| {
            Error::Config(format!("innovation moment of order {k} not supplied"))
        })
    }
}
