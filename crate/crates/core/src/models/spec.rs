use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fourth moment of the Gaussian quasi-likelihood innovation; enters the
/// power-4 apARCH stationarity constraint.
pub const GAUSSIAN_KURTOSIS: f64 = 3.0;

/// `E|z|` for a standard normal `z`.
pub(crate) const MEAN_ABS_NORMAL: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `sigma^2_t = a0 + sum_i a_i e^2_{t-i}`
    Arch(usize),
    /// `sigma^2_t = a0 + a1 e^2_{t-1} + b sigma^2_{t-1}`
    Garch11,
    /// `sigma^4_t = omega + sum_i alpha_i e^4_{t-i} (+ beta sigma^4_{t-1})`
    ApArch4 { arch: usize, garch: bool },
    /// `ln sigma^2_t = omega + alpha (|z| - E|z|) + gamma z + beta ln sigma^2_{t-1}`
    Egarch11,
    /// Component GARCH with permanent level `q_t`.
    Cgarch11,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MeanSpec {
    #[default]
    Zero,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelSpec {
    pub family: Family,
    pub mean: MeanSpec,
}

impl ModelSpec {
    pub fn new(family: Family, mean: MeanSpec) -> Result<Self> {
        let spec = Self { family, mean };
        spec.validate()?;
        Ok(spec)
    }

    pub fn arch(p: usize) -> Self {
        Self { family: Family::Arch(p), mean: MeanSpec::Zero }
    }

    pub fn garch() -> Self {
        Self { family: Family::Garch11, mean: MeanSpec::Zero }
    }

    pub fn aparch4(arch: usize, garch: bool) -> Self {
        Self { family: Family::ApArch4 { arch, garch }, mean: MeanSpec::Zero }
    }

    pub fn egarch() -> Self {
        Self { family: Family::Egarch11, mean: MeanSpec::Zero }
    }

    pub fn cgarch() -> Self {
        Self { family: Family::Cgarch11, mean: MeanSpec::Zero }
    }

    pub fn with_mean(mut self, mean: MeanSpec) -> Self {
        self.mean = mean;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::Arch(0) => Err(Error::InvalidParameter("ARCH order must be at least 1".into())),
            Family::ApArch4 { arch, garch } => {
                let ok = if garch { arch == 1 } else { (1..=3).contains(&arch) };
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "apARCH order {arch} unsupported (use 1, 2, 3 or (1,1))"
                    )))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn has_mean(&self) -> bool {
        self.mean == MeanSpec::Constant
    }

    pub(crate) fn mean_offset(&self) -> usize {
        self.has_mean() as usize
    }

    /// Names of the parameter vector entries, mean first when estimated.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.has_mean() {
            names.push("mu".to_string());
        }
        match self.family {
            Family::Arch(p) => {
                names.push("a0".into());
                names.extend((1..=p).map(|i| format!("a{i}")));
            }
            Family::Garch11 => names.extend(["a0", "a1", "b"].map(String::from)),
            Family::ApArch4 { arch, garch } => {
                names.push("omega".into());
                names.extend((1..=arch).map(|i| format!("alpha{i}")));
                if garch {
                    names.push("beta".into());
                }
            }
            Family::Egarch11 => names.extend(["omega", "alpha", "gamma", "beta"].map(String::from)),
            Family::Cgarch11 => {
                names.extend(["omega", "alpha", "beta", "rho", "phi"].map(String::from))
            }
        }
        names
    }

    pub fn param_count(&self) -> usize {
        self.mean_offset()
            + match self.family {
                Family::Arch(p) => p + 1,
                Family::Garch11 => 3,
                Family::ApArch4 { arch, garch } => 1 + arch + garch as usize,
                Family::Egarch11 => 4,
                Family::Cgarch11 => 5,
            }
    }

    /// Longest lag the recursion reads.
    pub fn max_lag(&self) -> usize {
        match self.family {
            Family::Arch(p) => p,
            Family::ApArch4 { arch, .. } => arch,
            _ => 1,
        }
    }

    /// Smallest window on which a fit is attempted.
    pub fn min_window(&self) -> usize {
        (10 * self.param_count()).max(self.max_lag() + 20)
    }

    /// Checks positivity and stationarity constraints on natural parameters.
    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::InvalidParameter(format!(
                "{} expects {} parameters, got {}",
                self,
                self.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        let v = &params[self.mean_offset()..];
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{self}: {what}")));
        match self.family {
            Family::Arch(_) | Family::Garch11 => {
                if v[0] <= 0.0 || v[1..].iter().any(|a| *a < 0.0) {
                    return bad("coefficients must be positive");
                }
                if v[1..].iter().sum::<f64>() >= 1.0 {
                    return bad("persistence must be below 1");
                }
            }
            Family::ApArch4 { arch, garch } => {
                if v[0] <= 0.0 || v[1..].iter().any(|a| *a < 0.0) {
                    return bad("coefficients must be positive");
                }
                let beta = if garch { v[1 + arch] } else { 0.0 };
                if GAUSSIAN_KURTOSIS * v[1..=arch].iter().sum::<f64>() + beta >= 1.0 {
                    return bad("3 sum(alpha) + beta must be below 1");
                }
            }
            Family::Egarch11 => {
                if v[3].abs() >= 1.0 {
                    return bad("|beta| must be below 1");
                }
            }
            Family::Cgarch11 => {
                let (omega, alpha, beta, rho, phi) = (v[0], v[1], v[2], v[3], v[4]);
                if omega <= 0.0 || alpha < 0.0 || beta < 0.0 || phi < 0.0 {
                    return bad("coefficients must be positive");
                }
                if alpha + beta >= 1.0 || !(0.0..1.0).contains(&rho) {
                    return bad("alpha + beta and rho must be below 1");
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Arch(p) => write!(f, "ARCH({p})")?,
            Family::Garch11 => f.write_str("GARCH(1,1)")?,
            Family::ApArch4 { garch: true, .. } => f.write_str("apARCH(1,1)")?,
            Family::ApArch4 { arch, .. } => write!(f, "apARCH({arch})")?,
            Family::Egarch11 => f.write_str("EGARCH(1,1)")?,
            Family::Cgarch11 => f.write_str("CGARCH(1,1)")?,
        }
        if self.has_mean() {
            f.write_str("+mu")?;
        }
        Ok(())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Accepts labels such as `ARCH(2)`, `garch`, `apARCH(1,1)`, `egarch+mu`.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let lower = compact.to_ascii_lowercase();
        let (body, mean) = match lower.strip_suffix("+mu") {
            Some(b) => (b, MeanSpec::Constant),
            None => (lower.as_str(), MeanSpec::Zero),
        };
        let unknown = || Error::Config(format!("unknown model '{s}'"));
        let (name, order) = match body.find('(') {
            Some(i) => {
                let inner = body[i + 1..].strip_suffix(')').ok_or_else(unknown)?;
                (&body[..i], Some(inner))
            }
            None => {
                let split = body.find(|c: char| c.is_ascii_digit()).unwrap_or(body.len());
                let digits = &body[split..];
                (&body[..split], (!digits.is_empty()).then_some(digits))
            }
        };
        let family = match (name, order) {
            ("arch", Some(p)) => Family::Arch(p.parse().map_err(|_| unknown())?),
            ("garch" | "sgarch", None | Some("1,1" | "11")) => Family::Garch11,
            ("egarch", None | Some("1,1" | "11")) => Family::Egarch11,
            ("cgarch", None | Some("1,1" | "11")) => Family::Cgarch11,
            ("aparch", None | Some("1,1" | "11")) => Family::ApArch4 { arch: 1, garch: true },
            ("aparch", Some(q)) => Family::ApArch4 {
                arch: q.parse().map_err(|_| unknown())?,
                garch: false,
            },
            _ => return Err(unknown()),
        };
        Self::new(family, mean)
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.to_string()
    }
}
