//! ARCH-family models fitted by Gaussian quasi-maximum likelihood, rolling
//! one-step-ahead moment forecasts, and the oracle forecast of a simulation.

mod filter;
mod fit;
pub mod optim;
mod rolling;
mod spec;

pub use filter::{negative_qll, one_step_sigma2, VarianceFilter};
pub use fit::{fit_qmle, fit_qmle_with, standard_errors, starting_params, FitOptions, FitResult};
pub use rolling::{
    moment_forecast, oracle_forecast, raw_moment_forecast, rolling_forecasts,
    rolling_forecasts_with, ForecastSeries, RollingConfig, ORACLE_LABEL,
};
pub use spec::{Family, MeanSpec, ModelSpec, GAUSSIAN_KURTOSIS};
