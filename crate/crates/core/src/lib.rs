//! Forecast evaluation with strictly consistent losses and high-frequency proxies.
//!
//! The crate covers the full path of a comparative backtest: simulate (or
//! ingest) intraday returns, build conditional-moment proxies, produce rolling
//! model forecasts, and compare forecasts pairwise with Diebold-Mariano tests
//! rendered as three-zone matrices.

pub mod dgp;
pub mod dm;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod losses;
pub mod models;
pub mod proxies;
pub mod rng;

pub use error::{Error, Result};
