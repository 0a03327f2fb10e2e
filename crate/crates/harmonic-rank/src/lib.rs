//! MovieLens loading, a thread-pool executor, run configuration and the
//! timed end-to-end pipeline behind the `harmonic-rank` command.
//!
//! The numerical work lives in [`harmonic_rank_core`]; this crate adds files,
//! threads and reports.

pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod pipeline;

pub use config::{BandwidthSetting, MuBarSetting, RunConfig};
pub use error::{Error, Phase, Result};
pub use exec::RayonExecutor;
pub use pipeline::{run, sweep, Report, SweepRow};
