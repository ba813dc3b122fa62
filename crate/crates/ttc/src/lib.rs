//! Files, configuration, sweeps and the command line around `ttc-core`.

pub mod cli;
pub mod config;
pub mod ppm;
pub mod sweep;

pub use config::Config;
