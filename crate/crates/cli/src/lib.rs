//! Command-line front end for `qtraj`: JSON run configuration, estimator and
//! oracle dispatch, CSV/JSON output, and the error-versus-CPU-time harness.

pub mod bench;
pub mod commands;
pub mod config;
pub mod output;
pub mod timing;

pub use bench::{emit_plot_data, run_bench, BenchPoint, BenchReport};
pub use commands::{execute, run, run_command, Cli, CliError, Command, Overrides, Rendered, Target};
pub use config::{parse_config, serialize_config, ConfigError, GridSpec, Method, RunConfig};
pub use output::{Format, SeriesDocument};
