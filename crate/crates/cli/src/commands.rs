use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qtraj::estimators::stationary_correlation;
use qtraj::oracle::{self, DensityMatrix};
use qtraj::{correlation, expectation, heisenberg_element, spectrum, CorrelationSpec, EstimateSeries, C64};

use crate::bench::{emit_plot_data, run_bench, stationary_oracle};
use crate::config::{parse_config, ConfigError, GridSpec, Method, RunConfig};
use crate::output::{model_hash, Column, Format, Metadata, SeriesDocument};
use crate::timing::timed;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Estimator(#[from] qtraj::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Expect,
    Heisenberg,
    Corr,
    Spectrum,
}

#[derive(Clone, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One-time expectation ⟨observable(t)⟩ from `initial`.
    Expect,
    /// Heisenberg matrix element ⟨phi0|observable(t)|psi0⟩.
    Heisenberg,
    /// Stationary ⟨a(τ) b⟩ after burn-in, or the explicit `insertions` spec.
    Corr,
    /// Fourier spectrum of the stationary correlation over `omega_grid`.
    Spectrum,
    /// Deterministic master-equation reference for another subcommand.
    Oracle {
        #[arg(long, value_enum, default_value = "corr")]
        target: Target,
    },
    /// Error versus CPU time for each method over a ladder of trajectory counts.
    Bench {
        /// Also write the tidy plot table here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
}

/// Command-line overrides of the configuration file.
#[derive(Clone, Debug, Default, PartialEq, Args)]
pub struct Overrides {
    /// JSON run configuration (defaults to the Ω = 10γ two-level preset).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trajectories: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    pub method: Option<Method>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub dt_max: Option<f64>,
    #[arg(long, global = true)]
    pub jump_tol: Option<f64>,
    /// start:end:points
    #[arg(long, global = true)]
    pub grid: Option<GridSpec>,
    #[arg(long, global = true)]
    pub burn_in: Option<f64>,
    /// Worker threads; 1 is serial, 0 uses all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Parser)]
#[command(name = "qtraj", version, about = "Quantum-jump trajectories in single and doubled Hilbert spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Overrides {
    /// Loads the configuration file (if any) and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
                parse_config(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.trajectories {
            cfg.trajectories = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.dt_max {
            cfg.dt_max = v;
        }
        if let Some(v) = self.jump_tol {
            cfg.jump_tol = v;
        }
        if let Some(v) = self.grid {
            cfg.grid = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output of one command: the main document and, for `bench`, the plot table.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub main: String,
    pub plot_data: Option<String>,
}

fn exact_series(grid: Vec<f64>, mean: Vec<C64>) -> EstimateSeries {
    let k = grid.len();
    EstimateSeries { grid, mean, stderr: vec![0.0; k], stderr_re: vec![0.0; k], stderr_im: vec![0.0; k], n: 0, failed: 0 }
}

fn explicit_spec(cfg: &RunConfig) -> Option<CorrelationSpec> {
    cfg.insertion_ops().map(|(a_ops, b_ops)| CorrelationSpec {
        initial: cfg.initial_state(),
        t0: 0.0,
        a_ops,
        b_ops,
        observable: cfg.resolved("observable", &cfg.observable),
    })
}

fn estimate_correlation(cfg: &RunConfig) -> qtraj::Result<(EstimateSeries, Column)> {
    let model = cfg.build_model().map_err(|e| qtraj::Error::InvalidArgument(e.to_string()))?;
    let grid = cfg.grid.values();
    match explicit_spec(cfg) {
        Some(spec) => Ok((correlation(&model, &spec, &grid, cfg.correlation_method(), &cfg.sampling())?, Column::T)),
        None => Ok((
            stationary_correlation(
                &model,
                &cfg.initial_state(),
                cfg.burn_in,
                &cfg.resolved("a", &cfg.a),
                &cfg.resolved("b", &cfg.b),
                &grid,
                cfg.correlation_method(),
                &cfg.sampling(),
            )?,
            Column::Tau,
        )),
    }
}

fn oracle_correlation(cfg: &RunConfig) -> qtraj::Result<(EstimateSeries, Column)> {
    let model = cfg.build_model().map_err(|e| qtraj::Error::InvalidArgument(e.to_string()))?;
    let grid = cfg.grid.values();
    match explicit_spec(cfg) {
        Some(spec) => {
            let rho0 = DensityMatrix::pure(&spec.initial);
            let mean = oracle::regression_correlation(&model, &rho0, &spec, &grid, oracle::default_control())?;
            Ok((exact_series(grid, mean), Column::T))
        }
        None => {
            let mean = stationary_oracle(&model, cfg, &grid)?;
            Ok((exact_series(grid, mean), Column::Tau))
        }
    }
}

/// Runs one subcommand and renders its output; nothing is written to disk.
pub fn run_command(command: &Command, cfg: &RunConfig, format: Format) -> Result<Rendered, CliError> {
    let model = cfg.build_model()?;
    let grid = cfg.grid.values();
    let uses_method = matches!(command, Command::Corr | Command::Spectrum);
    let name = match command {
        Command::Expect => "expect".to_string(),
        Command::Heisenberg => "heisenberg".into(),
        Command::Corr => "corr".into(),
        Command::Spectrum => "spectrum".into(),
        Command::Oracle { target } => format!("oracle:{}", target.to_possible_value().expect("named").get_name()),
        Command::Bench { .. } => "bench".into(),
    };

    let (result, cpu, wall) = timed(|| -> qtraj::Result<Option<(EstimateSeries, Column)>> {
        Ok(Some(match command {
            Command::Expect => (
                expectation(&model, &cfg.initial_state(), &cfg.resolved("observable", &cfg.observable), &grid, &cfg.sampling())?,
                Column::T,
            ),
            Command::Heisenberg => {
                let (phi0, psi0) = cfg.heisenberg_states();
                let a = cfg.resolved("observable", &cfg.observable);
                (heisenberg_element(&model, &phi0, &psi0, &a, &grid, &cfg.sampling())?, Column::T)
            }
            Command::Corr => estimate_correlation(cfg)?,
            Command::Spectrum => {
                let (corr, _) = estimate_correlation(cfg)?;
                (spectrum(&corr, &cfg.omega_grid.values())?, Column::Omega)
            }
            Command::Oracle { target } => match target {
                Target::Expect => {
                    let rho0 = DensityMatrix::pure(&cfg.initial_state());
                    let a = cfg.resolved("observable", &cfg.observable);
                    let mean = oracle::expectation_oracle(&model, &rho0, &a, &grid, oracle::default_control())?;
                    (exact_series(grid.clone(), mean), Column::T)
                }
                Target::Heisenberg => {
                    let (phi0, psi0) = cfg.heisenberg_states();
                    let a = cfg.resolved("observable", &cfg.observable);
                    let mean = oracle::heisenberg_oracle(&model, &phi0, &psi0, &a, &grid, oracle::default_control())?;
                    (exact_series(grid.clone(), mean), Column::T)
                }
                Target::Corr => oracle_correlation(cfg)?,
                Target::Spectrum => {
                    let (corr, _) = oracle_correlation(cfg)?;
                    (spectrum(&corr, &cfg.omega_grid.values())?, Column::Omega)
                }
            },
            Command::Bench { .. } => return Ok(None),
        }))
    });

    match result? {
        Some((series, column)) => {
            let metadata = Metadata {
                command: name,
                seed: cfg.seed,
                n: series.n,
                failed: series.failed,
                method: uses_method.then(|| cfg.method.to_string()),
                model_hash: model_hash(cfg),
                threads: cfg.threads,
                cpu_seconds: cpu,
                wall_seconds: wall,
            };
            Ok(Rendered { main: SeriesDocument::new(&series, column, metadata).render(format), plot_data: None })
        }
        None => {
            let report = run_bench(cfg)?;
            let plot = emit_plot_data(&report.points);
            let main = match format {
                Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
                Format::Csv => plot.clone(),
            };
            Ok(Rendered { main, plot_data: Some(plot) })
        }
    }
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io { path: path.clone(), source: e })
}

/// Parses `args` (including the program name), runs, and writes outputs.
/// Returns the rendered main document.
pub fn run<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    execute(&cli)
}

pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.overrides.resolve()?;
    let rendered = run_command(&cli.command, &cfg, cli.overrides.format)?;
    match &cli.overrides.output {
        Some(path) => write(path, &rendered.main)?,
        None => print!("{}", rendered.main),
    }
    if let (Command::Bench { plot_data: Some(path) }, Some(table)) = (&cli.command, &rendered.plot_data) {
        write(path, table)?;
    }
    Ok(rendered.main)
}
