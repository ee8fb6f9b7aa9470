//! Error-versus-CPU-time harness for the stationary two-time correlation.
//!
//! Every method in the ladder is run against one shared oracle curve. Errors
//! are relative: `|mean − oracle| / max(|oracle|, 10⁻³·max|oracle|)`,
//! aggregated as a root mean square over the τ grid; the estimated error is
//! the same functional of the reported stderr.

use serde::{Deserialize, Serialize};

use qtraj::estimators::stationary_correlation;
use qtraj::oracle::{self, SteadyStateOptions};
use qtraj::{stationary_spec, EstimateSeries, LindbladModel, Result, C64};

use crate::config::{method_of, Method, RunConfig};
use crate::output::model_hash;
use crate::timing::timed;

pub const BENCH_SCHEMA: &str = "qtraj.bench/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub method: String,
    pub n: usize,
    pub repetition: usize,
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
    pub rel_error: f64,
    pub est_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Least-squares slope of `log rel_error` against `log n`.
    pub error_slope: f64,
    /// Same for the estimated error; `−1/2` for a Monte Carlo mean.
    pub stderr_slope: f64,
    /// Mean of `cpu_seconds · est_stderr²`: the CPU time needed for unit
    /// relative stderr.
    pub cost_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub model_hash: String,
    pub seed: u64,
    pub taus: Vec<f64>,
    pub oracle_re: Vec<f64>,
    pub oracle_im: Vec<f64>,
    pub points: Vec<BenchPoint>,
    pub summaries: Vec<MethodSummary>,
    /// CPU(four) / CPU(doubled) at matched stderr, when both were run.
    pub cpu_ratio_four_doubled: Option<f64>,
}

/// `⟨A(τ) B⟩` in the exact stationary state, by the regression theorem.
pub fn stationary_oracle(model: &LindbladModel, cfg: &RunConfig, taus: &[f64]) -> Result<Vec<C64>> {
    let ss = oracle::steady_state(model, SteadyStateOptions::default())?;
    let spec = stationary_spec(
        cfg.initial_state(),
        0.0,
        cfg.resolved("a", &cfg.a),
        cfg.resolved("b", &cfg.b),
    );
    oracle::regression_correlation(model, &ss, &spec, taus, oracle::default_control())
}

/// `(rel_error, est_stderr)` of one estimate against the oracle curve.
pub fn relative_errors(est: &EstimateSeries, reference: &[C64]) -> (f64, f64) {
    let peak = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = 1e-3 * peak;
    let k = reference.len() as f64;
    let mut err = 0.0;
    let mut se = 0.0;
    for ((m, s), r) in est.mean.iter().zip(&est.stderr).zip(reference) {
        let denom = r.norm().max(floor).max(f64::MIN_POSITIVE);
        err += ((m - r).norm() / denom).powi(2);
        se += (s / denom).powi(2);
    }
    ((err / k).sqrt(), (se / k).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Mean of `cpu · est_stderr²` over the points of `method`.
pub fn matched_cost(points: &[BenchPoint], method: &str) -> Option<f64> {
    let costs: Vec<f64> =
        points.iter().filter(|p| p.method == method).map(|p| p.cpu_seconds * p.est_stderr.powi(2)).collect();
    (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64)
}

pub fn summarize(points: &[BenchPoint], methods: &[String]) -> Vec<MethodSummary> {
    methods
        .iter()
        .filter_map(|m| {
            let own: Vec<&BenchPoint> = points.iter().filter(|p| &p.method == m).collect();
            if own.is_empty() {
                return None;
            }
            let ns: Vec<f64> = own.iter().map(|p| p.n as f64).collect();
            Some(MethodSummary {
                method: m.clone(),
                error_slope: log_slope(&ns, &own.iter().map(|p| p.rel_error).collect::<Vec<_>>()),
                stderr_slope: log_slope(&ns, &own.iter().map(|p| p.est_stderr).collect::<Vec<_>>()),
                cost_constant: matched_cost(points, m)?,
            })
        })
        .collect()
}

/// Runs every method at every ladder rung (and repetition).
pub fn run_bench(cfg: &RunConfig) -> Result<BenchReport> {
    let model = cfg.build_model().map_err(|e| qtraj::Error::InvalidArgument(e.to_string()))?;
    let taus = cfg.grid.values();
    let reference = stationary_oracle(&model, cfg, &taus)?;
    let initial = cfg.initial_state();
    let (a, b) = (cfg.resolved("a", &cfg.a), cfg.resolved("b", &cfg.b));
    let mut points = Vec::new();
    for &method in &cfg.bench.methods {
        for (rung, &n) in cfg.bench.ladder.iter().enumerate() {
            for rep in 0..cfg.bench.repetitions {
                let seed = cfg.seed.wrapping_add((rung * cfg.bench.repetitions + rep) as u64);
                let sampling = cfg.sampling();
                let sampling = qtraj::Sampling { trajectories: n, seed, ..sampling };
                let (est, cpu, wall) = timed(|| {
                    stationary_correlation(
                        &model,
                        &initial,
                        cfg.burn_in,
                        &a,
                        &b,
                        &taus,
                        method_of(method, cfg.epsilon),
                        &sampling,
                    )
                });
                let (rel_error, est_stderr) = relative_errors(&est?, &reference);
                log::info!("{method} n={n} rep={rep}: rel_error {rel_error:.3e}, est {est_stderr:.3e}, cpu {cpu:.3}s");
                points.push(BenchPoint {
                    method: method.to_string(),
                    n,
                    repetition: rep,
                    cpu_seconds: cpu,
                    wall_seconds: wall,
                    rel_error,
                    est_stderr,
                });
            }
        }
    }
    let names: Vec<String> = cfg.bench.methods.iter().map(Method::to_string).collect();
    let ratio = match (matched_cost(&points, "four"), matched_cost(&points, "doubled")) {
        (Some(f), Some(d)) if d > 0.0 => Some(f / d),
        _ => None,
    };
    Ok(BenchReport {
        schema: BENCH_SCHEMA.into(),
        model_hash: model_hash(cfg),
        seed: cfg.seed,
        taus,
        oracle_re: reference.iter().map(|z| z.re).collect(),
        oracle_im: reference.iter().map(|z| z.im).collect(),
        summaries: summarize(&points, &names),
        points,
        cpu_ratio_four_doubled: ratio,
    })
}

/// Tidy long-format table: one row per (method, n, repetition).
pub fn emit_plot_data(points: &[BenchPoint]) -> String {
    let mut out = String::from("method,n,cpu_seconds,rel_error,est_stderr\n");
    for p in points {
        out.push_str(&format!("{},{},{},{},{}\n", p.method, p.n, p.cpu_seconds, p.rel_error, p.est_stderr));
    }
    out
}

/// A single estimated series as one plot group.
pub fn series_point(method: &str, est: &EstimateSeries, reference: &[C64], cpu: f64, wall: f64) -> BenchPoint {
    let (rel_error, est_stderr) = relative_errors(est, reference);
    BenchPoint {
        method: method.into(),
        n: est.n,
        repetition: 0,
        cpu_seconds: cpu,
        wall_seconds: wall,
        rel_error,
        est_stderr,
    }
}
