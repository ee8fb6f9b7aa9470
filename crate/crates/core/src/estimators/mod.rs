//! Ensemble estimators built on the trajectory engine.
//!
//! Every estimator is a map over trajectory ordinals followed by a merge of
//! per-grid-time [`Accumulator`]s. Trajectories are grouped into fixed-size
//! batches that are merged in ordinal order, so results are bit-identical for
//! any worker count.

mod correlation;
mod schedule;
mod spectrum;
mod stats;

use rayon::prelude::*;

pub use correlation::{correlation, stationary_correlation, CorrelationMethod};
pub use schedule::{build_fg_schedule, stationary_spec, CorrelationSpec, FGEntry, FGSchedule, Insertion};
pub use spectrum::{local_maxima, spectrum};
pub use stats::{statistics_merge, Accumulator};

use crate::error::{Error, Result};
use crate::hilbert::{matrix_element_slices, pair, Operator, StateVector, C64, ZERO};
use crate::model::LindbladModel;
use crate::propagator::{NormPolicy, Propagator, StepControl};
use crate::rng::RngStream;
use crate::trajectory::Walker;

const BATCH: u64 = 64;

/// Mean and standard error of the mean per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateSeries {
    pub grid: Vec<f64>,
    pub mean: Vec<C64>,
    /// `sqrt((var(Re) + var(Im)) / n)`
    pub stderr: Vec<f64>,
    pub stderr_re: Vec<f64>,
    pub stderr_im: Vec<f64>,
    /// Trajectories that entered the estimate.
    pub n: usize,
    /// Trajectories dropped after hitting a dark state at a jump.
    pub failed: usize,
}

impl EstimateSeries {
    fn from_accumulators(grid: &[f64], accs: &[Accumulator], failed: usize) -> Result<Self> {
        let n = accs.first().map_or(0, |a| a.count() as usize);
        let mut out = Self {
            grid: grid.to_vec(),
            mean: Vec::with_capacity(grid.len()),
            stderr: Vec::with_capacity(grid.len()),
            stderr_re: Vec::with_capacity(grid.len()),
            stderr_im: Vec::with_capacity(grid.len()),
            n,
            failed,
        };
        for a in accs {
            out.mean.push(a.mean());
            out.stderr.push(a.stderr()?);
            out.stderr_re.push(a.stderr_re()?);
            out.stderr_im.push(a.stderr_im()?);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Ensemble size, randomness and integration settings shared by all estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub trajectories: usize,
    pub seed: u64,
    /// Worker threads; `0` uses the global pool.
    pub threads: usize,
    pub ctrl: StepControl,
}

impl Sampling {
    pub fn new(trajectories: usize, seed: u64) -> Self {
        Self { trajectories, seed, threads: 0, ctrl: StepControl::default() }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_control(mut self, ctrl: StepControl) -> Self {
        self.ctrl = ctrl;
        self
    }
}

/// Runs `sample(stream, out)` for every trajectory ordinal and merges the
/// per-grid samples. A dark-state failure drops that trajectory.
pub(crate) fn run_ensemble<F>(sampling: &Sampling, grid: &[f64], sample: F) -> Result<EstimateSeries>
where
    F: Fn(u64, &mut [C64]) -> Result<()> + Sync,
{
    if sampling.trajectories < 2 {
        return Err(Error::InsufficientSamples { n: sampling.trajectories });
    }
    let total = sampling.trajectories as u64;
    let batches = total.div_ceil(BATCH);
    let len = grid.len();
    let run_batch = |b: u64| -> Result<(Vec<Accumulator>, usize)> {
        let mut accs = vec![Accumulator::new(); len];
        let mut buf = vec![ZERO; len];
        let mut failed = 0;
        for stream in b * BATCH..((b + 1) * BATCH).min(total) {
            match sample(stream, &mut buf) {
                Ok(()) => accs.iter_mut().zip(&buf).for_each(|(a, &x)| a.push(x)),
                Err(Error::Trajectory { source, .. }) if matches!(*source, Error::DarkState { .. }) => failed += 1,
                Err(Error::DarkState { .. }) => failed += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((accs, failed))
    };
    let parts: Vec<Result<(Vec<Accumulator>, usize)>> = if sampling.threads == 1 {
        (0..batches).map(run_batch).collect()
    } else if sampling.threads == 0 {
        (0..batches).into_par_iter().map(run_batch).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(sampling.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| (0..batches).into_par_iter().map(run_batch).collect())
    };
    let mut accs = vec![Accumulator::new(); len];
    let mut failed = 0;
    for part in parts {
        let (p, f) = part?;
        accs.iter_mut().zip(&p).for_each(|(a, b)| a.merge(b));
        failed += f;
    }
    if failed > 0 {
        log::warn!("{failed} trajectories reached a dark state at a jump and were excluded");
    }
    EstimateSeries::from_accumulators(grid, &accs, failed)
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid must not be empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn check_dims(model: &LindbladModel, dims: &[usize]) -> Result<()> {
    for &d in dims {
        if d != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: d });
        }
    }
    Ok(())
}

/// `⟨⟨ ⟨ψ(t)|A|ψ(t)⟩ ⟩⟩` over single-space trajectories started at `grid[0]`.
pub fn expectation(
    model: &LindbladModel,
    psi0: &StateVector,
    observable: &Operator,
    grid: &[f64],
    sampling: &Sampling,
) -> Result<EstimateSeries> {
    check_grid(grid)?;
    check_dims(model, &[psi0.dim(), observable.dim()])?;
    if !psi0.is_normalized() {
        return Err(Error::Precondition("initial state must be normalized".into()));
    }
    let prop = Propagator::new(model, sampling.ctrl)?;
    run_ensemble(sampling, grid, |stream, out| {
        let rng = RngStream::new(sampling.seed, stream);
        let mut walker = Walker::new(&prop, psi0.as_slice().to_vec(), grid[0], rng, NormPolicy::Joint);
        for (&t, o) in grid.iter().zip(out.iter_mut()) {
            walker.advance_to(t).map_err(|e| Error::Trajectory { stream, source: Box::new(e) })?;
            let v = walker.raw_state();
            *o = matrix_element_slices(v, observable, v) / walker.norm_sqr();
        }
        Ok(())
    })
}

/// `⟨φ₀|A(t)|ψ₀⟩ = 2 ⟨⟨ ⟨φ(t)|A|ψ(t)⟩ ⟩⟩` from doubled-space trajectories
/// started in `(φ₀, ψ₀)/√2` at `grid[0]`.
pub fn heisenberg_element(
    model: &LindbladModel,
    phi0: &StateVector,
    psi0: &StateVector,
    observable: &Operator,
    grid: &[f64],
    sampling: &Sampling,
) -> Result<EstimateSeries> {
    check_grid(grid)?;
    check_dims(model, &[phi0.dim(), psi0.dim(), observable.dim()])?;
    if !phi0.is_normalized() || !psi0.is_normalized() {
        return Err(Error::Precondition("initial states must be normalized".into()));
    }
    let theta0 = pair(phi0, psi0)?;
    let weight = theta0.weight();
    let stacked = theta0.stacked();
    let n = model.dim();
    let prop = Propagator::new(model, sampling.ctrl)?;
    run_ensemble(sampling, grid, |stream, out| {
        let rng = RngStream::new(sampling.seed, stream);
        let mut walker = Walker::new(&prop, stacked.clone(), grid[0], rng, NormPolicy::Joint);
        for (&t, o) in grid.iter().zip(out.iter_mut()) {
            walker.advance_to(t).map_err(|e| Error::Trajectory { stream, source: Box::new(e) })?;
            let v = walker.raw_state();
            *o = matrix_element_slices(&v[..n], observable, &v[n..]) * (weight / walker.norm_sqr());
        }
        Ok(())
    })
}
