//! Multitime correlation estimators.
//!
//! * `Doubled`: evolve `φ` in the system space up to the first insertion,
//!   then carry `θ = (φ, ψ)` in the doubled space. At each insertion time the
//!   pair is replaced by `(Fφ, Gψ)/‖(Fφ, Gψ)‖` and the squared norm is
//!   multiplied into the trajectory weight. The sample at a final time is
//!   `weight · ⟨φ|A|ψ⟩`.
//! * `Kick`: the same with `G → εG` and the result divided by `εᵐ`; in the
//!   limit `ε → 0` the upper component alone drives the jumps.
//! * `Four`: for `⟨A(t) B(s)⟩`, the polarization identity
//!   `B|φ⟩⟨φ| = ¼ Σ_α ᾱ (1 + αB)|φ⟩⟨φ|(1 + αB)†`, `α ∈ {1, −1, i, −i}`,
//!   turns the insertion into four single-space trajectories.

use std::fmt;

use crate::error::{Error, Result};
use crate::hilbert::{matrix_element_slices, norm_sqr, Operator, StateVector, C64, ZERO};
use crate::model::LindbladModel;
use crate::propagator::{NormPolicy, Propagator};
use crate::rng::RngStream;
use crate::trajectory::Walker;

use super::schedule::{group_insertions, CorrelationSpec, FGSchedule};
use super::{check_grid, run_ensemble, EstimateSeries, Sampling};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorrelationMethod {
    Doubled,
    Kick { epsilon: f64 },
    KickLimit,
    Four,
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrelationMethod::Doubled => write!(f, "doubled"),
            CorrelationMethod::Kick { .. } => write!(f, "kick"),
            CorrelationMethod::KickLimit => write!(f, "limit"),
            CorrelationMethod::Four => write!(f, "four"),
        }
    }
}

fn mismatch(method: CorrelationMethod, reason: &str) -> Error {
    Error::MethodMismatch { method: method.to_string(), reason: reason.into() }
}

/// Estimates the correlation function of `spec` at each of `final_times`.
pub fn correlation(
    model: &LindbladModel,
    spec: &CorrelationSpec,
    final_times: &[f64],
    method: CorrelationMethod,
    sampling: &Sampling,
) -> Result<EstimateSeries> {
    spec.validate(model.dim())?;
    check_grid(final_times)?;
    spec.validate_final_times(final_times)?;
    if !spec.initial.is_normalized() {
        return Err(Error::Precondition("initial state must be normalized".into()));
    }
    match method {
        CorrelationMethod::Doubled => doubled(model, spec, final_times, sampling, 1.0, false),
        CorrelationMethod::Kick { epsilon } => {
            if !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
            }
            if !spec.a_ops.is_empty() {
                return Err(mismatch(method, "kick probing supports B insertions only"));
            }
            doubled(model, spec, final_times, sampling, epsilon, false)
        }
        CorrelationMethod::KickLimit => {
            if !spec.a_ops.is_empty() {
                return Err(mismatch(method, "kick probing supports B insertions only"));
            }
            doubled(model, spec, final_times, sampling, 1.0, true)
        }
        CorrelationMethod::Four => {
            if !spec.a_ops.is_empty() || spec.b_ops.len() != 1 {
                return Err(mismatch(method, "the four-trajectory method handles two-time ⟨A(t) B(s)⟩ only"));
            }
            four(model, spec, final_times, sampling)
        }
    }
}

/// `⟨A(τ) B⟩` after a burn-in of `burn_in` from `initial`; the returned grid is `τ`.
pub fn stationary_correlation(
    model: &LindbladModel,
    initial: &StateVector,
    burn_in: f64,
    a: &Operator,
    b: &Operator,
    taus: &[f64],
    method: CorrelationMethod,
    sampling: &Sampling,
) -> Result<EstimateSeries> {
    let spec = super::stationary_spec(initial.clone(), burn_in, a.clone(), b.clone());
    let finals: Vec<f64> = taus.iter().map(|t| burn_in + t).collect();
    let mut series = correlation(model, &spec, &finals, method, sampling)?;
    series.grid = taus.to_vec();
    Ok(series)
}

/// Shared loop for the doubled and kick estimators. `scale` multiplies every
/// `G`; `limit` slaves the lower block to the upper one.
fn doubled(
    model: &LindbladModel,
    spec: &CorrelationSpec,
    finals: &[f64],
    sampling: &Sampling,
    scale: f64,
    limit: bool,
) -> Result<EstimateSeries> {
    let n = model.dim();
    let schedule: FGSchedule = group_insertions(n, &spec.a_ops, &spec.b_ops);
    let scaled_g: Vec<Operator> = schedule.entries.iter().map(|e| e.g.scale(C64::new(scale, 0.0))).collect();
    let divisor = scale.powi(spec.b_ops.len() as i32);
    let prop = Propagator::new(model, sampling.ctrl)?;
    let observable = &spec.observable;
    run_ensemble(sampling, finals, |stream, out| {
        let wrap = |e: Error| Error::Trajectory { stream, source: Box::new(e) };
        let rng = RngStream::new(sampling.seed, stream);
        let mut walker = Walker::new(&prop, spec.initial.as_slice().to_vec(), spec.t0, rng, NormPolicy::Joint);
        let mut weight = 1.0;
        let mut cur = Vec::with_capacity(2 * n);
        for (k, (entry, g)) in schedule.entries.iter().zip(&scaled_g).enumerate() {
            walker.advance_to(entry.time).map_err(wrap)?;
            walker.normalized_into(&mut cur);
            let (phi, psi) = if k == 0 { (&cur[..n], &cur[..n]) } else { (&cur[..n], &cur[n..]) };
            let mut next = vec![ZERO; 2 * n];
            {
                let (up, lo) = next.split_at_mut(n);
                entry.f.apply_into(phi, up);
                g.apply_into(psi, lo);
            }
            if limit {
                // entry.f is the identity here; the upper block stays normalized.
                walker.replace_state(next, NormPolicy::Upper);
            } else {
                let w = norm_sqr(&next);
                if w == 0.0 {
                    out.iter_mut().for_each(|o| *o = ZERO);
                    return Ok(());
                }
                let inv = 1.0 / w.sqrt();
                next.iter_mut().for_each(|z| *z *= inv);
                weight *= w;
                walker.replace_state(next, NormPolicy::Joint);
            }
        }
        let factor = weight / divisor;
        for (&t, o) in finals.iter().zip(out.iter_mut()) {
            walker.advance_to(t).map_err(wrap)?;
            let v = walker.raw_state();
            let (phi, psi) = if v.len() == n { (v, v) } else { v.split_at(n) };
            *o = matrix_element_slices(phi, observable, psi) * (factor / walker.norm_sqr());
        }
        Ok(())
    })
}

const ALPHAS: [C64; 4] = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)];

fn four(model: &LindbladModel, spec: &CorrelationSpec, finals: &[f64], sampling: &Sampling) -> Result<EstimateSeries> {
    let n = model.dim();
    let insertion = &spec.b_ops[0];
    let prop = Propagator::new(model, sampling.ctrl)?;
    let observable = &spec.observable;
    // (1 + αB) for each α
    let shifted: Vec<Operator> = ALPHAS
        .iter()
        .map(|&a| &Operator::identity(n) + &insertion.op.scale(a))
        .collect();
    run_ensemble(sampling, finals, |stream, out| {
        let wrap = |e: Error| Error::Trajectory { stream, source: Box::new(e) };
        let rng = RngStream::new(sampling.seed, stream);
        let mut walker = Walker::new(&prop, spec.initial.as_slice().to_vec(), spec.t0, rng, NormPolicy::Joint);
        walker.advance_to(insertion.time).map_err(wrap)?;
        let phi = walker.normalized();
        out.iter_mut().for_each(|o| *o = ZERO);
        let mut chi = vec![ZERO; n];
        for (lane, (alpha, op)) in ALPHAS.iter().zip(&shifted).enumerate() {
            op.apply_into(&phi, &mut chi);
            let w = norm_sqr(&chi);
            if w == 0.0 {
                continue;
            }
            let inv = 1.0 / w.sqrt();
            let start: Vec<C64> = chi.iter().map(|z| z * inv).collect();
            let sub_rng = RngStream::with_lane(sampling.seed, stream, lane as u32 + 1);
            let mut sub = Walker::new(&prop, start, insertion.time, sub_rng, NormPolicy::Joint);
            let coeff = alpha.conj() * (0.25 * w);
            for (&t, o) in finals.iter().zip(out.iter_mut()) {
                sub.advance_to(t).map_err(wrap)?;
                let v = sub.raw_state();
                *o += coeff * matrix_element_slices(v, observable, v) / sub.norm_sqr();
            }
        }
        Ok(())
    })
}
