//! The piecewise deterministic jump process in the system space and in the
//! doubled space `H ⊕ H`.
//!
//! A [`Walker`] carries one realization: the unnormalized state `θ̂`, the
//! current jump threshold `η` and its random stream. Between jumps the state
//! follows `i dθ̂/ds = H_eff θ̂`; a jump happens when `‖θ̂‖²` reaches `η`,
//! the channel is drawn with probability `γᵢ‖Jᵢθ̂‖² / Σⱼ γⱼ‖Jⱼθ̂‖²` and the
//! state becomes `Jᵢθ̂ / ‖Jᵢθ̂‖`. Doubled-space states are stacked vectors
//! `(φ, ψ)` on which every operator acts blockwise.
//!
//! When the state is replaced mid-flight (an operator insertion), the
//! pending threshold is rescaled to `η / ‖θ̂‖²`. Conditioned on no jump so far
//! this is again uniform on `(0, 1)`, so the waiting-time law is unchanged
//! and no extra draw is needed.

use crate::error::{Error, Result};
use crate::hilbert::{norm_sqr, pair, Operator, PairedState, StateVector, C64, ZERO};
use crate::model::{DecayChannel, LindbladModel};
use crate::propagator::{NormPolicy, Propagator, StepControl, Workspace};
use crate::rng::RngStream;

const NORMALIZED_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub channel: usize,
}

/// A state on either side of the lifting.
#[derive(Clone, Debug, PartialEq)]
pub enum TrajState {
    Single(StateVector),
    Paired(PairedState),
}

impl TrajState {
    pub fn stacked(&self) -> Vec<C64> {
        match self {
            TrajState::Single(v) => v.as_slice().to_vec(),
            TrajState::Paired(p) => p.stacked(),
        }
    }

    pub fn weight(&self) -> f64 {
        match self {
            TrajState::Single(_) => 1.0,
            TrajState::Paired(p) => p.weight(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.stacked())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryStatus {
    Completed,
    /// An insertion annihilated both components; the contribution is exactly zero.
    ZeroWeight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub jumps: Vec<Jump>,
    pub grid: Vec<f64>,
    /// Normalized state at each grid time.
    pub snapshots: Vec<TrajState>,
    /// Product of the insertion norm² factors.
    pub weight: f64,
    pub status: TrajectoryStatus,
}

/// How the probe operator `B` enters the doubled-space state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KickMode {
    /// `(φ, Bφ)` with the joint norm driving jumps.
    Doubled,
    /// `(φ, εBφ)`; estimates are divided by `ε` per insertion.
    Epsilon(f64),
    /// `ε → 0`: `φ` jumps on its own and `ψ` follows the same jump times,
    /// channels and normalizations.
    Limit,
}

impl KickMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            KickMode::Epsilon(e) if !(e.is_finite() && *e > 0.0) => {
                Err(Error::InvalidArgument(format!("epsilon must be positive, got {e}")))
            }
            _ => Ok(()),
        }
    }

    pub fn policy(&self) -> NormPolicy {
        match self {
            KickMode::Limit => NormPolicy::Upper,
            _ => NormPolicy::Joint,
        }
    }
}

/// Draws a channel by cumulative inversion of `u` over `γᵢ‖Jᵢθ̂‖²`.
///
/// `state` may be a single or stacked doubled vector; only the part selected
/// by `policy` contributes to the weights.
pub fn select_channel(state: &[C64], channels: &[DecayChannel], u: f64, policy: NormPolicy) -> Result<usize> {
    let mut buf = vec![ZERO; state.len()];
    let rates: Vec<f64> = channels
        .iter()
        .map(|ch| {
            ch.jump_op.apply_blocks_into(state, &mut buf);
            ch.rate * policy.norm_sqr(&buf)
        })
        .collect();
    pick(&rates, u).ok_or(Error::DarkState { t: f64::NAN })
}

fn pick(rates: &[f64], u: f64) -> Option<usize> {
    let total: f64 = rates.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &r) in rates.iter().enumerate() {
        if r > 0.0 {
            last_positive = Some(i);
            acc += r;
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// `Jθ̂ / ‖Jθ̂‖` with the norm taken according to `policy`.
pub fn apply_jump(state: &[C64], channel: &DecayChannel, policy: NormPolicy) -> Result<Vec<C64>> {
    let mut out = vec![ZERO; state.len()];
    channel.jump_op.apply_blocks_into(state, &mut out);
    let n = policy.norm_sqr(&out).sqrt();
    if !(n > 0.0) {
        return Err(Error::Precondition("jump operator annihilates the state".into()));
    }
    for z in &mut out {
        *z /= n;
    }
    Ok(out)
}

/// One realization of the jump process.
pub struct Walker<'p, 'm> {
    prop: &'p Propagator<'m>,
    state: Vec<C64>,
    time: f64,
    eta: f64,
    policy: NormPolicy,
    rng: RngStream,
    jumps: Vec<Jump>,
    ws: Workspace,
    images: Vec<Vec<C64>>,
    rates: Vec<f64>,
}

impl<'p, 'm> Walker<'p, 'm> {
    /// Starts from a state that is normalized under `policy`.
    pub fn new(prop: &'p Propagator<'m>, initial: Vec<C64>, t0: f64, mut rng: RngStream, policy: NormPolicy) -> Self {
        let eta = rng.uniform_positive();
        let n_ch = prop.model().channels().len();
        Self {
            prop,
            state: initial,
            time: t0,
            eta,
            policy,
            rng,
            jumps: Vec::new(),
            ws: Workspace::default(),
            images: vec![Vec::new(); n_ch],
            rates: vec![0.0; n_ch],
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn into_jumps(self) -> Vec<Jump> {
        self.jumps
    }

    /// Unnormalized `θ̂`.
    pub fn raw_state(&self) -> &[C64] {
        &self.state
    }

    pub fn policy(&self) -> NormPolicy {
        self.policy
    }

    pub fn norm_sqr(&self) -> f64 {
        self.policy.norm_sqr(&self.state)
    }

    /// `θ̂ / ‖θ̂‖` written into `out`.
    pub fn normalized_into(&self, out: &mut Vec<C64>) {
        let inv = 1.0 / self.norm_sqr().sqrt();
        out.clear();
        out.extend(self.state.iter().map(|z| z * inv));
    }

    pub fn normalized(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.state.len());
        self.normalized_into(&mut out);
        out
    }

    /// Runs the jump process up to `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.time {
            return Err(Error::Precondition(format!("cannot advance backwards from {} to {t}", self.time)));
        }
        while self.time < t {
            let hit = self.prop.find_jump_time_in_place(
                &mut self.state,
                self.time,
                t,
                self.eta,
                self.policy,
                &mut self.ws,
            )?;
            match hit {
                Some(time) => {
                    self.time = time;
                    self.jump()?;
                }
                None => self.time = t,
            }
        }
        Ok(())
    }

    fn jump(&mut self) -> Result<()> {
        let channels = self.prop.model().channels();
        for (i, ch) in channels.iter().enumerate() {
            let img = &mut self.images[i];
            img.resize(self.state.len(), ZERO);
            ch.jump_op.apply_blocks_into(&self.state, img);
            self.rates[i] = ch.rate * self.policy.norm_sqr(img);
        }
        let u = self.rng.uniform();
        let chosen = pick(&self.rates, u).ok_or(Error::DarkState { t: self.time })?;
        let img = &self.images[chosen];
        let inv = 1.0 / self.policy.norm_sqr(img).sqrt();
        for (s, z) in self.state.iter_mut().zip(img) {
            *s = z * inv;
        }
        self.jumps.push(Jump { time: self.time, channel: chosen });
        self.eta = self.rng.uniform_positive();
        Ok(())
    }

    /// Replaces the state at the current time by `new`, which must be
    /// normalized under `policy`. The pending threshold is rescaled so the
    /// remaining waiting time keeps its law.
    pub fn replace_state(&mut self, new: Vec<C64>, policy: NormPolicy) {
        let current = self.norm_sqr();
        self.eta = (self.eta / current).clamp(crate::rng::MIN_UNIFORM, 1.0);
        self.state = new;
        self.policy = policy;
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid must not be empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn to_traj_state(like: &TrajState, normalized: &[C64], weight: f64) -> TrajState {
    match like {
        TrajState::Single(_) => TrajState::Single(StateVector::from_vec_unchecked(normalized.to_vec())),
        TrajState::Paired(_) => TrajState::Paired(PairedState::from_stacked(normalized, weight)),
    }
}

/// Samples one trajectory starting at `grid[0]` and records the normalized
/// state at every grid time.
///
/// A paired initial state may be evolved either with the base model (the
/// lifting is applied blockwise) or with an explicitly lifted model.
pub fn run_trajectory(
    model: &LindbladModel,
    initial: &TrajState,
    grid: &[f64],
    rng: RngStream,
    ctrl: StepControl,
) -> Result<TrajectoryRecord> {
    check_grid(grid)?;
    let stacked = initial.stacked();
    let n2 = norm_sqr(&stacked);
    if (n2.sqrt() - 1.0).abs() > NORMALIZED_TOL {
        return Err(Error::Precondition(format!("initial state has norm {}", n2.sqrt())));
    }
    let prop = Propagator::new(model, ctrl)?;
    let stream = rng.stream_index();
    let wrap = |e: Error| Error::Trajectory { stream, source: Box::new(e) };
    let mut walker = Walker::new(&prop, stacked, grid[0], rng, NormPolicy::Joint);
    let weight = initial.weight();
    let mut snapshots = Vec::with_capacity(grid.len());
    let mut buf = Vec::new();
    for &t in grid {
        walker.advance_to(t).map_err(wrap)?;
        walker.normalized_into(&mut buf);
        snapshots.push(to_traj_state(initial, &buf, weight));
    }
    Ok(TrajectoryRecord {
        jumps: walker.into_jumps(),
        grid: grid.to_vec(),
        snapshots,
        weight,
        status: TrajectoryStatus::Completed,
    })
}

/// Probes a single-space trajectory with operator insertions `(time, B)`.
///
/// `φ` evolves from `(phi0, t0)` in the system space. At the first insertion
/// the doubled state `(φ, εBφ)` is formed (with `ε = 1` for
/// [`KickMode::Doubled`]); later insertions act on the lower component only.
/// Snapshots are taken at `grid`, which must not precede the last insertion.
/// In [`KickMode::Limit`] the upper block of each snapshot is normalized and
/// the lower block holds the first-order coefficient in `ε`.
pub fn run_trajectory_kick(
    model: &LindbladModel,
    phi0: &StateVector,
    t0: f64,
    insertions: &[(f64, Operator)],
    grid: &[f64],
    rng: RngStream,
    mode: KickMode,
    ctrl: StepControl,
) -> Result<TrajectoryRecord> {
    mode.validate()?;
    check_grid(grid)?;
    if insertions.is_empty() {
        return Err(Error::InvalidArgument("kick trajectories need at least one insertion".into()));
    }
    if !phi0.is_normalized() {
        return Err(Error::Precondition("initial state must be normalized".into()));
    }
    if phi0.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: phi0.dim() });
    }
    let mut last = t0;
    for (t, op) in insertions {
        if *t < last {
            return Err(Error::UnorderedSpec("insertion times must be non-decreasing and >= t0".into()));
        }
        if op.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: op.dim() });
        }
        last = *t;
    }
    if grid[0] < last {
        return Err(Error::UnorderedSpec("grid must not precede the last insertion".into()));
    }

    let prop = Propagator::new(model, ctrl)?;
    let stream = rng.stream_index();
    let wrap = |e: Error| Error::Trajectory { stream, source: Box::new(e) };
    let mut walker = Walker::new(&prop, phi0.as_slice().to_vec(), t0, rng, NormPolicy::Joint);
    let scale = match mode {
        KickMode::Epsilon(e) => e,
        _ => 1.0,
    };
    let n = model.dim();
    let mut weight = 1.0;
    let mut buf = Vec::new();
    for (k, (t, op)) in insertions.iter().enumerate() {
        walker.advance_to(*t).map_err(wrap)?;
        walker.normalized_into(&mut buf);
        let (upper, lower_src) = if k == 0 { (&buf[..], &buf[..]) } else { buf.split_at(n) };
        let upper = StateVector::from_vec_unchecked(upper[..n].to_vec());
        let lower = op.apply(&StateVector::from_vec_unchecked(lower_src[..n].to_vec()))?.scaled(C64::new(scale, 0.0));
        match mode {
            KickMode::Limit => {
                let mut stacked = upper.into_vec();
                stacked.extend_from_slice(lower.as_slice());
                walker.replace_state(stacked, NormPolicy::Upper);
            }
            _ => match pair(&upper, &lower) {
                Ok(theta) => {
                    weight *= theta.weight();
                    walker.replace_state(theta.stacked(), NormPolicy::Joint);
                }
                Err(Error::ZeroWeightInsertion) => {
                    let zero = TrajState::Paired(PairedState::from_parts_unchecked(
                        StateVector::zeros(n),
                        StateVector::zeros(n),
                        0.0,
                    ));
                    return Ok(TrajectoryRecord {
                        jumps: walker.into_jumps(),
                        grid: grid.to_vec(),
                        snapshots: vec![zero; grid.len()],
                        weight: 0.0,
                        status: TrajectoryStatus::ZeroWeight,
                    });
                }
                Err(e) => return Err(e),
            },
        }
    }
    let mut snapshots = Vec::with_capacity(grid.len());
    for &t in grid {
        walker.advance_to(t).map_err(wrap)?;
        walker.normalized_into(&mut buf);
        snapshots.push(TrajState::Paired(PairedState::from_stacked(&buf, weight)));
    }
    Ok(TrajectoryRecord {
        jumps: walker.into_jumps(),
        grid: grid.to_vec(),
        snapshots,
        weight,
        status: TrajectoryStatus::Completed,
    })
}
