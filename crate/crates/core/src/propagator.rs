//! Deterministic norm-decaying evolution `i dθ̂/ds = H_eff(s) θ̂` between jumps.
//!
//! States are plain amplitude slices whose length is a multiple of the model
//! dimension; each `dim`-sized block is evolved by the same effective
//! Hamiltonian, which is how the doubled-space operators `diag(H_eff, H_eff)`
//! act. Integration is classical fixed-step RK4. For time-independent models
//! the full-step RK4 map (the degree-4 Taylor polynomial of `exp(−i H_eff h)`)
//! is precomputed once, so a full step costs one matrix-vector product.

use crate::error::{Error, Result};
use crate::hilbert::{norm_sqr, Operator, C64, ZERO};
use crate::model::LindbladModel;

/// Integration and jump-time resolution settings, in units of `1/γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub dt_max: f64,
    pub tol_t: f64,
    /// The step is capped at `safety / ‖H_eff‖∞`.
    pub safety: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { dt_max: 0.01, tol_t: 1e-6, safety: 0.1 }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.dt_max, self.tol_t, self.safety].iter().all(|x| x.is_finite() && *x > 0.0);
        if !all_positive {
            return Err(Error::InvalidArgument("step control values must be positive and finite".into()));
        }
        if self.tol_t >= self.dt_max {
            return Err(Error::InvalidArgument("jump tolerance must be smaller than dt_max".into()));
        }
        Ok(())
    }
}

/// Which part of the state defines the jump-triggering norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormPolicy {
    /// The whole vector (single space or joint doubled-space norm).
    Joint,
    /// Only the first half; the second half is slaved to it.
    Upper,
}

impl NormPolicy {
    #[inline]
    pub fn norm_sqr(self, v: &[C64]) -> f64 {
        match self {
            NormPolicy::Joint => norm_sqr(v),
            NormPolicy::Upper => norm_sqr(&v[..v.len() / 2]),
        }
    }
}

/// Outcome of a jump-time search.
#[derive(Clone, Debug, PartialEq)]
pub enum JumpSearch {
    /// The norm reached the threshold at `time`; `state` is the unnormalized vector there.
    Jump { time: f64, state: Vec<C64> },
    /// The horizon was reached first.
    NoJump { state: Vec<C64> },
}

/// Reusable buffers for RK4 stages.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
    out: Vec<C64>,
}

impl Workspace {
    fn ensure(&mut self, len: usize) {
        if self.tmp.len() != len {
            for k in &mut self.k {
                k.resize(len, ZERO);
            }
            self.tmp.resize(len, ZERO);
            self.out.resize(len, ZERO);
        }
    }
}

/// Precomputed data for a model with constant `H_eff`.
#[derive(Clone, Debug)]
struct ConstantGenerator {
    /// `−i H_eff`
    generator: Operator,
    /// RK4 map for one full step.
    full_step: Operator,
}

/// Fixed-step RK4 integrator bound to one model.
#[derive(Clone, Debug)]
pub struct Propagator<'m> {
    model: &'m LindbladModel,
    ctrl: StepControl,
    step: f64,
    constant: Option<ConstantGenerator>,
}

fn rk4_polynomial(generator: &Operator, h: f64) -> Operator {
    let n = generator.dim();
    let mut out = Operator::identity(n);
    let mut term = Operator::identity(n);
    let scaled = generator.scale(C64::new(h, 0.0));
    for k in 1..=4 {
        term = term.matmul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
        out = &out + &term;
    }
    out
}

impl<'m> Propagator<'m> {
    pub fn new(model: &'m LindbladModel, ctrl: StepControl) -> Result<Self> {
        ctrl.validate()?;
        let bound = model.effective_norm_bound();
        let step = if bound > 0.0 { ctrl.dt_max.min(ctrl.safety / bound) } else { ctrl.dt_max };
        let constant = if model.is_time_independent() {
            let generator = model.effective_hamiltonian(0.0)?.scale(C64::new(0.0, -1.0));
            let full_step = rk4_polynomial(&generator, step);
            Some(ConstantGenerator { generator, full_step })
        } else {
            None
        };
        Ok(Self { model, ctrl, step, constant })
    }

    pub fn model(&self) -> &'m LindbladModel {
        self.model
    }

    pub fn control(&self) -> &StepControl {
        &self.ctrl
    }

    /// Step length actually used.
    pub fn step(&self) -> f64 {
        self.step
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let n = self.model.dim();
        if len == 0 || len % n != 0 {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
        Ok(())
    }

    /// `out = −i H_eff(t) v`, blockwise.
    fn derivative(&self, t: f64, v: &[C64], out: &mut [C64]) -> Result<()> {
        match &self.constant {
            Some(c) => c.generator.apply_blocks_into(v, out),
            None => {
                let g = self.model.effective_hamiltonian(t)?.scale(C64::new(0.0, -1.0));
                g.apply_blocks_into(v, out);
            }
        }
        Ok(())
    }

    /// One RK4 step of length `h` from `(t, v)`, written into `ws.out`.
    fn rk4(&self, t: f64, v: &[C64], h: f64, ws: &mut Workspace) -> Result<()> {
        ws.ensure(v.len());
        if let Some(c) = &self.constant {
            if h == self.step {
                c.full_step.apply_blocks_into(v, &mut ws.out);
                return Ok(());
            }
        }
        let Workspace { k, tmp, out } = ws;
        let [k1, k2, k3, k4] = k;
        self.derivative(t, v, k1)?;
        for ((x, a), y) in tmp.iter_mut().zip(v).zip(k1.iter()) {
            *x = a + y * (0.5 * h);
        }
        self.derivative(t + 0.5 * h, tmp, k2)?;
        for ((x, a), y) in tmp.iter_mut().zip(v).zip(k2.iter()) {
            *x = a + y * (0.5 * h);
        }
        self.derivative(t + 0.5 * h, tmp, k3)?;
        for ((x, a), y) in tmp.iter_mut().zip(v).zip(k3.iter()) {
            *x = a + y * h;
        }
        self.derivative(t + h, tmp, k4)?;
        let w = h / 6.0;
        for i in 0..v.len() {
            out[i] = v[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }
        Ok(())
    }

    fn checked(t: f64, v: &[C64]) -> Result<()> {
        if norm_sqr(v).is_finite() {
            Ok(())
        } else {
            Err(Error::BlowUp { t })
        }
    }

    /// Evolves `state` in place from `t0` to `t1` without renormalizing.
    pub fn evolve_in_place(&self, state: &mut [C64], t0: f64, t1: f64, ws: &mut Workspace) -> Result<()> {
        self.check_len(state.len())?;
        if !(t1 >= t0) {
            return Err(Error::Precondition(format!("evolve requires t1 >= t0 (got {t0} -> {t1})")));
        }
        let mut t = t0;
        let mut k = 0u64;
        while t < t1 {
            let next = (t0 + (k + 1) as f64 * self.step).min(t1);
            let h = if next < t1 { self.step } else { t1 - t };
            self.rk4(t, state, h, ws)?;
            state.copy_from_slice(&ws.out);
            t = next;
            k += 1;
            Self::checked(t, state)?;
        }
        Ok(())
    }

    pub fn evolve(&self, state: &[C64], t0: f64, t1: f64) -> Result<Vec<C64>> {
        let mut v = state.to_vec();
        self.evolve_in_place(&mut v, t0, t1, &mut Workspace::default())?;
        Ok(v)
    }

    /// Advances from `t_start` until the policy norm² first drops to `eta`,
    /// or until `t_end`. The jump time is refined by bisection on the
    /// bracketing step down to `tol_t`. `state` is left at the returned time.
    pub fn find_jump_time_in_place(
        &self,
        state: &mut [C64],
        t_start: f64,
        t_end: f64,
        eta: f64,
        policy: NormPolicy,
        ws: &mut Workspace,
    ) -> Result<Option<f64>> {
        self.check_len(state.len())?;
        let n0 = policy.norm_sqr(state);
        if !(eta > 0.0 && eta <= n0) {
            return Err(Error::Precondition(format!("jump threshold {eta} must lie in (0, {n0}]")));
        }
        if !(t_end >= t_start) {
            return Err(Error::Precondition(format!("horizon {t_end} precedes start {t_start}")));
        }
        if n0 <= eta {
            return Ok(Some(t_start));
        }
        let mut t = t_start;
        let mut k = 0u64;
        while t < t_end {
            let next = (t_start + (k + 1) as f64 * self.step).min(t_end);
            let h = if next < t_end { self.step } else { t_end - t };
            self.rk4(t, state, h, ws)?;
            Self::checked(next, &ws.out)?;
            if policy.norm_sqr(&ws.out) <= eta {
                let time = self.bisect(state, t, h, eta, policy, ws)?;
                return Ok(Some(time));
            }
            state.copy_from_slice(&ws.out);
            t = next;
            k += 1;
        }
        Ok(None)
    }

    /// `state` is at `t` with norm² above `eta`; a step of length `h` crosses it.
    fn bisect(
        &self,
        state: &mut [C64],
        t: f64,
        h: f64,
        eta: f64,
        policy: NormPolicy,
        ws: &mut Workspace,
    ) -> Result<f64> {
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo > self.ctrl.tol_t {
            let mid = 0.5 * (lo + hi);
            self.rk4(t, state, mid, ws)?;
            if policy.norm_sqr(&ws.out) <= eta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let sub = 0.5 * (lo + hi);
        self.rk4(t, state, sub, ws)?;
        state.copy_from_slice(&ws.out);
        Ok(t + sub)
    }

    pub fn find_jump_time(
        &self,
        state: &[C64],
        t_start: f64,
        t_end: f64,
        eta: f64,
        policy: NormPolicy,
    ) -> Result<(f64, JumpSearch)> {
        let mut v = state.to_vec();
        match self.find_jump_time_in_place(&mut v, t_start, t_end, eta, policy, &mut Workspace::default())? {
            Some(time) => Ok((time, JumpSearch::Jump { time, state: v })),
            None => Ok((t_end, JumpSearch::NoJump { state: v })),
        }
    }
}

/// Evolves an unnormalized state (single or stacked doubled) from `t0` to `t1`.
pub fn evolve(model: &LindbladModel, state: &[C64], t0: f64, t1: f64, ctrl: StepControl) -> Result<Vec<C64>> {
    Propagator::new(model, ctrl)?.evolve(state, t0, t1)
}

/// Locates the first time after `t_start` at which `‖θ̂‖² = eta`, up to `t_end`.
pub fn find_jump_time(
    model: &LindbladModel,
    state: &[C64],
    t_start: f64,
    t_end: f64,
    eta: f64,
    ctrl: StepControl,
) -> Result<JumpSearch> {
    Ok(Propagator::new(model, ctrl)?.find_jump_time(state, t_start, t_end, eta, NormPolicy::Joint)?.1)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::LN_2;

    use nalgebra::DMatrix;

    use super::*;
    use crate::hilbert::two_level::*;
    use crate::hilbert::StateVector;
    use crate::model::{Coefficient, HamiltonianTerm};

    /// Independent reference: `exp(−i H_eff t) v` via nalgebra's Padé exponential.
    fn expm_apply(model: &LindbladModel, v: &[C64], t: f64) -> Vec<C64> {
        let n = model.dim();
        let heff = model.effective_hamiltonian(0.0).unwrap();
        let m = DMatrix::from_row_slice(n, n, heff.as_slice()) * C64::new(0.0, -t);
        let u = m.exp();
        let x = nalgebra::DVector::from_column_slice(v);
        (u * x).iter().copied().collect()
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
    }

    #[test]
    fn unitary_limit_preserves_norm() {
        let m = LindbladModel::new(2, vec![HamiltonianTerm::constant(sigma_x().scale(C64::new(3.0, 0.0)))], vec![])
            .unwrap();
        let v = StateVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let out = evolve(&m, v.as_slice(), 0.0, 5.0, StepControl::default()).unwrap();
        assert!((norm_sqr(&out).sqrt() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pure_decay_norm_law() {
        let m = LindbladModel::two_level(0.0, 1.0, 0.0).unwrap();
        let out = evolve(&m, excited().as_slice(), 0.0, LN_2, StepControl::default()).unwrap();
        assert!((norm_sqr(&out) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn driven_atom_matches_matrix_exponential() {
        let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
        let out = evolve(&m, ground().as_slice(), 0.0, 0.1, StepControl::default()).unwrap();
        let reference = expm_apply(&m, ground().as_slice(), 0.1);
        assert!(max_diff(&out, &reference) < 1e-7, "{}", max_diff(&out, &reference));
    }

    #[test]
    fn fourth_order_convergence() {
        let m = LindbladModel::two_level(10.0, 1.0, 0.4).unwrap();
        let t = 1.0;
        let reference = expm_apply(&m, ground().as_slice(), t);
        let err = |dt: f64| {
            let ctrl = StepControl { dt_max: dt, tol_t: 1e-9, safety: 10.0 };
            max_diff(&evolve(&m, ground().as_slice(), 0.0, t, ctrl).unwrap(), &reference)
        };
        let ratio = err(0.04) / err(0.02);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn norm_is_monotone_along_steps() {
        let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
        let p = Propagator::new(&m, StepControl::default()).unwrap();
        let mut v = ground().into_vec();
        let mut ws = Workspace::default();
        let mut last = 1.0;
        for k in 0..500 {
            let t = k as f64 * p.step();
            p.evolve_in_place(&mut v, t, t + p.step(), &mut ws).unwrap();
            let n = norm_sqr(&v);
            assert!(n <= last + 1e-15);
            last = n;
        }
    }

    #[test]
    fn time_dependent_drive_matches_constant_equivalent() {
        // cos(0·t) is constant but flagged time dependent through the table path.
        let table = Coefficient::PiecewiseConstant(vec![(0.0, 5.0), (10.0, 5.0)]);
        let td = LindbladModel::new(
            2,
            vec![HamiltonianTerm { base: sigma_x(), coeff: table }],
            vec![crate::model::DecayChannel { rate: 1.0, jump_op: sigma_minus() }],
        )
        .unwrap();
        let ti = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
        let a = evolve(&td, ground().as_slice(), 0.0, 2.0, StepControl::default()).unwrap();
        let b = evolve(&ti, ground().as_slice(), 0.0, 2.0, StepControl::default()).unwrap();
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn jump_time_pure_decay() {
        let m = LindbladModel::two_level(0.0, 1.0, 0.0).unwrap();
        let ctrl = StepControl::default();
        match find_jump_time(&m, excited().as_slice(), 0.0, 10.0, 0.5, ctrl).unwrap() {
            JumpSearch::Jump { time, state } => {
                assert!((time - LN_2).abs() <= ctrl.tol_t, "T = {time}");
                assert!((norm_sqr(&state) - 0.5).abs() < 1e-5);
            }
            other => panic!("expected a jump, got {other:?}"),
        }
    }

    #[test]
    fn jump_time_boundary_and_no_jump() {
        let m = LindbladModel::two_level(0.0, 1.0, 0.0).unwrap();
        let ctrl = StepControl::default();
        let p = Propagator::new(&m, ctrl).unwrap();
        let (t, _) = p.find_jump_time(excited().as_slice(), 2.0, 5.0, 1.0, NormPolicy::Joint).unwrap();
        assert_eq!(t, 2.0);

        let closed = LindbladModel::new(2, vec![HamiltonianTerm::constant(sigma_x())], vec![]).unwrap();
        let r = find_jump_time(&closed, excited().as_slice(), 0.0, 5.0, 0.9, ctrl).unwrap();
        assert!(matches!(r, JumpSearch::NoJump { .. }));
    }

    #[test]
    fn jump_time_preconditions() {
        let m = LindbladModel::two_level(0.0, 1.0, 0.0).unwrap();
        let ctrl = StepControl::default();
        for eta in [0.0, -0.1, 1.5] {
            assert!(matches!(
                find_jump_time(&m, excited().as_slice(), 0.0, 1.0, eta, ctrl),
                Err(Error::Precondition(_))
            ));
        }
    }

    #[test]
    fn jump_time_is_deterministic() {
        let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
        let ctrl = StepControl::default();
        let a = find_jump_time(&m, ground().as_slice(), 0.0, 10.0, 0.37, ctrl).unwrap();
        let b = find_jump_time(&m, ground().as_slice(), 0.0, 10.0, 0.37, ctrl).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blow_up_is_reported() {
        let m = LindbladModel::new(2, vec![HamiltonianTerm::constant(sigma_x())], vec![]).unwrap();
        let v = vec![C64::new(f64::MAX, 0.0), C64::new(f64::MAX, 0.0)];
        assert!(matches!(evolve(&m, &v, 0.0, 1.0, StepControl::default()), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn rejects_bad_control() {
        let m = LindbladModel::two_level(1.0, 1.0, 0.0).unwrap();
        let bad = StepControl { dt_max: 1e-7, tol_t: 1e-6, safety: 0.1 };
        assert!(Propagator::new(&m, bad).is_err());
    }
}
