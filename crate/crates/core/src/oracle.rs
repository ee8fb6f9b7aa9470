//! Dense deterministic reference for the stochastic estimators.
//!
//! The master equation is integrated directly with fixed-step RK4 on the
//! `N × N` matrix; time-independent models use a precomputed one-step map
//! on the vectorized density matrix. A matrix-exponential propagator and a
//! null-space steady state are available as independent cross-checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::CorrelationSpec;
use crate::hilbert::{Operator, StateVector, C64, ONE};
use crate::model::LindbladModel;
use crate::propagator::StepControl;

/// Step settings for the oracle; finer than the trajectory default.
pub fn default_control() -> StepControl {
    StepControl { dt_max: 1e-3, tol_t: 1e-9, safety: 0.05 }
}

/// A (possibly non-physical) density matrix such as `|ψ₀⟩⟨φ₀|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn new(op: Operator) -> Self {
        Self(op)
    }

    pub fn pure(psi: &StateVector) -> Self {
        Self(Operator::outer(psi, psi))
    }

    /// `|ψ⟩⟨φ|`
    pub fn outer(psi: &StateVector, phi: &StateVector) -> Self {
        Self(Operator::outer(psi, phi))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(Operator::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0.get(row, col)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `Tr{A ρ}`
    pub fn expectation(&self, a: &Operator) -> C64 {
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += a.get(i, k) * self.0.get(k, i);
            }
        }
        acc
    }

    /// Smallest eigenvalue of the hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let h = (&self.0 + &self.0.adjoint()).scale(C64::new(0.5, 0.0));
        let m = DMatrix::from_row_slice(n, n, h.as_slice());
        m.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian to 1e−10, unit trace to 1e−10 and eigenvalues ≥ −1e−8.
    pub fn is_physical(&self) -> bool {
        self.0.is_hermitian(1e-10) && (self.trace() - ONE).norm() <= 1e-10 && self.min_eigenvalue() >= -1e-8
    }

    fn to_vec(&self) -> DVector<C64> {
        DVector::from_row_slice(self.0.as_slice())
    }

    fn from_vec(dim: usize, v: &DVector<C64>) -> Self {
        Self(Operator::new(dim, v.iter().copied().collect()).expect("finite entries"))
    }
}

/// `L(t)ρ = −i[H(t), ρ] + ½ Σᵢ γᵢ (2JᵢρJᵢ† − Jᵢ†Jᵢρ − ρJᵢ†Jᵢ)`
pub fn liouvillian_apply(model: &LindbladModel, t: f64, rho: &Operator) -> Result<Operator> {
    if rho.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: rho.dim() });
    }
    let h = model.hamiltonian_at(t)?;
    let minus_i = C64::new(0.0, -1.0);
    let mut out = (&h.matmul(rho) - &rho.matmul(&h)).scale(minus_i);
    // −(½ΣγJ†J)ρ − ρ(½ΣγJ†J)
    let d = model.damping();
    out = &out - &(&d.matmul(rho) + &rho.matmul(d));
    for ch in model.channels() {
        if ch.rate == 0.0 {
            continue;
        }
        let jump = ch.jump_op.matmul(rho).matmul(&ch.jump_op.adjoint());
        out = &out + &jump.scale(C64::new(ch.rate, 0.0));
    }
    Ok(out)
}

/// Matrix of `L(t)` acting on row-major `vec(ρ)`.
pub fn liouvillian_matrix(model: &LindbladModel, t: f64) -> Result<DMatrix<C64>> {
    let n = model.dim();
    let mut l = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let mut basis = Operator::zeros(n);
            basis.set(i, j, ONE);
            let col = liouvillian_apply(model, t, &basis)?;
            for (r, z) in col.as_slice().iter().enumerate() {
                l[(r, i * n + j)] = *z;
            }
        }
    }
    Ok(l)
}

/// Propagation super-operator `V(t₁, t₀)` on row-major `vec(ρ)`.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub matrix: DMatrix<C64>,
    pub t0: f64,
    pub t1: f64,
}

impl Propagator {
    /// `exp(L (t₁ − t₀))` for a time-independent model.
    pub fn exponential(model: &LindbladModel, t0: f64, t1: f64) -> Result<Self> {
        if !model.is_time_independent() {
            return Err(Error::Precondition("matrix exponential requires a time-independent model".into()));
        }
        let l = liouvillian_matrix(model, t0)?;
        Ok(Self { matrix: (l * C64::new(t1 - t0, 0.0)).exp(), t0, t1 })
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_vec(rho.dim(), &(&self.matrix * rho.to_vec()))
    }

    /// Largest deviation of `Σᵢ V[(i,i), ·]` from the trace functional.
    pub fn trace_defect(&self) -> f64 {
        let n2 = self.matrix.nrows();
        let n = (n2 as f64).sqrt().round() as usize;
        let mut worst = 0.0f64;
        for col in 0..n2 {
            let s: C64 = (0..n).map(|i| self.matrix[(i * n + i, col)]).sum();
            let target = if col % (n + 1) == 0 { ONE } else { C64::new(0.0, 0.0) };
            worst = worst.max((s - target).norm());
        }
        worst
    }
}

enum Stepper {
    /// One-step RK4 map on `vec(ρ)`.
    Constant(DMatrix<C64>),
    TimeDependent,
}

/// Fixed-step RK4 master-equation integrator bound to one model.
pub struct MasterIntegrator<'m> {
    model: &'m LindbladModel,
    step: f64,
    stepper: Stepper,
}

impl<'m> MasterIntegrator<'m> {
    pub fn new(model: &'m LindbladModel, ctrl: StepControl) -> Result<Self> {
        ctrl.validate()?;
        let jump_bound: f64 = model.channels().iter().map(|c| c.rate * c.jump_op.norm_inf().powi(2)).sum();
        let bound = 2.0 * model.effective_norm_bound() + jump_bound;
        let step = if bound > 0.0 { ctrl.dt_max.min(ctrl.safety / bound) } else { ctrl.dt_max };
        let stepper = if model.is_time_independent() {
            let l = liouvillian_matrix(model, 0.0)? * C64::new(step, 0.0);
            let n2 = l.nrows();
            let mut map = DMatrix::identity(n2, n2);
            let mut term = DMatrix::identity(n2, n2);
            for k in 1..=4 {
                term = &term * &l * C64::new(1.0 / k as f64, 0.0);
                map += &term;
            }
            Stepper::Constant(map)
        } else {
            Stepper::TimeDependent
        };
        Ok(Self { model, step, stepper })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn rk4(&self, t: f64, rho: &Operator, h: f64) -> Result<Operator> {
        let half = C64::new(0.5 * h, 0.0);
        let k1 = liouvillian_apply(self.model, t, rho)?;
        let k2 = liouvillian_apply(self.model, t + 0.5 * h, &(rho + &k1.scale(half)))?;
        let k3 = liouvillian_apply(self.model, t + 0.5 * h, &(rho + &k2.scale(half)))?;
        let k4 = liouvillian_apply(self.model, t + h, &(rho + &k3.scale(C64::new(h, 0.0))))?;
        let sum = &(&k1 + &k4) + &(&k2 + &k3).scale(C64::new(2.0, 0.0));
        Ok(rho + &sum.scale(C64::new(h / 6.0, 0.0)))
    }

    pub fn integrate(&self, rho0: &DensityMatrix, t0: f64, t1: f64) -> Result<DensityMatrix> {
        if rho0.dim() != self.model.dim() {
            return Err(Error::DimensionMismatch { expected: self.model.dim(), found: rho0.dim() });
        }
        if !(t1 >= t0) {
            return Err(Error::Precondition(format!("integrate_master requires t1 >= t0 (got {t0} -> {t1})")));
        }
        let n = rho0.dim();
        let mut t = t0;
        let mut k = 0u64;
        match &self.stepper {
            Stepper::Constant(map) => {
                let mut v = rho0.to_vec();
                while t < t1 {
                    let next = (t0 + (k + 1) as f64 * self.step).min(t1);
                    if next < t1 {
                        v = map * v;
                    } else {
                        let rho = DensityMatrix::from_vec(n, &v);
                        v = DensityMatrix(self.rk4(t, &rho.0, t1 - t)?).to_vec();
                    }
                    t = next;
                    k += 1;
                    if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                        return Err(Error::BlowUp { t });
                    }
                }
                Ok(DensityMatrix::from_vec(n, &v))
            }
            Stepper::TimeDependent => {
                let mut rho = rho0.0.clone();
                while t < t1 {
                    let next = (t0 + (k + 1) as f64 * self.step).min(t1);
                    rho = self.rk4(t, &rho, next - t)?;
                    t = next;
                    k += 1;
                    if !rho.as_slice().iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                        return Err(Error::BlowUp { t });
                    }
                }
                Ok(DensityMatrix(rho))
            }
        }
    }
}

/// `ρ(t₁)` from `ρ(t₀) = rho0`; `rho0` need not be positive or hermitian.
pub fn integrate_master(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    ctrl: StepControl,
) -> Result<DensityMatrix> {
    MasterIntegrator::new(model, ctrl)?.integrate(rho0, t0, t1)
}

/// `Tr{A V(t, t₀) |ψ₀⟩⟨φ₀|}` at each time of `grid` (with `t₀ = grid[0]`).
pub fn heisenberg_oracle(
    model: &LindbladModel,
    phi0: &StateVector,
    psi0: &StateVector,
    a: &Operator,
    grid: &[f64],
    ctrl: StepControl,
) -> Result<Vec<C64>> {
    let integ = MasterIntegrator::new(model, ctrl)?;
    let mut rho = DensityMatrix::outer(psi0, phi0);
    let mut t = grid[0];
    let mut out = Vec::with_capacity(grid.len());
    for &next in grid {
        rho = integ.integrate(&rho, t, next)?;
        t = next;
        out.push(rho.expectation(a));
    }
    Ok(out)
}

/// `Tr{A ρ(t)}` for `ρ(grid[0]) = rho0`.
pub fn expectation_oracle(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    a: &Operator,
    grid: &[f64],
    ctrl: StepControl,
) -> Result<Vec<C64>> {
    let integ = MasterIntegrator::new(model, ctrl)?;
    let mut rho = rho0.clone();
    let mut t = grid[0];
    let mut out = Vec::with_capacity(grid.len());
    for &next in grid {
        rho = integ.integrate(&rho, t, next)?;
        t = next;
        out.push(rho.expectation(a));
    }
    Ok(out)
}

/// Settings for [`steady_state`].
#[derive(Clone, Copy, Debug)]
pub struct SteadyStateOptions {
    /// Stop once `max |L ρ|` falls below this.
    pub tolerance: f64,
    pub horizon: f64,
    pub ctrl: StepControl,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, horizon: 1e4, ctrl: default_control() }
    }
}

/// Stationary state by long-time integration from the maximally mixed state.
pub fn steady_state(model: &LindbladModel, opts: SteadyStateOptions) -> Result<DensityMatrix> {
    if !model.is_time_independent() {
        return Err(Error::Precondition("steady state requires a time-independent model".into()));
    }
    let integ = MasterIntegrator::new(model, opts.ctrl)?;
    let chunk = 100.0 * integ.step();
    let mut rho = DensityMatrix::maximally_mixed(model.dim());
    let mut t = 0.0;
    loop {
        let residual = liouvillian_apply(model, t, &rho.0)?.max_abs();
        if residual < opts.tolerance {
            return Ok(rho);
        }
        if t >= opts.horizon {
            return Err(Error::NoConvergence { residual });
        }
        rho = integ.integrate(&rho, t, t + chunk)?;
        t += chunk;
    }
}

/// Stationary state as the null vector of the Liouvillian (validation path).
pub fn steady_state_nullspace(model: &LindbladModel) -> Result<DensityMatrix> {
    let n = model.dim();
    let l = liouvillian_matrix(model, 0.0)?;
    let svd = l.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NoConvergence { residual: f64::NAN })?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &s)| if s < bv { (i, s) } else { (bi, bv) });
    let null: DVector<C64> = v_t.row(idx).transpose().map(|z| z.conj());
    let rho = DensityMatrix::from_vec(n, &null);
    let tr = rho.trace();
    Ok(DensityMatrix(rho.0.scale(ONE / tr)))
}

/// Regression-theorem evaluation of `spec` at each final time, starting from
/// `rho_init` at `spec.t0`: `B` insertions multiply from the left, `A`
/// insertions from the right, and the result is `Tr{A_final ρ}`.
pub fn regression_correlation(
    model: &LindbladModel,
    rho_init: &DensityMatrix,
    spec: &CorrelationSpec,
    final_times: &[f64],
    ctrl: StepControl,
) -> Result<Vec<C64>> {
    spec.validate(model.dim())?;
    spec.validate_final_times(final_times)?;
    enum Side<'a> {
        Left(&'a Operator),
        Right(&'a Operator),
    }
    let mut events: Vec<(f64, Side)> = spec
        .b_ops
        .iter()
        .map(|i| (i.time, Side::Left(&i.op)))
        .chain(spec.a_ops.iter().map(|i| (i.time, Side::Right(&i.op))))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let integ = MasterIntegrator::new(model, ctrl)?;
    let mut rho = rho_init.clone();
    let mut t = spec.t0;
    for (time, side) in events {
        rho = integ.integrate(&rho, t, time)?;
        t = time;
        rho = DensityMatrix(match side {
            Side::Left(b) => b.matmul(&rho.0),
            Side::Right(a) => rho.0.matmul(a),
        });
    }
    let mut out = Vec::with_capacity(final_times.len());
    for &tf in final_times {
        rho = integ.integrate(&rho, t, tf)?;
        t = tf;
        out.push(rho.expectation(&spec.observable));
    }
    Ok(out)
}
