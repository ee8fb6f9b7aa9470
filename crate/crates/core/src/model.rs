//! Lindblad models `(H(t), {γᵢ, Jᵢ})` and their lifting to the doubled space.

use crate::error::{Error, Result};
use crate::hilbert::{two_level, Operator, C64};

const HERMITIAN_TOL: f64 = 1e-12;

/// Real time dependence of a Hamiltonian term.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `amplitude · cos(omega · t + phase)`
    Sinusoid { amplitude: f64, omega: f64, phase: f64 },
    /// Breakpoints `(t_k, v_k)` sorted by time; the value `v_k` holds on
    /// `[t_k, t_{k+1})` and the last breakpoint closes the domain.
    PiecewiseConstant(Vec<(f64, f64)>),
}

impl Coefficient {
    pub fn validate(&self) -> Result<()> {
        match self {
            Coefficient::Constant(c) if !c.is_finite() => Err(Error::NonFinite("coefficient")),
            Coefficient::Sinusoid { amplitude, omega, phase }
                if !(amplitude.is_finite() && omega.is_finite() && phase.is_finite()) =>
            {
                Err(Error::NonFinite("coefficient"))
            }
            Coefficient::PiecewiseConstant(table) => {
                if table.is_empty() {
                    return Err(Error::InvalidArgument("empty piecewise table".into()));
                }
                if table.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(Error::NonFinite("piecewise table"));
                }
                if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidArgument(
                        "piecewise table times must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        match self {
            Coefficient::Constant(c) => Ok(*c),
            Coefficient::Sinusoid { amplitude, omega, phase } => Ok(amplitude * (omega * t + phase).cos()),
            Coefficient::PiecewiseConstant(table) => {
                let start = table[0].0;
                let end = table[table.len() - 1].0;
                if !(start..=end).contains(&t) {
                    return Err(Error::OutOfRange { t, start, end });
                }
                let idx = table.partition_point(|(tk, _)| *tk <= t) - 1;
                Ok(table[idx].1)
            }
        }
    }

    /// Upper bound on `|c(t)|` over all `t`.
    pub fn bound(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => c.abs(),
            Coefficient::Sinusoid { amplitude, .. } => amplitude.abs(),
            Coefficient::PiecewiseConstant(table) => table.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Coefficient::Constant(_) => true,
            Coefficient::Sinusoid { amplitude, omega, .. } => *amplitude == 0.0 || *omega == 0.0,
            Coefficient::PiecewiseConstant(_) => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTerm {
    pub base: Operator,
    pub coeff: Coefficient,
}

impl HamiltonianTerm {
    pub fn constant(base: Operator) -> Self {
        Self { base, coeff: Coefficient::Constant(1.0) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayChannel {
    pub rate: f64,
    pub jump_op: Operator,
}

/// Generator of the master equation
/// `dρ/dt = −i[H(t), ρ] + ½ Σᵢ γᵢ (2JᵢρJᵢ† − Jᵢ†Jᵢρ − ρJᵢ†Jᵢ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    dim: usize,
    terms: Vec<HamiltonianTerm>,
    channels: Vec<DecayChannel>,
    /// `½ Σᵢ γᵢ Jᵢ†Jᵢ`
    damping: Operator,
}

impl LindbladModel {
    pub fn new(dim: usize, terms: Vec<HamiltonianTerm>, channels: Vec<DecayChannel>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("model dim must be >= 1".into()));
        }
        for term in &terms {
            if term.base.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: term.base.dim() });
            }
            let max_dev = term.base.hermiticity_defect();
            if max_dev > HERMITIAN_TOL {
                return Err(Error::NotHermitian { max_dev });
            }
            term.coeff.validate()?;
        }
        for (i, ch) in channels.iter().enumerate() {
            if ch.jump_op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: ch.jump_op.dim() });
            }
            if !ch.rate.is_finite() {
                return Err(Error::NonFinite("decay rate"));
            }
            if ch.rate < 0.0 {
                return Err(Error::NegativeRate { channel: i, rate: ch.rate });
            }
        }
        let mut damping = Operator::zeros(dim);
        for ch in &channels {
            let jj = ch.jump_op.adjoint().matmul(&ch.jump_op);
            damping = &damping + &jj.scale(C64::new(0.5 * ch.rate, 0.0));
        }
        Ok(Self { dim, terms, channels, damping })
    }

    /// Resonantly or near-resonantly driven two-level atom in the rotating
    /// frame: `H = (Ω/2)(σ⁺ + σ⁻) − Δ|e⟩⟨e|`, one channel `(γ, σ⁻)`.
    pub fn two_level(rabi: f64, gamma: f64, detuning: f64) -> Result<Self> {
        let mut terms = vec![HamiltonianTerm {
            base: two_level::sigma_x(),
            coeff: Coefficient::Constant(0.5 * rabi),
        }];
        if detuning != 0.0 {
            terms.push(HamiltonianTerm {
                base: two_level::excited_projector(),
                coeff: Coefficient::Constant(-detuning),
            });
        }
        let channels = vec![DecayChannel { rate: gamma, jump_op: two_level::sigma_minus() }];
        Self::new(2, terms, channels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }

    pub fn channels(&self) -> &[DecayChannel] {
        &self.channels
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.is_constant())
    }

    pub fn hamiltonian_at(&self, t: f64) -> Result<Operator> {
        if !t.is_finite() {
            return Err(Error::NonFinite("time"));
        }
        let mut h = Operator::zeros(self.dim);
        for term in &self.terms {
            let c = term.coeff.at(t)?;
            if c != 0.0 {
                h = &h + &term.base.scale(C64::new(c, 0.0));
            }
        }
        Ok(h)
    }

    /// `H(t) − (i/2) Σᵢ γᵢ Jᵢ†Jᵢ`
    pub fn effective_hamiltonian(&self, t: f64) -> Result<Operator> {
        let h = self.hamiltonian_at(t)?;
        Ok(&h - &self.damping.scale(C64::new(0.0, 1.0)))
    }

    /// `½ Σᵢ γᵢ Jᵢ†Jᵢ`, the anti-hermitian part of the effective Hamiltonian up to a factor `−i`.
    pub fn damping(&self) -> &Operator {
        &self.damping
    }

    /// Upper bound on `‖H_eff(t)‖∞` over all `t`.
    pub fn effective_norm_bound(&self) -> f64 {
        let h: f64 = self.terms.iter().map(|t| t.coeff.bound() * t.base.norm_inf()).sum();
        h + self.damping.norm_inf()
    }

    /// Same rates, every operator replaced by `diag(M, M)`.
    pub fn lift_to_doubled(&self) -> LindbladModel {
        let terms = self
            .terms
            .iter()
            .map(|t| HamiltonianTerm { base: t.base.block_diag(2), coeff: t.coeff.clone() })
            .collect();
        let channels = self
            .channels
            .iter()
            .map(|c| DecayChannel { rate: c.rate, jump_op: c.jump_op.block_diag(2) })
            .collect();
        LindbladModel::new(2 * self.dim, terms, channels).expect("lifting preserves validity")
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use nalgebra::DMatrix;
    use proptest::prelude::*;

    use super::*;
    use crate::hilbert::two_level::*;
    use crate::hilbert::StateVector;

    #[test]
    fn constant_model_is_time_independent() {
        let m = LindbladModel::two_level(3.0, 1.0, 0.5).unwrap();
        assert!(m.is_time_independent());
        assert_eq!(m.hamiltonian_at(0.0).unwrap(), m.hamiltonian_at(17.3).unwrap());
    }

    #[test]
    fn sinusoid_coefficient() {
        let m = LindbladModel::new(
            2,
            vec![HamiltonianTerm {
                base: sigma_x(),
                coeff: Coefficient::Sinusoid { amplitude: 1.0, omega: 2.0, phase: 0.0 },
            }],
            vec![],
        )
        .unwrap();
        assert_eq!(m.hamiltonian_at(0.0).unwrap(), sigma_x());
        assert!(m.hamiltonian_at(PI / 4.0).unwrap().max_abs() < 1e-15);
        assert!(!m.is_time_independent());
    }

    #[test]
    fn piecewise_out_of_range() {
        let coeff = Coefficient::PiecewiseConstant(vec![(0.0, 1.0), (1.0, 2.0), (2.0, 0.0)]);
        let m = LindbladModel::new(2, vec![HamiltonianTerm { base: sigma_z(), coeff }], vec![]).unwrap();
        assert_eq!(m.hamiltonian_at(0.5).unwrap(), sigma_z());
        assert_eq!(m.hamiltonian_at(1.0).unwrap(), sigma_z().scale(C64::new(2.0, 0.0)));
        assert!(matches!(m.hamiltonian_at(2.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(m.hamiltonian_at(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn benchmark_preset() {
        let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
        let expected = (&sigma_plus() + &sigma_minus()).scale(C64::new(5.0, 0.0));
        assert!(m.hamiltonian_at(0.0).unwrap().max_abs_diff(&expected) < 1e-15);
        assert_eq!(m.channels().len(), 1);
        assert_eq!(m.channels()[0].rate, 1.0);
        assert_eq!(m.channels()[0].jump_op, sigma_minus());
        assert!(m.hamiltonian_at(0.0).unwrap().is_hermitian(1e-12));

        let decay = LindbladModel::two_level(0.0, 1.0, 0.0).unwrap();
        assert!(decay.hamiltonian_at(0.0).unwrap().is_zero());
    }

    #[test]
    fn detuned_preset() {
        let m = LindbladModel::two_level(2.0, 1.0, 0.7).unwrap();
        let h = m.hamiltonian_at(0.0).unwrap();
        assert_eq!(h.get(1, 1), C64::new(-0.7, 0.0));
        assert_eq!(h.get(0, 1), C64::new(1.0, 0.0));
    }

    #[test]
    fn rejects_invalid_models() {
        let bad = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            LindbladModel::new(2, vec![HamiltonianTerm::constant(bad)], vec![]),
            Err(Error::NotHermitian { .. })
        ));
        assert_eq!(
            LindbladModel::new(2, vec![], vec![DecayChannel { rate: -1.0, jump_op: sigma_minus() }]),
            Err(Error::NegativeRate { channel: 0, rate: -1.0 })
        );
        assert!(matches!(
            LindbladModel::new(3, vec![], vec![DecayChannel { rate: 1.0, jump_op: sigma_minus() }]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let closed = LindbladModel::new(2, vec![HamiltonianTerm::constant(sigma_x())], vec![]).unwrap();
        assert_eq!(closed.effective_hamiltonian(0.0).unwrap(), sigma_x());

        let gamma = 0.8;
        let decay = LindbladModel::two_level(0.0, gamma, 0.0).unwrap();
        let expected = excited_projector().scale(C64::new(0.0, -gamma / 2.0));
        assert!(decay.effective_hamiltonian(0.0).unwrap().max_abs_diff(&expected) < 1e-16);
    }

    #[test]
    fn lifting_examples() {
        let m = LindbladModel::two_level(10.0, 1.0, 0.3).unwrap();
        let lifted = m.lift_to_doubled();
        assert_eq!(lifted.dim(), 4);
        assert_eq!(Operator::identity(2).block_diag(2), Operator::identity(4));

        let jm = &lifted.channels()[0].jump_op;
        let alpha = C64::new(0.3, 0.4);
        let beta = C64::new(-0.5, 0.1);
        let theta = StateVector::new(vec![C64::new(0.0, 0.0), alpha, C64::new(0.0, 0.0), beta]).unwrap();
        let out = jm.apply(&theta).unwrap();
        assert_eq!(out.as_slice(), &[alpha, C64::new(0.0, 0.0), beta, C64::new(0.0, 0.0)]);

        let direct = m.effective_hamiltonian(0.0).unwrap().block_diag(2);
        let from_lifted = lifted.effective_hamiltonian(0.0).unwrap();
        assert!(direct.max_abs_diff(&from_lifted) <= 1e-14);

        for (a, b) in m.channels().iter().zip(lifted.channels()) {
            assert_eq!(a.rate, b.rate);
        }
        for t in lifted.terms() {
            assert!(t.base.is_hermitian(1e-12));
            for i in 0..2 {
                for j in 2..4 {
                    assert_eq!(t.base.get(i, j), C64::new(0.0, 0.0));
                    assert_eq!(t.base.get(j, i), C64::new(0.0, 0.0));
                }
            }
        }
    }

    fn random_op(dim: usize, vals: &[(f64, f64)]) -> Operator {
        Operator::new(dim, vals.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap()
    }

    fn hermitian(dim: usize, vals: &[(f64, f64)]) -> Operator {
        let m = random_op(dim, vals);
        (&m + &m.adjoint()).scale(C64::new(0.5, 0.0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn anti_hermitian_part_is_negative_semidefinite(
            h in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 16),
            j1 in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
            j2 in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
            g1 in 0.0f64..3.0,
            g2 in 0.0f64..3.0,
        ) {
            let m = LindbladModel::new(
                4,
                vec![HamiltonianTerm::constant(hermitian(4, &h))],
                vec![
                    DecayChannel { rate: g1, jump_op: random_op(4, &j1) },
                    DecayChannel { rate: g2, jump_op: random_op(4, &j2) },
                ],
            ).unwrap();
            let heff = m.effective_hamiltonian(0.0).unwrap();
            // (H_eff − H_eff†)/(2i) is hermitian; its spectrum must be ≤ 0.
            let anti = (&heff - &heff.adjoint()).scale(C64::new(0.0, -0.5));
            let mat = DMatrix::from_row_slice(4, 4, anti.as_slice());
            let eig = mat.symmetric_eigen();
            for ev in eig.eigenvalues.iter() {
                prop_assert!(*ev <= 1e-12, "eigenvalue {ev}");
            }
        }
    }
}
