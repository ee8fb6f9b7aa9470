//! Time-ordered correlation functions
//! `⟨φ₀| A₁(t₁)⋯Aₙ(tₙ) Bₘ(sₘ)⋯B₁(s₁) |φ₀⟩` and their insertion schedules.

use crate::error::{Error, Result};
use crate::hilbert::{Operator, StateVector};

#[derive(Clone, Debug, PartialEq)]
pub struct Insertion {
    pub time: f64,
    pub op: Operator,
}

impl Insertion {
    pub fn new(time: f64, op: Operator) -> Self {
        Self { time, op }
    }
}

/// A correlation function whose last `A` operator, `observable`, is
/// evaluated on a grid of final times.
///
/// `a_ops` lists `A₁ … Aₙ₋₁` with non-decreasing times and `b_ops` lists
/// `B₁ … Bₘ` with non-decreasing times. The observable sits at the final
/// time, which must not precede any insertion.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSpec {
    pub initial: StateVector,
    pub t0: f64,
    pub a_ops: Vec<Insertion>,
    pub b_ops: Vec<Insertion>,
    pub observable: Operator,
}

/// Stationary two-time correlation `⟨A(τ) B⟩`: burn-in from `initial` for
/// `burn_in`, insert `B`, then measure `A`. Final times are `burn_in + τ`.
pub fn stationary_spec(initial: StateVector, burn_in: f64, a: Operator, b: Operator) -> CorrelationSpec {
    CorrelationSpec {
        initial,
        t0: 0.0,
        a_ops: Vec::new(),
        b_ops: vec![Insertion::new(burn_in, b)],
        observable: a,
    }
}

impl CorrelationSpec {
    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// Latest insertion time, or `t0` if there is none.
    pub fn last_insertion_time(&self) -> f64 {
        self.a_ops.iter().chain(&self.b_ops).map(|i| i.time).fold(self.t0, f64::max)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.initial.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.initial.dim() });
        }
        if !self.t0.is_finite() {
            return Err(Error::NonFinite("t0"));
        }
        for ins in self.a_ops.iter().chain(&self.b_ops) {
            if ins.op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: ins.op.dim() });
            }
            if !ins.time.is_finite() {
                return Err(Error::NonFinite("insertion time"));
            }
        }
        if self.observable.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.observable.dim() });
        }
        for (name, list) in [("A", &self.a_ops), ("B", &self.b_ops)] {
            let mut last = self.t0;
            for ins in list {
                if ins.time < last {
                    return Err(Error::UnorderedSpec(format!(
                        "{name} insertion at {} precedes {last} (times must be >= t0 and non-decreasing)",
                        ins.time
                    )));
                }
                last = ins.time;
            }
        }
        Ok(())
    }

    /// Checks that every final time is at or after the last insertion.
    pub fn validate_final_times(&self, finals: &[f64]) -> Result<()> {
        if finals.is_empty() {
            return Err(Error::InvalidArgument("final-time grid must not be empty".into()));
        }
        if finals.iter().any(|t| !t.is_finite()) || finals.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("final times must be finite and strictly increasing".into()));
        }
        let last = self.last_insertion_time();
        if finals[0] < last {
            return Err(Error::UnorderedSpec(format!("final time {} precedes insertion at {last}", finals[0])));
        }
        Ok(())
    }
}

/// One distinct insertion time: the upper component is multiplied by `f`
/// and the lower one by `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct FGEntry {
    pub time: f64,
    pub f: Operator,
    pub g: Operator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FGSchedule {
    pub entries: Vec<FGEntry>,
}

impl FGSchedule {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.time).collect()
    }
}

/// Groups `A` (upper side, via `A†`) and `B` (lower side) insertions by
/// distinct time. Several `A`s at one time combine as `F† = Aᵢ Aᵢ₊₁ ⋯` and
/// several `B`s as `G = ⋯ Bⱼ₊₁ Bⱼ`, matching their order in the product.
pub(crate) fn group_insertions(dim: usize, a_ops: &[Insertion], b_ops: &[Insertion]) -> FGSchedule {
    let mut times: Vec<f64> = a_ops.iter().chain(b_ops).map(|i| i.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let entries = times
        .into_iter()
        .map(|r| {
            let f_dagger = a_ops
                .iter()
                .filter(|i| i.time == r)
                .fold(Operator::identity(dim), |acc, i| acc.matmul(&i.op));
            let g = b_ops
                .iter()
                .filter(|i| i.time == r)
                .fold(Operator::identity(dim), |acc, i| i.op.matmul(&acc));
            FGEntry { time: r, f: f_dagger.adjoint(), g }
        })
        .collect();
    FGSchedule { entries }
}

/// Full schedule `r₁ < ⋯ < r_q` with the observable placed at `final_time`.
pub fn build_fg_schedule(spec: &CorrelationSpec, final_time: f64) -> Result<FGSchedule> {
    spec.validate(spec.dim())?;
    if let Some(last_a) = spec.a_ops.last() {
        if final_time < last_a.time {
            return Err(Error::UnorderedSpec(format!(
                "final time {final_time} precedes A insertion at {}",
                last_a.time
            )));
        }
    }
    if final_time < spec.t0 {
        return Err(Error::UnorderedSpec(format!("final time {final_time} precedes t0 = {}", spec.t0)));
    }
    let mut a_ops = spec.a_ops.clone();
    a_ops.push(Insertion::new(final_time, spec.observable.clone()));
    Ok(group_insertions(spec.dim(), &a_ops, &spec.b_ops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::two_level::*;

    fn spec(a: Vec<Insertion>, b: Vec<Insertion>, obs: Operator) -> CorrelationSpec {
        CorrelationSpec { initial: ground(), t0: 0.0, a_ops: a, b_ops: b, observable: obs }
    }

    #[test]
    fn two_time_reduction() {
        let s = spec(vec![], vec![Insertion::new(1.0, sigma_minus())], sigma_plus());
        let sched = build_fg_schedule(&s, 2.5).unwrap();
        assert_eq!(sched.times(), vec![1.0, 2.5]);
        assert_eq!(sched.entries[0].f, Operator::identity(2));
        assert_eq!(sched.entries[0].g, sigma_minus());
        // F = A† with A = σ⁺
        assert_eq!(sched.entries[1].f, sigma_minus());
        assert_eq!(sched.entries[1].g, Operator::identity(2));
    }

    #[test]
    fn coincident_times_merge() {
        let s = spec(vec![], vec![Insertion::new(1.0, sigma_minus())], sigma_plus());
        let sched = build_fg_schedule(&s, 1.0).unwrap();
        assert_eq!(sched.len(), 1);
        assert_eq!(sched.entries[0].f, sigma_minus());
        assert_eq!(sched.entries[0].g, sigma_minus());
    }

    #[test]
    fn identity_operators() {
        let id = Operator::identity(2);
        let s = spec(
            vec![Insertion::new(0.5, id.clone())],
            vec![Insertion::new(0.2, id.clone()), Insertion::new(0.9, id.clone())],
            id.clone(),
        );
        let sched = build_fg_schedule(&s, 2.0).unwrap();
        assert_eq!(sched.times(), vec![0.2, 0.5, 0.9, 2.0]);
        assert!(sched.entries.iter().all(|e| e.f == id && e.g == id));
    }

    #[test]
    fn products_respect_operator_order() {
        // ⟨A₁(1) A₂(1) B₂(1) B₁(1)⟩: F† = A₁A₂, G = B₂B₁
        let a1 = sigma_plus();
        let a2 = sigma_z();
        let b1 = sigma_x();
        let b2 = sigma_minus();
        let s = spec(
            vec![Insertion::new(1.0, a1.clone()), Insertion::new(1.0, a2.clone())],
            vec![Insertion::new(1.0, b1.clone()), Insertion::new(1.0, b2.clone())],
            Operator::identity(2),
        );
        let sched = build_fg_schedule(&s, 3.0).unwrap();
        assert_eq!(sched.entries[0].f, a1.matmul(&a2).adjoint());
        assert_eq!(sched.entries[0].g, b2.matmul(&b1));
    }

    #[test]
    fn unordered_specs_are_rejected() {
        let s = spec(
            vec![],
            vec![Insertion::new(2.0, sigma_minus()), Insertion::new(1.0, sigma_minus())],
            sigma_plus(),
        );
        assert!(matches!(build_fg_schedule(&s, 3.0), Err(Error::UnorderedSpec(_))));
        let s = spec(vec![Insertion::new(2.0, sigma_plus())], vec![], sigma_plus());
        assert!(matches!(build_fg_schedule(&s, 1.0), Err(Error::UnorderedSpec(_))));
        let s = spec(vec![], vec![Insertion::new(-1.0, sigma_minus())], sigma_plus());
        assert!(matches!(build_fg_schedule(&s, 1.0), Err(Error::UnorderedSpec(_))));
    }

    #[test]
    fn every_time_consumed_once() {
        let s = spec(
            vec![Insertion::new(0.3, sigma_plus()), Insertion::new(0.7, sigma_z())],
            vec![Insertion::new(0.3, sigma_minus()), Insertion::new(0.5, sigma_x())],
            sigma_plus(),
        );
        let sched = build_fg_schedule(&s, 1.0).unwrap();
        assert_eq!(sched.times(), vec![0.3, 0.5, 0.7, 1.0]);
        assert_eq!(sched.entries[1].f, Operator::identity(2));
        assert_eq!(sched.entries[1].g, sigma_x());
        assert_eq!(sched.entries[2].f, sigma_z());
        assert_eq!(sched.entries[2].g, Operator::identity(2));
    }
}
