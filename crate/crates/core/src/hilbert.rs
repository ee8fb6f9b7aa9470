//! Dense complex vectors and matrices for the system space and its doubled copy.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Squared Euclidean norm of a slice of amplitudes.
#[inline]
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// A pure state (not necessarily normalized) in an `dim`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidArgument("state vector must have dim >= 1".into()));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self { amps })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self { amps: vec![ZERO; dim] }
    }

    /// Computational basis vector `e_k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dim {dim}");
        let mut amps = vec![ZERO; dim];
        amps[k] = ONE;
        Self { amps }
    }

    pub(crate) fn from_vec_unchecked(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-10
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { amps: self.amps.iter().map(|&z| z * factor).collect() }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Precondition("cannot normalize the zero vector".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        assert_eq!(self.dim(), rhs.dim());
        StateVector { amps: self.amps.iter().zip(&rhs.amps).map(|(a, b)| a + b).collect() }
    }
}

/// A dense square matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl Operator {
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("operator must have dim >= 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> =
            rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.data[i * dim + i] = ONE;
        }
        op
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &StateVector, v: &StateVector) -> Self {
        assert_eq!(u.dim(), v.dim());
        let dim = u.dim();
        let mut data = Vec::with_capacity(dim * dim);
        for a in u.as_slice() {
            for b in v.as_slice() {
                data.push(a * b.conj());
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| z * factor).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entrywise deviation from hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Induced ∞-norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim)
    }

    /// `out = self · v`, with both slices of length `dim`.
    #[inline]
    pub fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let n = self.dim;
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for (row, o) in self.data.chunks_exact(n).zip(out.iter_mut()) {
            let mut acc = ZERO;
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            *o = acc;
        }
    }

    /// Applies the operator to every consecutive `dim`-sized block of `v`.
    /// This is the action of `diag(M, …, M)` without forming it.
    #[inline]
    pub fn apply_blocks_into(&self, v: &[C64], out: &mut [C64]) {
        let n = self.dim;
        for (vb, ob) in v.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            self.apply_into(vb, ob);
        }
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        check_dim(self.dim, v.dim())?;
        let mut out = vec![ZERO; self.dim];
        self.apply_into(v.as_slice(), &mut out);
        Ok(StateVector { amps: out })
    }

    pub fn matmul(&self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    /// Block-diagonal `diag(M, M, …)` with `copies` blocks.
    pub fn block_diag(&self, copies: usize) -> Operator {
        let n = self.dim;
        let big = n * copies;
        let mut out = Self::zeros(big);
        for b in 0..copies {
            for i in 0..n {
                for j in 0..n {
                    out.data[(b * n + i) * big + b * n + j] = self.data[i * n + j];
                }
            }
        }
        out
    }

    /// Entry of the largest magnitude difference between two operators.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

/// Two-level operators in the basis `|g⟩ = e₀`, `|e⟩ = e₁`.
pub mod two_level {
    use super::*;

    pub fn ground() -> StateVector {
        StateVector::basis(2, 0)
    }

    pub fn excited() -> StateVector {
        StateVector::basis(2, 1)
    }

    /// Lowering operator `σ⁻ = |g⟩⟨e|`.
    pub fn sigma_minus() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap()
    }

    pub fn sigma_plus() -> Operator {
        sigma_minus().adjoint()
    }

    pub fn sigma_x() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn sigma_y() -> Operator {
        Operator::from_rows(&[vec![ZERO, C64::new(0.0, -1.0)], vec![C64::new(0.0, 1.0), ZERO]])
            .unwrap()
    }

    /// `σ_z = |e⟩⟨e| − |g⟩⟨g|`
    pub fn sigma_z() -> Operator {
        Operator::from_real_rows(&[&[-1.0, 0.0], &[0.0, 1.0]]).unwrap()
    }

    /// `σ⁺σ⁻ = |e⟩⟨e|`
    pub fn excited_projector() -> Operator {
        Operator::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]).unwrap()
    }
}

#[inline]
fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `⟨u|v⟩`, conjugate-linear in `u`.
pub fn inner(u: &StateVector, v: &StateVector) -> Result<C64> {
    check_dim(u.dim(), v.dim())?;
    Ok(inner_slices(u.as_slice(), v.as_slice()))
}

#[inline]
pub(crate) fn inner_slices(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// `⟨u|A|v⟩`
pub fn matrix_element(u: &StateVector, op: &Operator, v: &StateVector) -> Result<C64> {
    check_dim(u.dim(), op.dim())?;
    check_dim(op.dim(), v.dim())?;
    Ok(matrix_element_slices(u.as_slice(), op, v.as_slice()))
}

#[inline]
pub(crate) fn matrix_element_slices(u: &[C64], op: &Operator, v: &[C64]) -> C64 {
    let n = op.dim();
    let mut acc = ZERO;
    for (row, ui) in op.as_slice().chunks_exact(n).zip(u) {
        let mut r = ZERO;
        for (a, x) in row.iter().zip(v) {
            r += a * x;
        }
        acc += ui.conj() * r;
    }
    acc
}

/// Element `θ = (φ, ψ)ᵀ` of the doubled space with unit joint norm, plus the
/// squared norm of the pre-normalization pair carried as `weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedState {
    upper: StateVector,
    lower: StateVector,
    weight: f64,
}

impl PairedState {
    pub(crate) fn from_parts_unchecked(upper: StateVector, lower: StateVector, weight: f64) -> Self {
        Self { upper, lower, weight }
    }

    /// Rebuilds a paired state from a stacked `2N` vector, keeping `weight`.
    pub(crate) fn from_stacked(stacked: &[C64], weight: f64) -> Self {
        let n = stacked.len() / 2;
        Self {
            upper: StateVector::from_vec_unchecked(stacked[..n].to_vec()),
            lower: StateVector::from_vec_unchecked(stacked[n..].to_vec()),
            weight,
        }
    }

    pub fn upper(&self) -> &StateVector {
        &self.upper
    }

    pub fn lower(&self) -> &StateVector {
        &self.lower
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dim(&self) -> usize {
        self.upper.dim()
    }

    pub fn joint_norm_sqr(&self) -> f64 {
        self.upper.norm_sqr() + self.lower.norm_sqr()
    }

    /// Upper block followed by lower block.
    pub fn stacked(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(2 * self.dim());
        v.extend_from_slice(self.upper.as_slice());
        v.extend_from_slice(self.lower.as_slice());
        v
    }
}

/// Normalizes `(φ, ψ)` jointly and records `‖(φ, ψ)‖²` as the weight.
pub fn pair(phi: &StateVector, psi: &StateVector) -> Result<PairedState> {
    check_dim(phi.dim(), psi.dim())?;
    let n2 = phi.norm_sqr() + psi.norm_sqr();
    if n2 == 0.0 {
        return Err(Error::ZeroWeightInsertion);
    }
    let s = C64::new(1.0 / n2.sqrt(), 0.0);
    Ok(PairedState { upper: phi.scaled(s), lower: psi.scaled(s), weight: n2 })
}

pub fn split(theta: &PairedState) -> (StateVector, StateVector, f64) {
    (theta.upper.clone(), theta.lower.clone(), theta.weight)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::two_level::*;
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inner_basis() {
        let e0 = StateVector::basis(2, 0);
        let e1 = StateVector::basis(2, 1);
        assert_eq!(inner(&e0, &e0).unwrap(), ONE);
        assert_eq!(inner(&e0, &e1).unwrap(), ZERO);
        let u = StateVector::new(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]).unwrap();
        let z = inner(&u, &e0).unwrap();
        assert_abs_diff_eq!(z.re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let err = inner(&StateVector::basis(2, 0), &StateVector::basis(3, 0)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn matrix_element_examples() {
        let u = StateVector::new(vec![c(0.3, 0.1), c(-0.2, 0.7)]).unwrap();
        let v = StateVector::new(vec![c(1.0, -0.5), c(0.4, 0.0)]).unwrap();
        let id = Operator::identity(2);
        assert_eq!(matrix_element(&u, &id, &v).unwrap(), inner(&u, &v).unwrap());
        assert_eq!(matrix_element(&excited(), &excited_projector(), &excited()).unwrap(), ONE);
        assert_eq!(matrix_element(&ground(), &sigma_minus(), &excited()).unwrap(), ONE);
        assert!(matrix_element(&u, &Operator::identity(3), &v).is_err());
    }

    #[test]
    fn pair_examples() {
        let g = ground();
        let p = pair(&g, &g).unwrap();
        assert_eq!(p.weight(), 2.0);
        assert_abs_diff_eq!(p.upper().as_slice()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.lower().as_slice()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);

        let p = pair(&g, &StateVector::zeros(2)).unwrap();
        assert_eq!(p.weight(), 1.0);
        assert_eq!(p.upper(), &g);
        assert_eq!(p.lower(), &StateVector::zeros(2));

        let err = pair(&StateVector::zeros(2), &StateVector::zeros(2)).unwrap_err();
        assert_eq!(err, Error::ZeroWeightInsertion);
    }

    #[test]
    fn sigma_algebra() {
        assert_eq!(&sigma_plus() * &sigma_minus(), excited_projector());
        assert_eq!(sigma_minus().apply(&excited()).unwrap(), ground());
        assert!(sigma_y().is_hermitian(0.0));
    }

    #[test]
    fn block_diag_action() {
        let sm = sigma_minus();
        let big = sm.block_diag(2);
        let v = vec![c(0.1, 0.2), c(0.3, -0.4), c(0.5, 0.0), c(-0.6, 0.1)];
        let mut a = vec![ZERO; 4];
        let mut b = vec![ZERO; 4];
        big.apply_into(&v, &mut a);
        sm.apply_blocks_into(&v, &mut b);
        assert_eq!(a, b);
    }

    fn arb_c64() -> impl Strategy<Value = C64> {
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = StateVector> {
        prop::collection::vec(arb_c64(), dim).prop_map(|v| StateVector::new(v).unwrap())
    }

    fn arb_op(dim: usize) -> impl Strategy<Value = Operator> {
        prop::collection::vec(arb_c64(), dim * dim).prop_map(move |v| Operator::new(dim, v).unwrap())
    }

    proptest! {
        #[test]
        fn inner_is_conjugate_symmetric(u in arb_state(3), v in arb_state(3)) {
            let a = inner(&u, &v).unwrap();
            let b = inner(&v, &u).unwrap().conj();
            prop_assert!((a - b).norm() < 1e-14);
        }

        #[test]
        fn adjoint_matrix_element(u in arb_state(3), v in arb_state(3), op in arb_op(3)) {
            let a = matrix_element(&u, &op.adjoint(), &v).unwrap();
            let b = matrix_element(&v, &op, &u).unwrap().conj();
            prop_assert!((a - b).norm() < 1e-13);
        }

        #[test]
        fn pair_split_round_trip(phi in arb_state(3), psi in arb_state(3)) {
            prop_assume!(phi.norm_sqr() + psi.norm_sqr() > 1e-6);
            let theta = pair(&phi, &psi).unwrap();
            prop_assert!((theta.joint_norm_sqr() - 1.0).abs() <= 1e-10);
            let (up, lo, w) = split(&theta);
            prop_assert!((w - (phi.norm_sqr() + psi.norm_sqr())).abs() <= 1e-12 * w.max(1.0));
            let s = w.sqrt();
            for (a, b) in up.as_slice().iter().zip(phi.as_slice()) {
                prop_assert!((a * s - b).norm() <= 1e-12);
            }
            for (a, b) in lo.as_slice().iter().zip(psi.as_slice()) {
                prop_assert!((a * s - b).norm() <= 1e-12);
            }
            prop_assert_eq!(up.dim(), lo.dim());
        }
    }
}
