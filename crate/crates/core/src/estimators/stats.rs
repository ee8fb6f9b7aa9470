use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Running count, mean and sums of squared deviations of complex samples,
/// kept separately for the real and imaginary parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: C64,
    m2_re: f64,
    m2_im: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: C64) {
        self.count += 1;
        let n = self.count as f64;
        let d_re = x.re - self.mean.re;
        let d_im = x.im - self.mean.im;
        self.mean.re += d_re / n;
        self.mean.im += d_im / n;
        self.m2_re += d_re * (x.re - self.mean.re);
        self.m2_im += d_im * (x.im - self.mean.im);
    }

    /// Pairwise combination of two partial aggregates.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let d_re = other.mean.re - self.mean.re;
        let d_im = other.mean.im - self.mean.im;
        self.mean.re += d_re * nb / n;
        self.mean.im += d_im * nb / n;
        self.m2_re += other.m2_re + d_re * d_re * na * nb / n;
        self.m2_im += other.m2_im + d_im * d_im * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> C64 {
        self.mean
    }

    fn component_stderr(&self, m2: f64) -> Result<f64> {
        if self.count < 2 {
            return Err(Error::InsufficientSamples { n: self.count as usize });
        }
        let n = self.count as f64;
        Ok((m2 / (n - 1.0) / n).sqrt())
    }

    pub fn stderr_re(&self) -> Result<f64> {
        self.component_stderr(self.m2_re)
    }

    pub fn stderr_im(&self) -> Result<f64> {
        self.component_stderr(self.m2_im)
    }

    /// `sqrt(var(Re) + var(Im)) / sqrt(n)` with unbiased sample variances.
    pub fn stderr(&self) -> Result<f64> {
        self.component_stderr(self.m2_re + self.m2_im)
    }
}

/// Sample mean and standard error of the mean of `samples`.
pub fn statistics_merge(samples: &[C64]) -> Result<(C64, f64)> {
    let mut acc = Accumulator::new();
    for &x in samples {
        acc.push(x);
    }
    Ok((acc.mean(), acc.stderr()?))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn constant_samples_have_zero_stderr() {
        let (m, s) = statistics_merge(&[C64::new(0.7, -0.2); 10]).unwrap();
        assert_eq!(m, C64::new(0.7, -0.2));
        assert_eq!(s, 0.0);
    }

    #[test]
    fn two_point_example() {
        let (m, s) = statistics_merge(&[C64::new(0.0, 0.0), C64::new(2.0, 0.0)]).unwrap();
        assert_eq!(m, C64::new(1.0, 0.0));
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(statistics_merge(&[C64::new(1.0, 0.0)]), Err(Error::InsufficientSamples { n: 1 }));
    }

    proptest! {
        #[test]
        fn merge_matches_single_pass(
            xs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..200),
            cut in 0usize..200,
        ) {
            let xs: Vec<C64> = xs.into_iter().map(|(a, b)| C64::new(a, b)).collect();
            let cut = cut.min(xs.len());
            let mut whole = Accumulator::new();
            xs.iter().for_each(|&x| whole.push(x));
            let mut left = Accumulator::new();
            let mut right = Accumulator::new();
            xs[..cut].iter().for_each(|&x| left.push(x));
            xs[cut..].iter().for_each(|&x| right.push(x));
            left.merge(&right);
            prop_assert_eq!(left.count(), whole.count());
            prop_assert!((left.mean() - whole.mean()).norm() < 1e-12);
            prop_assert!((left.stderr().unwrap() - whole.stderr().unwrap()).abs() < 1e-12);
        }
    }
}
