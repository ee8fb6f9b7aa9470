use crate::error::{Error, Result};
use crate::hilbert::C64;

use super::EstimateSeries;

/// `S(ω) = 2 Re Σₖ wₖ e^{iωτₖ} C(τₖ) Δτ` with trapezoid weights, for a
/// correlation sampled on a uniform grid starting at `τ = 0`.
///
/// The returned `stderr` is the bound `2 Δτ Σₖ wₖ σₖ`, valid whatever the
/// correlation between grid points.
pub fn spectrum(corr: &EstimateSeries, omegas: &[f64]) -> Result<EstimateSeries> {
    let taus = &corr.grid;
    if taus.len() < 2 {
        return Err(Error::NonUniformGrid);
    }
    let dtau = taus[1] - taus[0];
    let uniform = taus[0].abs() <= 1e-12 * dtau.abs().max(1.0)
        && dtau > 0.0
        && taus.iter().enumerate().all(|(k, &t)| (t - k as f64 * dtau).abs() <= 1e-9 * dtau.max(t.abs()));
    if !uniform {
        return Err(Error::NonUniformGrid);
    }
    let last = taus.len() - 1;
    let weight = |k: usize| if k == 0 || k == last { 0.5 } else { 1.0 };
    let err_bound: f64 = corr.stderr.iter().enumerate().map(|(k, s)| weight(k) * s).sum::<f64>() * 2.0 * dtau;
    let mut mean = Vec::with_capacity(omegas.len());
    for &w in omegas {
        let mut acc = C64::new(0.0, 0.0);
        for (k, (&t, &c)) in taus.iter().zip(&corr.mean).enumerate() {
            acc += C64::from_polar(weight(k), w * t) * c;
        }
        mean.push(C64::new(2.0 * acc.re * dtau, 0.0));
    }
    Ok(EstimateSeries {
        grid: omegas.to_vec(),
        mean,
        stderr: vec![err_bound; omegas.len()],
        stderr_re: vec![err_bound; omegas.len()],
        stderr_im: vec![0.0; omegas.len()],
        n: corr.n,
        failed: corr.failed,
    })
}

/// Indices of strict local maxima of `values`.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&k| values[k] > values[k - 1] && values[k] >= values[k + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(taus: Vec<f64>, f: impl Fn(f64) -> C64) -> EstimateSeries {
        let n = taus.len();
        EstimateSeries {
            mean: taus.iter().map(|&t| f(t)).collect(),
            grid: taus,
            stderr: vec![0.0; n],
            stderr_re: vec![0.0; n],
            stderr_im: vec![0.0; n],
            n: 100,
            failed: 0,
        }
    }

    fn uniform(dt: f64, k: usize) -> Vec<f64> {
        (0..k).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn lorentzian_from_exponential() {
        // C(τ) = e^{−τ/2}  ⇒  S(ω) = 2·(1/2)/(1/4 + ω²), half-width 1/2.
        let c = series(uniform(0.01, 6001), |t| C64::new((-t / 2.0).exp(), 0.0));
        let omegas: Vec<f64> = (-300..=300).map(|k| k as f64 * 0.01).collect();
        let s = spectrum(&c, &omegas).unwrap();
        let vals: Vec<f64> = s.mean.iter().map(|z| z.re).collect();
        let peak = vals.iter().cloned().fold(f64::MIN, f64::max);
        let centre = omegas[vals.iter().position(|&v| v == peak).unwrap()];
        assert!(centre.abs() <= 0.01);
        assert!((peak - 4.0).abs() < 0.01, "peak {peak}");
        let above: Vec<f64> = omegas.iter().zip(&vals).filter(|(_, &v)| v >= peak / 2.0).map(|(w, _)| *w).collect();
        let half_width = (above.last().unwrap() - above[0]) / 2.0;
        assert!((half_width - 0.5).abs() <= 0.02, "half width {half_width}");
    }

    #[test]
    fn real_correlation_gives_even_spectrum() {
        let c = series(uniform(0.05, 200), |t| C64::new((-t).exp() * (3.0 * t).cos(), 0.0));
        let s = spectrum(&c, &[-2.0, 2.0, -5.5, 5.5]).unwrap();
        assert!((s.mean[0].re - s.mean[1].re).abs() < 1e-12);
        assert!((s.mean[2].re - s.mean[3].re).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_uniform_grid() {
        let c = series(vec![0.0, 0.1, 0.3], |_| C64::new(1.0, 0.0));
        assert_eq!(spectrum(&c, &[0.0]), Err(Error::NonUniformGrid));
        let c = series(vec![0.5, 0.6, 0.7], |_| C64::new(1.0, 0.0));
        assert_eq!(spectrum(&c, &[0.0]), Err(Error::NonUniformGrid));
    }

    #[test]
    fn maxima_detection() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.5, 2.0, 3.0, 1.0]), vec![1, 4]);
    }
}
