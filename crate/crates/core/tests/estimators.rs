use qtraj::estimators::stationary_correlation;
use qtraj::hilbert::two_level::*;
use qtraj::oracle::{self, default_control, DensityMatrix, SteadyStateOptions};
use qtraj::{
    correlation, expectation, heisenberg_element, CorrelationMethod, CorrelationSpec, EstimateSeries, Insertion,
    LindbladModel, Operator, Sampling, StateVector, C64,
};

fn grid(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

/// Fraction of points where the estimate lies within `k` stderr of `reference`.
fn coverage(est: &EstimateSeries, reference: &[C64], k: f64) -> f64 {
    let hits = est
        .mean
        .iter()
        .zip(&est.stderr)
        .zip(reference)
        .filter(|((m, s), r)| (*m - *r).norm() <= k * **s + 1e-12)
        .count();
    hits as f64 / reference.len() as f64
}

#[test]
fn expectation_tracks_master_equation() {
    let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
    let g = grid(0.0, 3.0, 31);
    let est = expectation(&m, &ground(), &sigma_z(), &g, &Sampling::new(3000, 17)).unwrap();
    let exact = oracle::expectation_oracle(&m, &DensityMatrix::pure(&ground()), &sigma_z(), &g, default_control())
        .unwrap();
    assert!(coverage(&est, &exact, 4.0) >= 0.9);
    assert_eq!(est.n, 3000);
    assert_eq!(est.failed, 0);
}

#[test]
fn expectation_of_identity_is_exact() {
    let m = LindbladModel::two_level(3.0, 0.5, 1.0).unwrap();
    let est = expectation(&m, &excited(), &Operator::identity(2), &grid(0.0, 2.0, 11), &Sampling::new(50, 1)).unwrap();
    for (z, s) in est.mean.iter().zip(&est.stderr) {
        assert!((z.re - 1.0).abs() < 1e-12 && z.im.abs() < 1e-12);
        assert!(*s < 1e-12);
    }
}

#[test]
fn pure_decay_population() {
    let m = LindbladModel::two_level(0.0, 1.0, 0.0).unwrap();
    let g = grid(0.0, 3.0, 7);
    let est = expectation(&m, &excited(), &excited_projector(), &g, &Sampling::new(4000, 5)).unwrap();
    let exact: Vec<C64> = g.iter().map(|t| C64::new((-t).exp(), 0.0)).collect();
    assert!(coverage(&est, &exact, 4.0) >= 0.85);
}

#[test]
fn heisenberg_element_orthogonal_states() {
    let m = LindbladModel::two_level(0.0, 1.0, 0.0).unwrap();
    let g = grid(0.0, 3.0, 16);
    let est = heisenberg_element(&m, &ground(), &excited(), &sigma_minus(), &g, &Sampling::new(3000, 9)).unwrap();
    let exact = oracle::heisenberg_oracle(&m, &ground(), &excited(), &sigma_minus(), &g, default_control()).unwrap();
    assert!(coverage(&est, &exact, 4.0) >= 0.9);
    // t = t₀ is exact for every trajectory
    assert!((est.mean[0] - exact[0]).norm() < 1e-12);
}

#[test]
fn heisenberg_identity_gives_overlap() {
    let m = LindbladModel::two_level(5.0, 1.0, 0.5).unwrap();
    let phi = StateVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
    let psi = StateVector::from_real(&[1.0, 0.0]).unwrap();
    let est = heisenberg_element(&m, &phi, &psi, &Operator::identity(2), &grid(0.0, 2.0, 5), &Sampling::new(2000, 3))
        .unwrap();
    let overlap = qtraj::inner(&phi, &psi).unwrap();
    for (z, s) in est.mean.iter().zip(&est.stderr) {
        assert!((z - overlap).norm() <= 4.0 * s + 1e-12, "{z} vs {overlap} ± {s}");
    }
}

#[test]
fn hermitian_pair_symmetry() {
    let m = LindbladModel::two_level(4.0, 1.0, 0.3).unwrap();
    let phi = StateVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
    let psi = excited();
    let a = sigma_minus();
    let g = grid(0.0, 2.0, 9);
    let s = Sampling::new(1500, 21);
    let lhs = heisenberg_element(&m, &phi, &psi, &a, &g, &s).unwrap();
    let rhs = heisenberg_element(&m, &psi, &phi, &a.adjoint(), &g, &s).unwrap();
    for k in 0..g.len() {
        let diff = (lhs.mean[k] - rhs.mean[k].conj()).norm();
        let combined = (lhs.stderr[k].powi(2) + rhs.stderr[k].powi(2)).sqrt();
        assert!(diff <= 4.0 * combined + 1e-12);
    }
}

#[test]
fn identity_probe_reduces_to_expectation_for_all_methods() {
    let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
    let spec = CorrelationSpec {
        initial: ground(),
        t0: 0.0,
        a_ops: vec![],
        b_ops: vec![Insertion::new(0.5, Operator::identity(2))],
        observable: sigma_z(),
    };
    let finals = grid(0.5, 2.5, 11);
    let exact = oracle::expectation_oracle(
        &m,
        &DensityMatrix::pure(&ground()),
        &sigma_z(),
        &[&[0.0][..], &finals[..]].concat(),
        default_control(),
    )
    .unwrap();
    for method in [CorrelationMethod::Doubled, CorrelationMethod::KickLimit, CorrelationMethod::Four] {
        let est = correlation(&m, &spec, &finals, method, &Sampling::new(2000, 8)).unwrap();
        assert!(coverage(&est, &exact[1..], 4.0) >= 0.9, "{method}");
    }
}

#[test]
fn stationary_first_order_correlation_matches_regression() {
    let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
    let taus = grid(0.0, 3.0, 31);
    let burn_in = 10.0;
    let ss = oracle::steady_state(&m, SteadyStateOptions::default()).unwrap();
    let spec = qtraj::stationary_spec(ground(), 0.0, sigma_plus(), sigma_minus());
    let exact = oracle::regression_correlation(&m, &ss, &spec, &taus, default_control()).unwrap();
    for method in [CorrelationMethod::Doubled, CorrelationMethod::KickLimit, CorrelationMethod::Four] {
        let est = stationary_correlation(
            &m,
            &ground(),
            burn_in,
            &sigma_plus(),
            &sigma_minus(),
            &taus,
            method,
            &Sampling::new(2000, 33),
        )
        .unwrap();
        assert_eq!(est.grid, taus);
        assert!(coverage(&est, &exact, 4.0) >= 0.9, "{method}");
    }
}

#[test]
fn finite_epsilon_approaches_limit() {
    let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
    let taus = grid(0.0, 2.0, 11);
    let s = Sampling::new(500, 4).with_threads(1);
    let run = |method| {
        stationary_correlation(&m, &ground(), 5.0, &sigma_plus(), &sigma_minus(), &taus, method, &s).unwrap()
    };
    let limit = run(CorrelationMethod::KickLimit);
    let eps = run(CorrelationMethod::Kick { epsilon: 1e-4 });
    for (a, b) in limit.mean.iter().zip(&eps.mean) {
        assert!((a - b).norm() < 1e-2, "{a} vs {b}");
    }
}

#[test]
fn intensity_correlation_matches_nested_regression() {
    let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
    let t1 = 1.0;
    let spec = CorrelationSpec {
        initial: ground(),
        t0: 0.0,
        a_ops: vec![Insertion::new(t1, sigma_plus())],
        b_ops: vec![Insertion::new(t1, sigma_minus())],
        observable: sigma_plus().matmul(&sigma_minus()),
    };
    let finals = grid(t1, t1 + 2.0, 21);
    let exact =
        oracle::regression_correlation(&m, &DensityMatrix::pure(&ground()), &spec, &finals, default_control()).unwrap();
    let est = correlation(&m, &spec, &finals, CorrelationMethod::Doubled, &Sampling::new(2000, 12)).unwrap();
    // antibunching at zero delay
    assert!(exact[0].norm() < 1e-12 && est.mean[0].norm() < 1e-12);
    assert!(coverage(&est, &exact, 4.0) >= 0.9);
}

#[test]
fn interleaved_insertions_match_nested_regression() {
    // Four insertions at distinct times, A and B sides interleaved.
    let m = LindbladModel::two_level(3.0, 1.0, 0.5).unwrap();
    let spec = CorrelationSpec {
        initial: ground(),
        t0: 0.0,
        a_ops: vec![Insertion::new(0.6, sigma_plus()), Insertion::new(1.2, sigma_z())],
        b_ops: vec![Insertion::new(0.3, sigma_minus()), Insertion::new(0.9, sigma_x())],
        observable: sigma_z(),
    };
    let finals = grid(1.2, 2.5, 14);
    let exact =
        oracle::regression_correlation(&m, &DensityMatrix::pure(&ground()), &spec, &finals, default_control()).unwrap();
    assert!(exact.iter().any(|z| z.norm() > 0.05));
    let est = correlation(&m, &spec, &finals, CorrelationMethod::Doubled, &Sampling::new(4000, 31)).unwrap();
    assert!(coverage(&est, &exact, 4.0) >= 0.9);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let m = LindbladModel::two_level(10.0, 1.0, 0.0).unwrap();
    let taus = grid(0.0, 1.0, 6);
    let run = |threads| {
        let s = Sampling::new(300, 77).with_threads(threads);
        stationary_correlation(&m, &ground(), 2.0, &sigma_plus(), &sigma_minus(), &taus, CorrelationMethod::Doubled, &s)
            .unwrap()
    };
    let serial = run(1);
    assert_eq!(serial, run(1));
    assert_eq!(serial, run(3));
    assert_eq!(serial, run(0));
}

#[test]
fn too_few_trajectories() {
    let m = LindbladModel::two_level(1.0, 1.0, 0.0).unwrap();
    assert!(matches!(
        expectation(&m, &ground(), &sigma_z(), &[0.0, 1.0], &Sampling::new(1, 0)),
        Err(qtraj::Error::InsufficientSamples { n: 1 })
    ));
}
