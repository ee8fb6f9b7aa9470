//! Shared fixtures for the criterion benches: the strongly driven two-level
//! atom (Ω = 10γ) and its stationary first-order correlation.

use qtraj::hilbert::two_level::{ground, sigma_minus, sigma_plus};
use qtraj::{stationary_spec, CorrelationSpec, LindbladModel};

pub const OMEGA: f64 = 10.0;
pub const BURN_IN: f64 = 10.0;

pub fn benchmark_model() -> LindbladModel {
    LindbladModel::two_level(OMEGA, 1.0, 0.0).expect("valid preset")
}

/// `τ ∈ [0, 5]` in 51 points.
pub fn taus() -> Vec<f64> {
    (0..51).map(|k| k as f64 * 0.1).collect()
}

/// `⟨σ⁺(τ)σ⁻⟩` after burn-in, as final times `BURN_IN + τ`.
pub fn stationary_benchmark() -> (CorrelationSpec, Vec<f64>) {
    let spec = stationary_spec(ground(), BURN_IN, sigma_plus(), sigma_minus());
    let finals = taus().iter().map(|t| BURN_IN + t).collect();
    (spec, finals)
}
