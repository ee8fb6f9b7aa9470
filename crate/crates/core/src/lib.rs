//! Stochastic wave-function simulation of open quantum systems.
//!
//! Trajectories of the quantum-jump unraveling are sampled either in the
//! system Hilbert space or in the doubled space `H ⊕ H`. The doubled space
//! gives access to matrix elements of reduced Heisenberg operators and to
//! time-ordered multitime correlation functions while propagating only two
//! state vectors per realization. A dense master-equation integrator serves
//! as the deterministic reference.

pub mod error;
pub mod estimators;
pub mod hilbert;
pub mod model;
pub mod oracle;
pub mod propagator;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use estimators::{
    build_fg_schedule, correlation, expectation, heisenberg_element, local_maxima, spectrum,
    stationary_correlation, stationary_spec,
    statistics_merge, Accumulator, CorrelationMethod, CorrelationSpec, EstimateSeries, FGSchedule,
    Insertion, Sampling,
};
pub use hilbert::{inner, matrix_element, pair, split, Operator, PairedState, StateVector, C64};
pub use model::{Coefficient, DecayChannel, HamiltonianTerm, LindbladModel};
pub use oracle::DensityMatrix;
pub use propagator::StepControl;
pub use rng::RngStream;
pub use trajectory::{run_trajectory, run_trajectory_kick, Jump, KickMode, TrajState, TrajectoryRecord, TrajectoryStatus};
