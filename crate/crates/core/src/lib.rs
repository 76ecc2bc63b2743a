//! Master-equation models, solvers, and diagnostics for intracavity
//! feedback in a damped parametric oscillator.
//!
//! The crate builds Lindblad generators for several realizations of
//! photon-number-conditioned feedback (instantaneous, electro-optic through
//! an atom or a mode, all-optical cascades, a dispersive-atom variant, and
//! a Kerr reference), solves for steady states, unravels the compound
//! models into quantum trajectories, and compares schemes through Bures
//! distances, moments, and Wigner functions.

pub mod analysis;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod models;
pub mod operator;
pub mod space;
pub mod sparse;
pub mod state;
pub mod steady;
pub mod superop;
pub mod traj;

pub use analysis::{
    bures_distance, bures_distance_with, moments, odd_coherence_max, point_asymmetry, wigner,
    wigner_point, BuresConvention, ComparisonReport, Moments, WignerGrid, WignerGridSpec,
};
pub use error::{Error, Result};
pub use models::{
    AncillaKind, AncillaParams, EoTlaForm, AoForm, ExpansionScheme, Generator, JumpChannel,
    Scheme, SystemParams, TimeDependentModel,
};
pub use operator::Operator;
pub use space::{Factor, FactorKind, SpaceSpec};
pub use sparse::{CscMat, CsrMat};
pub use state::DensityMatrix;
pub use steady::{reduced_steady, steady_state, steady_state_with, SteadyOptions, SteadyReport};
pub use superop::{ExpansionReport, SuperOp};
pub use traj::{
    default_steady_time, ensemble_average, no_jump_evolution, simulate_trajectory,
    steady_estimate, EnsembleEstimate, SteadyProtocol, SteadyTrajEstimate, TrajectoryRecord,
    UnravelSpec,
};
