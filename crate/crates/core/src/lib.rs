//! Quantum Bayesian simulation and filtering for a dispersively coupled qubit
//! measured through a finite-bandwidth resonator.
//!
//! The state of the qubit and resonator is kept as a [`HybridState`]: a 2x2
//! qubit density matrix dressed with one coherent field amplitude per qubit
//! branch. Measurement records update it with the finite-step rules in
//! [`bayes`]; the fields evolve deterministically per [`fields`].

pub mod bayes;
pub mod coherent;
pub mod engine;
pub mod error;
pub mod fields;
pub mod io;
pub mod model;
pub mod rng;
pub mod sde;
pub mod steady;
pub mod vacuum;
pub mod verify;

pub use error::{Error, Result};
pub use fields::DerivedQuantities;
pub use model::{
    AmplifierMode, CheckedConfig, Configuration, HybridState, MeasurementSample,
    MeasurementSettings, Schedule, Segment, SystemParams, TrajectoryRecord,
};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
