//! Classically simulated quantum-data learning for the toric-code loop gas
//! in a longitudinal field.
//!
//! The crate covers the whole pipeline: lattice geometry, a dense
//! state-vector simulator, the field-tuned Hamiltonian, loop-gas variational
//! ground states, exact diagonalization, a quantum convolutional classifier,
//! fidelity-based clustering, classical baselines, and the transition-point
//! analysis.

// `!(a < b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod datastore;
pub mod ed;
pub mod error;
pub mod lattice;
pub mod model;
pub mod optim;
pub mod plgc;
pub mod qcnn;
pub mod qkmeans;
pub mod simulator;

pub use analysis::{
    aggregate_repetitions, fit_finite_size, flip_interval, FitWeighting, FlipIntervalEstimate,
    ScalingFit, ScalingPoint,
};
pub use baselines::{FeatureKind, FeatureMatrix};
pub use datastore::{
    load_dataset, save_dataset, split_physics_aware, split_random, DatasetConfig, PhaseDataset,
    PhaseSample,
};
pub use error::{Error, Result};
pub use lattice::LatticeGeometry;
pub use model::{binder_cumulant, magnetization_per_qubit, ToricHamiltonian};
pub use plgc::{prepare_plgc, vqe_ground_state, PlgcParams, SpsaConfig, VqeConfig, VqeResult};
pub use qcnn::{QcnnArchitecture, TrainConfig};
pub use qkmeans::{kmedoids_two, Clustering, DistanceMatrix};
pub use simulator::{Complex64, Pauli, PauliString, StateVector};
