//! Unbiased Monte Carlo simulation of noisy near-Clifford quantum circuits.
//!
//! Arbitrary 1- and 2-qubit channels are represented exactly as real-weighted
//! (quasiprobability) mixtures of stabilizer channels — Clifford channels plus
//! Pauli resets. Sampling stabilizer-circuit realizations of those mixtures
//! and reweighting by the signs yields statistically unbiased estimates of
//! observables, at a sampling cost governed by the decompositions' 1-norms.
//!
//! The crate provides:
//! - [`pauli`]: signed Pauli operators and the indexed Pauli basis;
//! - [`channels`]: Pauli transfer matrices, stabilizer channel terms, and
//!   closed-form decompositions of common channels;
//! - [`decomposer`]: the stabilizer channel dictionary and a linear program
//!   for minimal 1-norm decompositions;
//! - [`tableau`]: an extended CHP propagation kernel with multi-qubit Pauli
//!   measurement, Pauli reset, and stabilizer-subspace projection;
//! - [`sampler`]: weighted Monte Carlo estimation with variance accounting
//!   and sample-size planning;
//! - [`circuit`]: a small text format for circuits, noise insertion, and
//!   dynamic execution with measurement feedback;
//! - [`oracle`]: dense reference implementations for validation at small n;
//! - [`steane`]: Steane [[7,1,3]] encoding, syndrome extraction, decoding,
//!   and pseudo-threshold sweeps.

pub mod channels;
pub mod circuit;
pub mod decomposer;
pub mod dense;
pub mod error;
pub mod oracle;
pub mod pauli;
pub mod sampler;
pub mod steane;
pub mod tableau;

pub use channels::{
    make_amplitude_damping, make_depolarizing, make_rotation_z,
    make_rotation_z_positive_approx, make_t_gate, term_to_ptm, verify_decomposition,
    CliffordAction, Ptm, StabilizerChannelTerm, StabilizerDecomposition,
};
pub use error::{Error, Result};
pub use pauli::{comm_sign, pauli_basis, pauli_mul, BasisIndex, Pauli, PauliString, Phase};
pub use tableau::{MeasurementRecord, Tableau};
