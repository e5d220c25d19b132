//! Finite-temperature dynamics of classically driven qubits coupled to
//! structured bosonic reservoirs, and trace-distance quantum speed limits
//! for single qubits and N-qubit GHZ states.
//!
//! The pipeline is
//! [`bath`] (spectral densities and bath correlation integrals) →
//! [`dressed`] (drive-dressed frame and decay rates γ₊, γ₋, γ_z) →
//! [`channel`] (the single-qubit map and its GHZ extension) →
//! [`qsl`] (speed-limit bounds) → [`experiments`] (parameter sweeps).
//! [`validation`] bundles the oracle checks behind `thermal-qsl validate`.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod channel;
pub mod cli;
pub mod dressed;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod qsl;
pub mod quad;
pub mod validation;

pub use error::{Error, Result};
