//! Desk-scale simulator for heralded entanglement of two remote trapped-ion
//! qubits: photon interference heralding, CHSH estimation and
//! maximum-likelihood state tomography under a configurable noise budget.

pub mod bell;
pub mod cli;
pub mod error;
pub mod herald;
pub mod measure;
pub mod par;
pub mod qmat;
pub mod runsim;
pub mod states;
pub mod tomo;

pub use error::{Error, Result};
