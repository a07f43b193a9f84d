//! Simulator and analysis toolkit for Pauli-mask quantum encryption with
//! CNOT-entangled signature qubits.
//!
//! The crate is layered: [`qcore`] holds dense linear algebra and states,
//! [`cipher`] the two-password encryption, [`protocol`] the Alice/Bob state
//! machine, [`attacks`] the eavesdropper catalog and [`analysis`] the exact,
//! closed-form and sampled pass probabilities. [`cli`] backs the `qsig` binary.

pub mod analysis;
pub mod attacks;
pub mod cipher;
pub mod cli;
pub mod error;
pub mod protocol;
pub mod qcore;

pub use error::{Error, Result};
