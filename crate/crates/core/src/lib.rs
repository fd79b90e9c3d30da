//! Simulation of time-symmetric quantum measurement protocols.
//!
//! The crate is layered bottom-up:
//!
//! - [`qcore`]: dense state vectors, unitaries, projective and Bell measurements.
//! - [`tsv`]: two-state vectors, the ABL rule, and post-selected [`tsv::Scenario`]s
//!   that realize backward-evolving states by rejection sampling.
//! - [`protocols`]: teleportation, deterministic time reversal of backward
//!   states, backward-state relocation, and round-based demolition
//!   measurement of nonlocal variables.
//! - [`ledger`]: event transcripts, the instantaneity check and resource counts.
//! - [`experiments`]: the built-in experiment catalog used by the CLI.

pub mod error;
pub mod experiments;
pub mod ledger;
pub mod protocols;
pub mod qcore;
pub mod rng;
pub mod stats;
pub mod tsv;

pub use error::{Error, Result};
pub use rng::RandomSource;
