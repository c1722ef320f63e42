//! Desk-scale simulator of a time-bin loop photonic processor.
//!
//! The crate combines an exact truncated-Fock engine (all gates including the
//! Kerr nonlinearity), a covariance-matrix fast path for Gaussian circuits,
//! measurement-induced conditioning with feed-forward, protocol drivers for
//! cat breeding / compass / grid-state synthesis, a Trotterized Bose-Hubbard
//! simulator with an exact-diagonalization oracle, and a scheduler that maps
//! circuits onto a multi-core time-bin loop machine.

pub mod error;
pub mod fock;

pub use error::{Result, SimError};
