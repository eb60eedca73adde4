//! Engine for constructing, simulating and verifying communication-optimal
//! blind quantum gate protocols.
//!
//! The crate is organised around the pipeline used by the command-line tool:
//!
//! 1. [`pauli`] / [`gf2`]: phase-exact Pauli strings and binary symplectic
//!    linear algebra.
//! 2. [`subspaces`]: the preserved Pauli subspace of a gate family, the
//!    commutant basis B used for decompositions, and its dual basis Q.
//! 3. [`sim`]: a dense pure-state / density-matrix simulator with explicit
//!    register layout, seeded measurement and entropy accounting.
//! 4. [`padding`]: Pauli padding sets, their Walsh transform and the hiding
//!    checks they must satisfy.
//! 5. [`clifford`]: tableau algebra, stabilizer extraction and the separable
//!    measurement construction for Clifford families.
//! 6. [`protocols`]: the receive-and-measure and prepare-and-send protocols
//!    with transcripts, blindness verification and the entropy ledger.

pub mod clifford;
pub mod error;
pub mod gates;
pub mod gf2;
pub mod padding;
pub mod pauli;
pub mod protocols;
pub mod report;
pub mod sim;
pub mod subspaces;

pub use error::{Error, Result};
pub use pauli::{CMat, PauliString};
