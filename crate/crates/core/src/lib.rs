//! Exact classical simulation of the subexponential dihedral hidden subgroup sieve.
//!
//! The crate models the quantum process at the level of phase qubits
//! `|0> + e^(2 pi i k s / N) |1>`: a qubit is its label `k` plus a flag for
//! corrupted samples, and measurements are drawn from their exact Born
//! probabilities. Everything above that (sieves, slope recovery, reductions
//! and the experiment harness) is ordinary classical code.

pub mod error;
pub mod greedy;
pub mod group;
pub mod harness;
pub mod oracle;
pub mod phase;
pub mod recovery;
pub mod staged;
pub mod util;
pub mod verifier;

pub use error::{Error, Result};
pub use group::{AbelianGroupSpec, DihedralElement, Element, GroupCtx};
pub use oracle::{HidingOracle, OracleValue};
pub use phase::{PhaseBackend, PhaseQubit};
