//! Gate-based quantum annealing for the one-dimensional Hubbard model with
//! open boundaries.
//!
//! The crate is organised bottom-up:
//!
//! * [`simcore`]: dense statevector engine and Pauli-sum expectation values.
//! * [`circuit`]: flat gate lists, gate counting, depth, QASM/JSON export.
//! * [`hamiltonian`]: Hubbard parameters, the Jordan-Wigner qubit operator,
//!   fixed-particle-number sector diagonalization and a dense
//!   piecewise-constant time-evolution reference.
//! * [`stateprep`]: free-fermion ground state and its Givens-rotation circuit.
//! * [`anneal`]: schedules, second-order product-formula steps and execution.
//! * [`bethe`]: open-boundary Bethe-ansatz root solver for exact energies.
//! * [`analysis`]: power-law fits, onset detection, sampling estimator and
//!   scaling reports.
//! * [`oracles`]: cross-checks of every pipeline stage against independent
//!   dense/brute-force references.
//!
//! Qubit `q` is bit `q` of the amplitude index (qubit 0 is least significant).
//! Spin-up site `j` (0-based) lives on qubit `j`, spin-down site `j` on qubit
//! `L + j`.

pub mod analysis;
pub mod anneal;
pub mod bethe;
pub mod circuit;
mod clock;
pub mod error;
pub mod hamiltonian;
pub mod oracles;
pub mod records;
pub mod simcore;
pub mod stateprep;

pub use error::{Error, Result};
