//! Simulation and verification of closed quantum dynamics driven by
//! stochastic Hamiltonian noise.
//!
//! * [`qcore`]: dense states and operators, Pauli algebra, fidelity and
//!   Bures angle, Hermitian exponentials.
//! * [`sde`]: ideal propagation and Ito trajectory integration.
//! * [`bounds`]: the exponential fidelity lower bound, its variants and the
//!   stochastic quantum speed limit.
//! * [`ensemble`]: Monte Carlo aggregation and statistical checks.

pub mod bounds;
pub mod ensemble;
pub mod error;
pub mod qcore;
pub mod sde;

pub use error::{Error, Result};
