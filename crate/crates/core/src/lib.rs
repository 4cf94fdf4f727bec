//! Reduced process tomography benchmarks: reduced Choi matrices, sampling
//! error convergence of mixed-state preparations, scrambling-based
//! preparation, and Fisher-information readout.

pub mod choi;
pub mod cli;
pub mod convergence;
pub mod error;
pub mod fidelity;
pub mod haar;
pub mod io;
pub mod metrology;
pub mod pauli;
pub mod rng;
pub mod scramble;
pub mod tensor;
pub mod tomography;

pub use error::{Error, Result};
