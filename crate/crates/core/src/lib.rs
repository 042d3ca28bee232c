//! Lossless multiport impedance models of superconducting circuits: synthesis,
//! interconnection, rational fitting, transmon Hamiltonians and decay estimates.

pub mod error;
pub mod linalg;
pub mod netcore;
pub mod synthesis;
pub mod distributed;
pub mod interconnect;
pub mod vfit;
pub mod qham;
pub mod decay;
pub mod fixtures;
pub mod cli;

pub use error::{Error, Result};
