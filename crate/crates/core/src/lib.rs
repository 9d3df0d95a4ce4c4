//! Simulation of parameterized quantum classifiers and certified robustness
//! bounds in fidelity distance.

pub mod bloch;
pub mod classifier;
pub mod data;
pub mod error;
pub mod quantum;
pub mod random;
pub mod reference;
pub mod selftest;
pub mod training;
pub mod verifier;

pub use error::{Error, Result};
