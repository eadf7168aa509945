//! Metastability and mixing of Glauber dynamics for the mean-field
//! (Curie-Weiss) Potts model at low temperature.
//!
//! * [`landscape`]: free energy critical points, critical temperatures, depths.
//! * [`limit_chain`]: Eyring-Kramers prefactors and the reduced chain.
//! * [`exact`]: the exact proportions chain and its spectral / metastable analysis.
//! * [`potential`]: capacities, hitting times and variational bounds.
//! * [`sim`]: seeded Monte Carlo simulation of the dynamics.

pub mod chain;
pub mod cli;
pub mod error;
pub mod exact;
pub mod exec;
pub mod io;
pub mod landscape;
pub mod limit_chain;
pub mod mixing;
pub mod model;
pub mod potential;
pub mod roots;
pub mod sim;
pub mod verify;

pub use error::{CwpError, Result};
pub use exec::Exec;
pub use model::{GridPoint, ModelParams, RateKind};
