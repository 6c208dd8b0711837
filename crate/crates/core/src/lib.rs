//! Master stowage planning under demand uncertainty.
//!
//! The crate covers the decomposed MDP ([`env`]), its feasibility layers
//! ([`feasibility`]), a SAC trainer with hand-written gradients ([`learn`]) and
//! the stochastic MIP baselines with an embedded solver ([`smip`]).

pub mod cargo;
pub mod config;
pub mod env;
pub mod error;
pub mod feasibility;
pub mod geometry;
pub mod instances;
pub mod learn;
pub mod rng;
pub mod sets;
pub mod smip;
pub mod voyage;

pub use config::VoyageConfig;
pub use error::{Result, StowError};
pub use voyage::Voyage;
