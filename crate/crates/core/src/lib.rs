//! Ambulance dispatch simulation and a family of Deep Q-learning agents.
//!
//! The crate is split into:
//!
//! - [`env`]: minute-resolution simulation of incidents, ambulances and
//!   hospitals, behind a reset/step/render interface.
//! - [`neural`]: a small feed-forward value-network engine (dense, noisy and
//!   dueling layers, exact backpropagation, Adam).
//! - [`replay`]: uniform, prioritized (sum-tree) and bootstrap transition memory.
//! - [`agents`]: random assignment plus nine Deep-Q variants.
//! - [`harness`]: the train / evaluate / compare protocol and its CSV outputs.
//! - [`cli`]: scenario presets, config files and subcommand wiring.

pub mod agents;
pub mod cli;
pub mod env;
mod error;
pub mod harness;
pub mod neural;
pub mod replay;

pub use error::{Error, Result};
