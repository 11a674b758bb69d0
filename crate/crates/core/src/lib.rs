//! Online joint resource scheduling (OJRS) for multi-user, multi-server
//! mobile edge computing.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: scenario, channel sampling and the weighted-latency objective.
//! - [`allocator`]: exact power/frequency allocation for a fixed offloading decision.
//! - [`neural`]: a small feedforward network with manual backprop and Adam.
//! - [`sae`]: the related/regularized stacked autoencoder that compresses channels.
//! - [`asa`]: adaptive simulated annealing over integer offloading vectors.
//! - [`replay`]: preserve/priority experience replay.
//! - [`drl`]: the policy network and the per-epoch training loop.
//! - [`bench`]: baselines, the PSO oracle, NRR and experiment drivers.
//! - [`config`]: TOML experiment configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod asa;
pub mod bench;
pub mod config;
pub mod drl;
pub mod error;
pub mod model;
pub mod neural;
pub mod replay;
pub mod rng;
pub mod sae;

pub use error::{Error, Result};
