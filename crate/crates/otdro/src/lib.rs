//! Data-driven distributionally robust optimization over structured
//! optimal-transport ambiguity sets.
//!
//! The crate provides:
//!
//! - discrete and product distributions on partitioned spaces, with
//!   empirical constructions ([`distribution`], [`space`]);
//! - exact discrete optimal transport and budget-constrained transport
//!   maximization as LP primal oracles ([`transport`]);
//! - closed-form concentration radii and per-component confidence
//!   allocation ([`concentration`]);
//! - dual reformulations of the worst-case expectation over Wasserstein
//!   hyperrectangles and multi-transport hyperrectangles, certified
//!   against the primal LPs ([`duals`]);
//! - a reproducible two-drone recharging-station placement study
//!   ([`drone`]) and Monte Carlo validation of the coverage guarantees
//!   ([`coverage`]).

pub mod concentration;
pub mod coverage;
pub mod distribution;
pub mod drone;
pub mod duals;
mod error;
mod optim;
mod simplex;
pub mod space;
pub mod transport;

pub use error::{Error, Result};
