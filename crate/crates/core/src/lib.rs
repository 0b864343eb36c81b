//! SIR epidemics on configuration-model random graphs.
//!
//! The crate has four parts:
//!
//! - [`measures`]: finite measures on the nonnegative integers (degree
//!   distributions, edge-to-susceptible counts) with ranked-atom access,
//!   moments, size-biased sampling and the L1 distance.
//! - [`epidemic_sim`]: exact event-driven simulation of the epidemic on the
//!   half-edge level. The graph is never built; only the susceptible degree
//!   measure and the per-individual counts of edges to susceptibles for the
//!   infectious and removed classes are tracked.
//! - [`limit_odes`]: the deterministic large-graph limit: Volz's equations,
//!   the truncated countable measure system, Miller's one-variable reduction,
//!   edge-count identities and a lower bound on the validity horizon.
//! - [`harness`]: Monte-Carlo replicas, `1/n` scaling and comparison of the
//!   scaled stochastic paths against the limit.

// Checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod epidemic_sim;
pub mod error;
pub mod harness;
pub mod io;
pub mod limit_odes;
pub mod measures;
pub mod rng;

pub use error::{Error, Result};
