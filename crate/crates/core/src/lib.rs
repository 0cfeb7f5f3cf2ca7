//! Household–workplace SIR epidemics with two levels of mixing.
//!
//! The crate provides an exact event-driven simulator of the individual
//! based process, the closed large-population ODE system over structure
//! compositions, an edge-based compartmental alternative, and the tools used
//! to compare them.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bench;
pub mod ebcm;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod fenwick;
pub mod graph;
pub mod integrator;
pub mod reduced;
pub mod rng;
pub mod scenario;
pub mod size_dist;

pub use error::{Error, Result};
