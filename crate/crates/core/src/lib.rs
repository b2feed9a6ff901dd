//! Private Individual Computation in the shuffle model.
//!
//! Users sanitize their data with a local randomizer, encrypt it together with
//! a one-time public key, and pass it through a shuffler. The server computes a
//! permutation-equivariant task over the anonymous list and publishes one
//! encrypted result per key on a bulletin board.
//!
//! Modules, from the bottom up:
//! - [`geometry`]: domains, volumes and uniform samplers.
//! - [`randomizers`]: Minkowski Response and baseline mechanisms.
//! - [`amplification`]: central/local budget conversion.
//! - [`envelope`]: keys, hybrid encryption, signatures, wire codec, shuffle.
//! - [`protocol`]: a full round across user, shuffler and server roles.
//! - [`tasks`]: matchings, radius neighbours, Shapley incentives.
//! - [`harness`]: experiment drivers and metrics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod amplification;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod protocol;
pub mod randomizers;
pub mod tasks;

pub use error::{Error, Result};
pub use geometry::{DomainSpec, Region, Shape, Vector};
pub use randomizers::{LocalRandomizer, Mechanism, SanitizedReport};
