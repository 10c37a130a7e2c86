//! Distributed estimation and control of alpha-centrality on networks of
//! agents with local communication.
//!
//! * [`estimation`]: agents compute their own centrality by a linear
//!   iteration over neighbor messages, with an a-priori error bound.
//! * [`consensus`]: agents reach the centrality-weighted average of their
//!   initial values while estimating the weights.
//! * [`control`]: the smallest bounded weight change that achieves a target
//!   centrality, solved independently per agent.
//! * [`simnet`]: a synchronous message-passing simulator that runs the same
//!   protocols with strictly local knowledge and audits data access.

pub mod consensus;
pub mod control;
pub mod error;
pub mod estimation;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod random;
pub mod simnet;
pub mod trace;

pub use error::{Error, Result};
pub use graph::InfluenceGraph;
