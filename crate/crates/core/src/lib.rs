//! Semi-supervised community detection.
//!
//! Given a graph and a handful of labelled communities, the pipeline
//! (1) trains an order-embedding encoder so that sub-communities embed
//! below their super-communities, (2) locates candidate k-ego nets whose
//! embeddings sit closest to the labelled ones, and (3) refines each
//! located community with a policy-gradient agent that excludes members
//! and absorbs boundary nodes.

pub mod error;
pub mod exec;
pub mod graph;
pub mod locator;
pub mod metrics;
pub mod ndiff;
pub mod pipeline;
pub mod rewriter;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Exec;
pub use graph::{Community, CommunitySet, Graph};
