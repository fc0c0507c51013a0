//! Fair and efficient allocation of indivisible items in hierarchies.
//!
//! Agents form a rooted tree. Leaves hold matroid-rank valuations over the
//! items; an internal node's utility is the sum of its children's. Each
//! internal node has its own fairness criterion over its children.
//!
//! * [`sma::run_sma`] allocates top-down, solving one local problem per
//!   internal node against the estimated utilities of its children.
//! * [`mgys::run_mgys`] runs a single Yankee Swap over the leaves, picking
//!   who moves next by walking the tree with per-node gain functions.
//! * [`oracle`] enumerates small instances exhaustively.
//! * [`harness`] generates instances, audits allocations and benchmarks.

pub mod error;
pub mod fairness;
pub mod harness;
pub mod mgys;
pub mod model;
pub mod oracle;
pub mod sma;
pub mod valuations;
pub mod welfare;

pub use error::{Error, Result};
pub use fairness::{FairnessCriterion, UtilityVector};
pub use harness::Instance;
pub use model::{Item, ItemSet, MultilevelAllocation, NodeId, Tree, Weight};
pub use valuations::{SetFunction, Valuation};
