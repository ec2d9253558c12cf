//! Summary-level Monte Carlo tree search for multi-attribute controllable
//! summarization.
//!
//! A search starts from a summary that requests every target attribute at
//! once, then explores orders of single-attribute adjustments produced by a
//! [`policy::Policy`]. Each node is scored by its control degree and the
//! best node anywhere in the tree is returned.

pub mod attributes;
pub mod baselines;
pub mod harness;
pub mod policy;
pub mod reward;
pub mod search;

pub use attributes::{
    AttributeError, AttributeKind, AttributeTarget, AttributeVector, Document, Providers, Targets, Utterance,
};
pub use policy::{History, Policy, PolicyError};
pub use reward::{DegreeBreakdown, RewardConfig, RewardError, ValueMode};
pub use search::{run_search, SearchConfig, SearchError, SearchResult, SearchTrace};
