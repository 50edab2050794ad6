//! Consensus-based multi-agent reinforcement learning for participatory
//! land-use readjustment.
//!
//! Parcels form a spatial graph; stakeholder agents (planners, developers
//! and three resident income brackets) vote parcel by parcel on new land
//! uses. Each agent learns a graph-attention voting policy from a reward
//! combining its own preferences, repeated-request decay, district-level
//! density and diversity, and equity of decision acceptance.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::should_implement_trait)]

pub mod agents;
pub mod baselines;
pub mod cli;
pub mod environment;
pub mod error;
pub mod nn;
pub mod rewards;
pub mod spatial_graph;
pub mod training;

pub use error::{Error, Result};
