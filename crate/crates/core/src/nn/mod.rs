//! Minimal reverse-mode differentiation and the GAT actor/critic networks.

pub mod checkpoint;
pub mod gat;
pub mod matrix;
pub mod nets;
pub mod tape;

pub use gat::{gat_forward, Activation, GatLayer};
pub use matrix::Matrix;
pub use nets::{sgd_step, NetConfig, Parameterized, PolicyNet, ValueNet, ACTIONS, NODE_FEATURES};
pub use tape::{elu, leaky_relu, softmax_slice, Gradients, Neighborhoods, Tape, Var};
