//! Organic/bandit recommendation simulator with deep Q-learning and
//! policy-gradient recommenders, plus the experiment harness that compares them.
//!
//! The network substrate in [`nn`] is generic over its scalar type; the rest
//! of the crate works in `f64` through the aliases below.

pub mod agent;
pub mod env;
pub mod harness;
pub mod nn;

pub type Tensor = nn::Tensor<f64>;
pub type Network = nn::Network<f64>;
pub type Gradients = nn::Gradients<f64>;
pub type Optimizer = nn::Optimizer<f64>;
