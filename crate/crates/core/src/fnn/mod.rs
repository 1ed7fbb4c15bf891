//! Functional neural network.
//!
//! The first layer holds functional neurons `U(b + sum_r int W_r(beta_r, t) X_r(t) dt)`
//! with `W_r` expanded on a basis, so each neuron acts on the basis
//! coordinates of the input curves. Optional scalar covariates join the
//! functional outputs unchanged and everything feeds fully connected numeric
//! layers ending in a single identity-activated output.

mod activation;
mod network;
mod train;

pub use activation::Activation;
pub use network::{
    functional_neuron_forward, Gradient, LayerSpec, Network, NetworkParameters, NetworkSpec,
};
pub use train::{train, Standardizer, TrainConfig, TrainedNetwork, TrainingRow};
