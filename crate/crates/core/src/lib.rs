//! Clock-driven spiking network simulator with calcium-trace plasticity.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod engine;
pub mod io;
pub mod protocols;
pub mod rsnn;
pub mod error;
pub mod neuron;
pub mod plasticity;
pub mod scalar;
pub mod sfnn;
pub mod spikegen;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use spikegen::SpikeTrain;

pub type Network = engine::Network<f64>;
pub type Simulation = engine::Simulation<f64>;
pub type RunResult = engine::RunResult<f64>;
pub type BcallParams = plasticity::BcallParams<f64>;
pub type SynapseState = plasticity::SynapseState<f64>;
pub type NeuronParams = neuron::NeuronParams<f64>;
pub type NeuronState = neuron::NeuronState<f64>;
