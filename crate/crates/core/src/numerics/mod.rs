//! Dense tensors, reverse-mode autodiff, AdaDelta, seeded randomness,
//! checkpoints and finite-difference gradient checks.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;

pub use gradcheck::{fd_check, fd_check_sampled, fd_check_with, GradCheckReport};
pub use graph::{sigmoid, softmax_in_place, Axis, Graph, NodeId};
pub use optim::AdaDelta;
pub use params::{Grads, ParamId, ParamStore};
pub use rng::{NoiseSource, Rng, ZeroNoise};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
