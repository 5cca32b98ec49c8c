//! Minimal differentiable layer stack for HoughNet.
//!
//! Layers are bias-free valid convolutions, relu, the parameter-free FHT layer
//! (whose backward pass is the exact transpose of the transform) and the
//! saturating `1 - rbf` output activation.

pub mod checkpoint;
pub mod layers;
pub mod net;
pub mod optim;
pub mod tensor;
pub mod train;

pub use layers::{l2_loss, one_minus_rbf, one_minus_rbf_grad};
pub use net::{build_houghnet, build_network, ArchConfig, ConvSpec, LayerSpec, Network, NetworkSpec};
pub use optim::Sgd;
pub use tensor::Tensor;
pub use train::{TrainConfig, TrainSample, Trainer};
