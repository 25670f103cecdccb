//! Convolutional reconstruction network with hand-written gradients.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod train;

pub use checkpoint::Checkpoint;
pub use loss::loss_mse;
pub use network::{Arch, DenseInit, Gradients, Mode, Network};
pub use optim::{sgdm_step, sgdm_update, NetworkParams, SgdmState, TrainConfig};
pub use train::{iteration_plan, train, EpochStats, TrainingSample};
