//! The neural field and everything needed to train and persist it.

pub mod checkpoint;
pub mod head;
pub mod optim;
pub mod siren;
pub mod steerer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use head::{head_decode, HEAD_OFFSET};
pub use optim::Adam;
pub use siren::SirenParams;
pub use steerer::{FieldEval, FreqMode, ModelOutput, NeuralSteerer, SteererConfig, Variant};
