//! The patch classifier: architecture descriptors for the baseline network
//! and its four variants, forward/backward passes, training and checkpoints.
//!
//! Layer chain for `n` conv layers and `m` fc layers:
//! `[conv3x3(same) → LeakyReLU → maxpool2x2] × (n−1) → conv3x3(same) → LeakyReLU
//! → global max pool → [fc → LeakyReLU → dropout] × (m−1) → fc → softmax`.
//! With 36×36 input the baseline maps go 36→18→9→4 and the global pool yields
//! a 180-long feature vector.

mod arch;
mod checkpoint;
mod model;
mod train;

pub use arch::{Architecture, Variant, PATCH_SIZE};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use model::{build_model, forward_proba, CnnModel, Trace};
pub use train::{accuracy, predict_labels, train, TrainConfig, TrainReport};
