//! Self-paced CNN training for scarce-label patch classification.
//!
//! A small CNN is trained on the manually labeled patches. A bootstrap
//! ensemble trained on 90% class-stratified subsamples scores every unlabeled
//! patch; one-sided Welch t-tests with Benjamini–Hochberg control decide which
//! patches are confidently assigned, and those become virtual training
//! samples for a freshly initialized network.

pub mod bootstrap;
pub mod dataset;
pub mod error;
pub mod network;
pub mod numerics;
pub mod pipeline;
pub mod selection;

pub use error::{Error, Result};

/// Number of tissue classes.
pub const NUM_CLASSES: usize = 3;
