//! Joint text-video embedding: gated embedding units over pooled clip features
//! and convolutionally encoded captions, trained with a weighted max-margin
//! ranking loss and evaluated by caption-to-clip retrieval and ordered step
//! localization.
//!
//! The crate is `no_std` (with `alloc`). File formats, logging and the command
//! line live in the companion `vtembed` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod gated;
pub mod index;
pub mod matrix;
pub mod synth;
pub mod text;
pub mod trainer;

pub use dataset::{ClipRecord, Corpus, Dataset, FeatureStore, Frame, Pair, WordEmbeddingTable};
pub use error::{Error, Result};
pub use gated::{Dims, GatedUnitParams, ModelParameters, Preset};
pub use matrix::Matrix;
pub use text::{TextEncoderParams, TokenSequence};
pub use trainer::{BatchConfig, Trainer};
