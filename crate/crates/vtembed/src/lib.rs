//! File formats, the training driver and the command-line front end for
//! `vtembed-core`.

mod bytes;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod features;
pub mod index_file;
pub mod manifest;
pub mod pipeline;
pub mod task;
pub mod train;

pub use error::{Error, Result};
