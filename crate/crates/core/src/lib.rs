//! Speaker-diarization toolkit: a local end-to-end neural segmentation model
//! (pluggable acoustic backbone, Conformer encoder, powerset classifier)
//! applied on sliding windows, followed by cannot-link constrained
//! agglomerative clustering of speaker embeddings, overlap-averaged
//! stitching, and DER scoring.

pub mod error;
pub mod nn;

pub use error::{Error, Result};
