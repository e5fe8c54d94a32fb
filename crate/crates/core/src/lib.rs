//! Shared-parameter contrastive image–text encoder at toy scale.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Everything here is pure computation: batch kernels, the
//! contrastive objectives with intra-modality separation, a small
//! pre-norm transformer with hand-written backpropagation, a synthetic
//! paired dataset generator, the AdamW training loop and the geometry
//! metrics. File formats and the command line live in the `alignclip` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod encoder;
mod error;
pub mod geometry;
pub mod linalg;
mod math;
pub mod metrics;
pub mod objectives;
pub mod optim;
pub mod trainer;

pub use error::{Error, Result};
pub use geometry::{EmbeddingBatch, LabelVector, SimilarityMatrix};
pub use linalg::Matrix;
pub use objectives::{LossBreakdown, LossConfig, PairedBatch, SeparationMode, Temperature};
