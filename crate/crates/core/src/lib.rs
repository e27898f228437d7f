//! Single-view graph contrastive learning with soft neighborhood awareness.
//!
//! The crate is organised bottom-up:
//!
//! - [`diffcore`]: dense tensors, a single-use reverse-mode tape, Adam and
//!   seeded RNG streams.
//! - [`graphdata`]: CSR graphs, file ingestion, the symmetric normalized
//!   adjacency, homophily statistics and a stochastic block model generator.
//! - [`encoder`]: the dropout → base encoder → activation → layer-norm stack
//!   and the two-layer projector.
//! - [`contrast`]: stochastic neighbor masking, the normalized JSD objective
//!   and the JSD / InfoNCE ablation estimators.
//! - [`trainer`]: configuration, the full-batch training loop, ablations and
//!   checkpoints.
//! - [`evaluate`]: linear probe, k-means with NMI / homogeneity, similarity
//!   histograms and the inference timing harness.

pub mod contrast;
pub mod diffcore;
pub mod encoder;
pub mod error;
pub mod evaluate;
pub mod graphdata;
pub mod trainer;

pub use error::{Result, SignaError};
