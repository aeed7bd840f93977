//! Bi-directional predictive coding networks.
//!
//! Networks built with this crate share one weight block per pair of
//! adjacent layers: the block's forward map produces the feedforward
//! prediction of the next layer and its exact adjoint produces the feedback
//! prediction of the previous layer. Learning is purely local — each layer
//! updates its activity, and each interface its weights, from prediction
//! errors available on the spot — so all layers can learn in parallel. A
//! trained network classifies with a feedforward sweep and reconstructs its
//! input from the representation of any layer with a feedback sweep.
//!
//! Modules:
//!
//! - [`tensor`] — dense f64 vectors, matrices, feature maps; matrix products
//!   and same-padded convolution with their exact adjoints.
//! - [`network`] — layer specifications, tied weight blocks, initialization,
//!   parameter counting.
//! - [`state`] — per-layer activities with clamp flags, for one sample or a
//!   minibatch.
//! - [`learning`] — prediction errors, representation and weight energies,
//!   analytic gradients, the relaxation loop and minibatch training.
//! - [`inference`] — classification (feedforward or iterative), per-layer
//!   reconstruction, dataset evaluation.
//! - [`data`] — IDX ingestion, one-hot targets, augmentation, deterministic
//!   minibatching.
//! - [`metrics`] — accuracy, PSNR, SSIM, confusion matrices.
//! - [`checkpoint`] — flat binary weight snapshots.
//! - [`config`] — experiment configuration files and named architectures.
//! - [`gradcheck`] — finite-difference verification of every analytic
//!   gradient.
//! - [`cli`] — the `dbpc` command-line surface.
//!
//! Everything is deterministic: a fixed seed reproduces runs byte for byte,
//! for any `--threads` setting.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod inference;
pub mod learning;
pub mod metrics;
pub mod network;
pub mod parallel;
pub mod pgm;
pub mod rng;
pub mod state;
pub mod tensor;

pub use error::{Error, Result};
pub use network::{Hyperparams, LayerSpec, NetworkParams, WeightBlock};
pub use state::ActivationState;
pub use tensor::{ConvKernel, Tensor};
