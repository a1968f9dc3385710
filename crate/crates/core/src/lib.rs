//! Generative adversarial networks with Gaussian-mixture latent priors.
//!
//! The crate is organized bottom-up:
//!
//! - [`nn`]: tensors, reverse-mode autodiff, MLPs, Adam.
//! - [`latent`]: the mixture prior (static or learnable) and mixture densities.
//! - [`gan`]: generator/discriminator wrappers and the adversarial losses.
//! - [`trainer`]: the alternating training loop, checkpoints and history.
//! - [`scorer`]: classifier-based quality, diversity and inception-style scores, MS-SSIM.
//! - [`clustering`]: clustering with a trained generator, plus ACC and NMI.
//! - [`data`]: the toy mixture dataset, IDX ingestion and stratified subsets.

pub mod clustering;
pub mod data;
pub mod error;
pub mod gan;
pub mod latent;
pub mod nn;
pub mod scorer;
pub mod trainer;

pub use error::{Error, Result};
