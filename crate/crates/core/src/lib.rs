//! Generative modelling of 3D molecules as voxelized atomic densities.
//!
//! The crate covers the whole pipeline:
//!
//! - [`grid`]: Gaussian occupancy voxelization and rigid-motion augmentation.
//! - [`denoise`]: the denoiser interface, the score identity, a closed-form
//!   Gaussian-mixture denoiser and a trainable convolutional denoiser.
//! - [`sampler`]: walk-jump sampling with underdamped Langevin dynamics.
//! - [`extract`]: peak detection and coordinate refinement.
//! - [`chem`]: bond perception, valence checks and canonical graph hashes.
//! - [`metrics`]: distribution distances and the evaluation report.
//! - [`io`]: XYZ files, grid files, fixtures and synthetic molecules.

pub mod chem;
pub mod denoise;
pub mod error;
pub mod extract;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod sampler;

pub use error::{Error, Result};
