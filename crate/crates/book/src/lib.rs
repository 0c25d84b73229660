//! Runs the guide's code blocks as doctests.
//!
//! mdbook cannot link external crates when testing, so each chapter is
//! attached to an empty module here and `cargo test` picks up its code.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/voxels.md")]
pub mod voxels {}
#[doc = include_str!("../../../book/src/denoising.md")]
pub mod denoising {}
#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}
#[doc = include_str!("../../../book/src/extraction.md")]
pub mod extraction {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
