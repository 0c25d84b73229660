//! Denoisers and the empirical-Bayes score identity.
//!
//! A least-squares denoiser of `Y = X + N(0, σ²I)` estimates `E[X | Y = y]`,
//! and that estimate determines the score of the smoothed density:
//! `∇ log p(y) = (x̂(y) - y) / σ²`.

mod checkpoint;
mod conv;
mod gmm;
mod train;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use conv::{Activation, Architecture, ConvDenoiser, ConvDenoiserParams, ForwardPass};
pub use gmm::{gmm_oracle_denoise, GmmComponent, GmmDenoiser, GmmModel};
pub use train::{train_denoiser, training_grid, validation_loss, TrainHyper, TrainOutcome, TrainRecord};

use crate::error::{Error, Result};

/// Standard deviation of the isotropic Gaussian corruption.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(NoiseLevel(sigma))
        } else {
            Err(Error::invalid(format!("noise level must be positive, got {sigma}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn variance(self) -> f64 {
        self.0 * self.0
    }
}

impl Default for NoiseLevel {
    fn default() -> Self {
        NoiseLevel(0.9)
    }
}

impl TryFrom<f64> for NoiseLevel {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        NoiseLevel::new(v)
    }
}

impl From<NoiseLevel> for f64 {
    fn from(n: NoiseLevel) -> f64 {
        n.0
    }
}

/// An estimator of the clean signal given a noisy observation, over flat tensors.
pub trait Denoiser: Send + Sync {
    fn sigma(&self) -> NoiseLevel;

    /// Length of the flat tensors this denoiser accepts.
    fn dim(&self) -> usize;

    /// Bayes estimate `x̂(y)`. Output has the same length as `y`.
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn sigma(&self) -> NoiseLevel {
        (**self).sigma()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(y)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn sigma(&self) -> NoiseLevel {
        (**self).sigma()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(y)
    }
}

pub(crate) fn check_shape(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "tensor has {got} entries, denoiser expects {expected}"
        )))
    }
}

/// Returns `y` unchanged.
#[derive(Clone, Copy, Debug)]
pub struct IdentityDenoiser {
    pub dim: usize,
    pub sigma: NoiseLevel,
}

impl Denoiser for IdentityDenoiser {
    fn sigma(&self) -> NoiseLevel {
        self.sigma
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_shape(self.dim, y.len())?;
        Ok(y.to_vec())
    }
}

/// Ignores its input and returns a fixed tensor.
#[derive(Clone, Debug)]
pub struct ConstantDenoiser {
    pub value: Vec<f64>,
    pub sigma: NoiseLevel,
}

impl Denoiser for ConstantDenoiser {
    fn sigma(&self) -> NoiseLevel {
        self.sigma
    }
    fn dim(&self) -> usize {
        self.value.len()
    }
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_shape(self.value.len(), y.len())?;
        Ok(self.value.clone())
    }
}

/// Smoothed score `g(y) = (x̂(y) - y) / σ²`.
pub fn score_from_denoiser<D: Denoiser + ?Sized>(den: &D, y: &[f64]) -> Result<Vec<f64>> {
    check_shape(den.dim(), y.len())?;
    let var = den.sigma().variance();
    let xhat = den.apply(y)?;
    check_shape(y.len(), xhat.len())?;
    Ok(xhat.iter().zip(y).map(|(x, y)| (x - y) / var).collect())
}

/// Adds `N(0, σ²I)` to `x`.
pub fn add_noise<R: Rng + ?Sized>(x: &[f64], sigma: NoiseLevel, rng: &mut R) -> Vec<f64> {
    let s = sigma.get();
    x.iter()
        .map(|&v| {
            let e: f64 = StandardNormal.sample(rng);
            v + s * e
        })
        .collect()
}

/// Sampled least-squares denoising objective: mean over the batch of
/// `‖x - x̂(x + σε)‖²`.
pub fn denoising_loss<D, R>(den: &D, batch: &[Vec<f64>], rng: &mut R) -> Result<f64>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
{
    if batch.is_empty() {
        return Err(Error::invalid("denoising loss needs a non-empty batch"));
    }
    let mut total = 0.0;
    for x in batch {
        check_shape(den.dim(), x.len())?;
        let y = add_noise(x, den.sigma(), rng);
        let xhat = den.apply(&y)?;
        total += x.iter().zip(&xhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}
