use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_shape, Denoiser, NoiseLevel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic standard deviation; 0 makes the component a point mass.
    pub tau: f64,
}

/// Isotropic Gaussian mixture `p(x) = Σ wᵢ N(x; μᵢ, τᵢ² I)`.
///
/// Convolving with `N(0, σ²I)` keeps it a mixture with variances
/// `τᵢ² + σ²`, so the smoothed density, its score and the posterior mean are
/// all available in closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GmmComponent>", into = "Vec<GmmComponent>")]
pub struct GmmModel {
    components: Vec<GmmComponent>,
    dim: usize,
}

impl TryFrom<Vec<GmmComponent>> for GmmModel {
    type Error = Error;
    fn try_from(c: Vec<GmmComponent>) -> Result<Self> {
        GmmModel::new(c)
    }
}

impl From<GmmModel> for Vec<GmmComponent> {
    fn from(m: GmmModel) -> Self {
        m.components
    }
}

impl GmmModel {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("mixture needs at least one component"))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::invalid("mixture dimension must be positive"));
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != dim {
                return Err(Error::invalid(format!("component {i} has the wrong dimension")));
            }
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(Error::invalid(format!("component {i} weight must be positive")));
            }
            if !(c.tau.is_finite() && c.tau >= 0.0) {
                return Err(Error::invalid(format!("component {i} tau must be >= 0")));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::invalid(format!("component {i} mean is not finite")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(GmmModel { components, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    /// Per-component log of `wᵢ N(y; μᵢ, (τᵢ² + σ²) I)`.
    fn log_joint(&self, y: &[f64], sigma: NoiseLevel) -> Vec<f64> {
        let d = self.dim as f64;
        self.components
            .iter()
            .map(|c| {
                let var = c.tau * c.tau + sigma.variance();
                let r2: f64 = y.iter().zip(&c.mean).map(|(a, b)| (a - b) * (a - b)).sum();
                c.weight.ln() - 0.5 * d * (2.0 * PI * var).ln() - 0.5 * r2 / var
            })
            .collect()
    }

    /// Log of the smoothed density `p(y) = ∫ p(x) N(y; x, σ²I) dx`.
    pub fn log_density(&self, y: &[f64], sigma: NoiseLevel) -> Result<f64> {
        check_shape(self.dim, y.len())?;
        Ok(log_sum_exp(&self.log_joint(y, sigma)))
    }

    /// Posterior component probabilities given a noisy observation.
    pub fn responsibilities(&self, y: &[f64], sigma: NoiseLevel) -> Result<Vec<f64>> {
        check_shape(self.dim, y.len())?;
        let logs = self.log_joint(y, sigma);
        let lse = log_sum_exp(&logs);
        Ok(logs.into_iter().map(|l| (l - lse).exp()).collect())
    }

    /// Exact posterior mean `E[X | Y = y]`.
    pub fn posterior_mean(&self, y: &[f64], sigma: NoiseLevel) -> Result<Vec<f64>> {
        let resp = self.responsibilities(y, sigma)?;
        let s2 = sigma.variance();
        let mut out = vec![0.0; self.dim];
        for (c, r) in self.components.iter().zip(resp) {
            let t2 = c.tau * c.tau;
            let denom = t2 + s2;
            for k in 0..self.dim {
                out[k] += r * (t2 * y[k] + s2 * c.mean[k]) / denom;
            }
        }
        Ok(out)
    }

    /// Draws a clean sample `x ~ p(x)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = i;
                break;
            }
        }
        let c = &self.components[pick];
        c.mean
            .iter()
            .map(|&m| {
                let e: f64 = StandardNormal.sample(rng);
                m + c.tau * e
            })
            .collect()
    }

    /// Index of the component mean nearest to `x`.
    pub fn nearest_mean(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.components.iter().enumerate() {
            let d: f64 = x.iter().zip(&c.mean).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior mean of `X` under a mixture prior; the closed-form denoiser.
pub fn gmm_oracle_denoise(gmm: &GmmModel, y: &[f64], sigma: NoiseLevel) -> Result<Vec<f64>> {
    gmm.posterior_mean(y, sigma)
}

/// A mixture model paired with a noise level, usable wherever a trained
/// denoiser is.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GmmDenoiser {
    pub model: GmmModel,
    pub sigma: NoiseLevel,
}

impl GmmDenoiser {
    pub fn new(model: GmmModel, sigma: NoiseLevel) -> Self {
        GmmDenoiser { model, sigma }
    }
}

impl Denoiser for GmmDenoiser {
    fn sigma(&self) -> NoiseLevel {
        self.sigma
    }
    fn dim(&self) -> usize {
        self.model.dim
    }
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.model.posterior_mean(y, self.sigma)
    }
}
