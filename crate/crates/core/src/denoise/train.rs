use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conv::{Architecture, ConvDenoiser, ConvDenoiserParams};
use super::{add_noise, denoising_loss, Denoiser, NoiseLevel};
use crate::error::{Error, Result};
use crate::grid::{BoundsPolicy, Molecule, Placement, RigidTransform, Voxelizer};

/// Optimisation settings for [`train_denoiser`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Heavy-ball momentum; 0 gives plain SGD.
    pub momentum: f64,
    pub ema_decay: f64,
    /// Feature maps in the hidden layers.
    pub width: usize,
    /// Residual blocks between input and output convolutions.
    pub blocks: usize,
    /// Rescale the batch gradient to at most this global L2 norm.
    pub max_grad_norm: Option<f64>,
    /// Apply random rotations and shifts to every training sample.
    pub augment: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            steps: 2000,
            batch_size: 8,
            learning_rate: 2e-4,
            momentum: 0.9,
            ema_decay: 0.999,
            width: 8,
            blocks: 1,
            max_grad_norm: Some(100.0),
            augment: true,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 || self.width == 0 {
            return Err(Error::invalid("steps, batch size and width must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(Error::invalid("ema decay must be in [0, 1]"));
        }
        if let Some(c) = self.max_grad_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid("gradient clip must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    /// Mean per-sample squared error of the batch.
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ConvDenoiserParams,
    pub trace: Vec<TrainRecord>,
}

/// Clean training grid for one molecule: centred, optionally augmented, and
/// voxelized as placed. Augmented atoms may leave a tight grid, so the bounds
/// policy is forced to clip.
pub fn training_grid<R: Rng + ?Sized>(mol: &Molecule, voxelizer: &Voxelizer, augment: bool, rng: &mut R) -> Result<Vec<f64>> {
    let centered = mol.centered();
    let placed = if augment && !centered.is_empty() {
        RigidTransform::sample(rng).apply(&centered)
    } else {
        centered
    };
    let vox = voxelizer.clone().with_bounds(BoundsPolicy::Clip);
    Ok(vox.voxelize(&placed, Placement::AsIs)?.to_f64())
}

/// Minimises the denoising objective with SGD over freshly augmented and
/// voxelized batches, updating the EMA shadow after every step.
pub fn train_denoiser<R: Rng + ?Sized>(
    dataset: &[Molecule],
    voxelizer: &Voxelizer,
    sigma: NoiseLevel,
    hyper: &TrainHyper,
    rng: &mut R,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    hyper.validate()?;
    let spec = voxelizer.spec;
    let arch = Architecture::new(spec.channels, spec.length, hyper.width, hyper.blocks, sigma)?;
    let mut state = ConvDenoiserParams::init(arch.clone(), hyper.ema_decay, rng)?;
    let mut velocity: Vec<Vec<f64>> = state.params.iter().map(|p| vec![0.0; p.len()]).collect();
    let mut trace = Vec::with_capacity(hyper.steps);

    for step in 0..hyper.steps {
        let jobs: Vec<(usize, u64)> = (0..hyper.batch_size)
            .map(|_| (rng.random_range(0..dataset.len()), rng.random()))
            .collect();
        let net = ConvDenoiser::new(arch.clone(), state.params.clone());
        let per_item = jobs
            .par_iter()
            .map(|&(idx, seed)| {
                let mut item_rng = ChaCha8Rng::seed_from_u64(seed);
                let x = training_grid(&dataset[idx], voxelizer, hyper.augment, &mut item_rng)?;
                let y = add_noise(&x, sigma, &mut item_rng);
                net.loss_and_gradient(&x, &y)
            })
            .collect::<Result<Vec<_>>>()?;

        let scale = 1.0 / hyper.batch_size as f64;
        let mut loss = 0.0;
        let mut grads: Vec<Vec<f64>> = state.params.iter().map(|p| vec![0.0; p.len()]).collect();
        for (l, g) in per_item {
            loss += l * scale;
            for (acc, g) in grads.iter_mut().zip(g) {
                for (a, g) in acc.iter_mut().zip(g) {
                    *a += g * scale;
                }
            }
        }
        let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        if !loss.is_finite() || !norm.is_finite() {
            return Err(Error::TrainingFailure { step, loss });
        }
        let clip = match hyper.max_grad_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        for ((p, v), g) in state.params.iter_mut().zip(&mut velocity).zip(&grads) {
            for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                *v = hyper.momentum * *v + clip * g;
                *p -= hyper.learning_rate * *v;
            }
        }
        state.update_ema();
        trace.push(TrainRecord { step, loss });
    }
    Ok(TrainOutcome { params: state, trace })
}

/// Sampled denoising loss on a fixed validation set.
pub fn validation_loss<D, R>(den: &D, grids: &[Vec<f64>], rng: &mut R) -> Result<f64>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
{
    denoising_loss(den, grids, rng)
}
