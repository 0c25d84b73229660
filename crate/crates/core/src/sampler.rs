//! Walk-jump sampling.
//!
//! The walk runs underdamped Langevin dynamics on the smoothed density
//! `p(y)`, driven by the score `g(y) = (x̂(y) - y) / σ²`. The discretisation
//! per step is
//!
//! ```text
//! y ← y + δ/2 · v
//! g ← g(y)
//! v ← v + uδ/2 · g
//! v ← e^{-γδ} v + uδ/2 · g + √(u (1 - e^{-2γδ})) · ε
//! y ← y + δ/2 · v
//! ```
//!
//! and a jump maps any chain position to a clean estimate `x̂(y)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoise::{check_shape, score_from_denoiser, Denoiser, NoiseLevel};
use crate::error::{Error, Result};

/// What happens when a chain produces non-finite values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergencePolicy {
    #[default]
    Error,
    /// Restart the chain from a fresh initialisation and keep going.
    Reseed,
}

/// Reseeds allowed per chain before the run gives up.
pub const MAX_RESEEDS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerParams {
    /// Step size δ.
    pub delta: f64,
    /// Friction γ.
    pub gamma: f64,
    /// Inverse mass u.
    pub u: f64,
    pub warmup_steps: u64,
    /// Walk steps between consecutive jumps (Δk).
    pub steps_between_jumps: u64,
    /// A chain is restarted once this many post-warmup steps are used up.
    pub max_steps_after_warmup: u64,
    /// Parallel chains; `None` means `min(n_samples, 64)`.
    pub n_chains: Option<usize>,
    pub on_divergence: DivergencePolicy,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            delta: 0.5,
            gamma: 1.0,
            u: 1.0,
            warmup_steps: 1000,
            steps_between_jumps: 500,
            max_steps_after_warmup: 1000,
            n_chains: None,
            on_divergence: DivergencePolicy::Error,
        }
    }
}

impl SamplerParams {
    /// Checks the per-step constants. `gamma = 0` is accepted for
    /// frictionless (Hamiltonian) runs.
    pub fn validate_step(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.delta) || !ok(self.u) || !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid(format!(
                "need delta > 0, u > 0, gamma >= 0 (got {}, {}, {})",
                self.delta, self.u, self.gamma
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_step()?;
        if self.gamma <= 0.0 {
            return Err(Error::invalid("friction must be positive for sampling"));
        }
        if self.steps_between_jumps == 0 {
            return Err(Error::invalid("steps between jumps must be at least 1"));
        }
        if self.steps_between_jumps > self.max_steps_after_warmup {
            return Err(Error::invalid(format!(
                "steps between jumps ({}) exceed the post-warmup budget ({})",
                self.steps_between_jumps, self.max_steps_after_warmup
            )));
        }
        if self.n_chains == Some(0) {
            return Err(Error::invalid("need at least one chain"));
        }
        Ok(())
    }

    pub fn chains_for(&self, n_samples: usize) -> usize {
        self.n_chains.unwrap_or_else(|| n_samples.min(64)).max(1)
    }
}

/// Position and velocity of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub chain: usize,
}

/// `y₀ = N(0, σ²I) + U(0, 1)` elementwise, `v₀ = 0`.
pub fn init_chain<R: Rng + ?Sized>(dim: usize, sigma: NoiseLevel, rng: &mut R) -> ChainState {
    let s = sigma.get();
    let y = (0..dim)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            let u: f64 = rng.random();
            s * e + u
        })
        .collect();
    ChainState {
        y,
        v: vec![0.0; dim],
        step: 0,
        chain: 0,
    }
}

/// One walk step with caller-provided standard normal noise `eps`.
/// Returns the score evaluated at the half-step position.
pub fn langevin_step_with_noise<F>(state: &mut ChainState, mut score: F, p: &SamplerParams, eps: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = state.y.len();
    check_shape(n, state.v.len())?;
    check_shape(n, eps.len())?;
    let half = 0.5 * p.delta;
    let kick = 0.5 * p.u * p.delta;
    let decay = (-p.gamma * p.delta).exp();
    let noise = (p.u * (1.0 - (-2.0 * p.gamma * p.delta).exp())).sqrt();

    for (y, v) in state.y.iter_mut().zip(&state.v) {
        *y += half * v;
    }
    let g = score(&state.y)?;
    check_shape(n, g.len())?;
    for ((v, g), e) in state.v.iter_mut().zip(&g).zip(eps) {
        let v1 = *v + kick * g;
        *v = decay * v1 + kick * g + noise * e;
    }
    for (y, v) in state.y.iter_mut().zip(&state.v) {
        *y += half * v;
    }
    state.step += 1;
    if state.y.iter().chain(&state.v).any(|x| !x.is_finite()) {
        return Err(Error::Divergence {
            chain: state.chain,
            step: state.step,
        });
    }
    Ok(g)
}

/// One walk step drawing its noise from `rng`.
pub fn langevin_step<F, R>(state: &mut ChainState, score: F, p: &SamplerParams, rng: &mut R) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    let eps: Vec<f64> = (0..state.y.len()).map(|_| StandardNormal.sample(rng)).collect();
    langevin_step_with_noise(state, score, p, &eps)
}

/// Clean estimate `x̂ = y + σ² g(y)`, evaluated as the denoiser output
/// itself to avoid the round trip through the score.
pub fn jump<D: Denoiser + ?Sized>(y: &[f64], den: &D) -> Result<Vec<f64>> {
    check_shape(den.dim(), y.len())?;
    den.apply(y)
}

/// Independent per-chain random stream derived from the master seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub chain: usize,
    /// Total walk steps the chain had taken, including warmups and restarts.
    pub step: u64,
    /// Mean `‖g‖` over the walk steps since the previous jump or (re)start.
    pub mean_score_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub chain: usize,
    pub step: u64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub jumps: Vec<JumpRecord>,
    /// Restarts after exhausting the post-warmup budget.
    pub restarts: usize,
    /// Steps at which the chain diverged (only under the reseed policy).
    pub divergences: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct WalkJumpOutput {
    pub samples: Vec<Sample>,
    pub diagnostics: Vec<ChainDiagnostics>,
}

impl WalkJumpOutput {
    /// One JSON object per jump, one per line, ordered by chain then step.
    pub fn write_jump_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for d in &self.diagnostics {
            for j in &d.jumps {
                serde_json::to_writer(&mut out, j)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Chain<'a, D: ?Sized> {
    den: &'a D,
    p: &'a SamplerParams,
    rng: ChaCha8Rng,
    state: ChainState,
    total_steps: u64,
    norm_sum: f64,
    norm_count: u64,
    diag: ChainDiagnostics,
}

impl<D: Denoiser + ?Sized> Chain<'_, D> {
    fn restart(&mut self) {
        let id = self.state.chain;
        self.state = init_chain(self.den.dim(), self.den.sigma(), &mut self.rng);
        self.state.chain = id;
        self.norm_sum = 0.0;
        self.norm_count = 0;
    }

    /// Runs `n` steps; `Ok(false)` means the chain diverged and was reseeded.
    fn walk(&mut self, n: u64) -> Result<bool> {
        for _ in 0..n {
            let den = self.den;
            let res = langevin_step(&mut self.state, |y| score_from_denoiser(den, y), self.p, &mut self.rng);
            self.total_steps += 1;
            match res {
                Ok(g) => {
                    self.norm_sum += norm(&g);
                    self.norm_count += 1;
                }
                Err(Error::Divergence { .. }) if self.p.on_divergence == DivergencePolicy::Reseed => {
                    self.diag.divergences.push(self.total_steps);
                    if self.diag.divergences.len() > MAX_RESEEDS {
                        return Err(Error::Divergence {
                            chain: self.state.chain,
                            step: self.total_steps,
                        });
                    }
                    self.restart();
                    return Ok(false);
                }
                Err(Error::Divergence { chain, .. }) => {
                    return Err(Error::Divergence {
                        chain,
                        step: self.total_steps,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Ok(true)
    }

    fn run(mut self, quota: usize) -> Result<(Vec<Sample>, ChainDiagnostics)> {
        let mut samples = Vec::with_capacity(quota);
        'life: while samples.len() < quota {
            if !self.walk(self.p.warmup_steps)? {
                continue 'life;
            }
            let mut after = 0;
            while samples.len() < quota {
                if after + self.p.steps_between_jumps > self.p.max_steps_after_warmup {
                    self.diag.restarts += 1;
                    self.restart();
                    continue 'life;
                }
                if !self.walk(self.p.steps_between_jumps)? {
                    continue 'life;
                }
                after += self.p.steps_between_jumps;
                let x = jump(&self.state.y, self.den)?;
                let mean = if self.norm_count > 0 {
                    self.norm_sum / self.norm_count as f64
                } else {
                    0.0
                };
                self.diag.jumps.push(JumpRecord {
                    chain: self.state.chain,
                    step: self.total_steps,
                    mean_score_norm: mean,
                });
                self.norm_sum = 0.0;
                self.norm_count = 0;
                samples.push(Sample {
                    chain: self.state.chain,
                    step: self.total_steps,
                    x,
                });
            }
        }
        Ok((samples, self.diag))
    }
}

/// Draws `n_samples` clean samples with independent parallel chains.
///
/// Chain `c` receives `n_samples / n_chains` samples plus one if
/// `c < n_samples % n_chains`. Every chain uses [`chain_rng`]`(seed, c)`, so
/// results are identical however the chains are scheduled.
pub fn walk_jump_sample<D: Denoiser + ?Sized>(den: &D, p: &SamplerParams, n_samples: usize, seed: u64) -> Result<WalkJumpOutput> {
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    p.validate()?;
    let n_chains = p.chains_for(n_samples);
    let per_chain = (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let quota = n_samples / n_chains + usize::from(c < n_samples % n_chains);
            let mut rng = chain_rng(seed, c);
            let mut state = init_chain(den.dim(), den.sigma(), &mut rng);
            state.chain = c;
            let chain = Chain {
                den,
                p,
                rng,
                state,
                total_steps: 0,
                norm_sum: 0.0,
                norm_count: 0,
                diag: ChainDiagnostics {
                    chain: c,
                    ..Default::default()
                },
            };
            chain.run(quota)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity(n_samples);
    let mut diagnostics = Vec::with_capacity(n_chains);
    for (s, d) in per_chain {
        samples.extend(s);
        diagnostics.push(d);
    }
    Ok(WalkJumpOutput { samples, diagnostics })
}
