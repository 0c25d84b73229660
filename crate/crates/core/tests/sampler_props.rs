use molvox::denoise::{ConstantDenoiser, GmmComponent, GmmDenoiser, GmmModel, IdentityDenoiser, NoiseLevel};
use molvox::sampler::{
    chain_rng, init_chain, langevin_step_with_noise, walk_jump_sample, ChainState, DivergencePolicy, SamplerParams,
};
use molvox::Error;

fn gmm_den() -> GmmDenoiser {
    let m = GmmModel::new(vec![
        GmmComponent { weight: 0.4, mean: vec![-1.0, 0.0, 0.5], tau: 0.3 },
        GmmComponent { weight: 0.6, mean: vec![1.0, 0.5, 0.0], tau: 0.3 },
    ])
    .unwrap();
    GmmDenoiser::new(m, NoiseLevel::new(0.5).unwrap())
}

fn quick() -> SamplerParams {
    SamplerParams {
        warmup_steps: 50,
        steps_between_jumps: 10,
        max_steps_after_warmup: 100,
        ..SamplerParams::default()
    }
}

#[test]
fn one_step_matches_hand_computation() {
    // Gaussian target: score(y) = -y
    let p = SamplerParams::default();
    let (d, g, u) = (p.delta, p.gamma, p.u);
    let mut s = ChainState { y: vec![0.7], v: vec![-0.2], step: 0, chain: 0 };
    let eps = [0.3];
    langevin_step_with_noise(&mut s, |y| Ok(y.iter().map(|v| -v).collect()), &p, &eps).unwrap();

    let y_half = 0.7 + d / 2.0 * -0.2;
    let score = -y_half;
    let v1 = -0.2 + u * d / 2.0 * score;
    let v = (-g * d).exp() * v1 + u * d / 2.0 * score + (u * (1.0 - (-2.0 * g * d).exp())).sqrt() * 0.3;
    let y = y_half + d / 2.0 * v;
    assert!((s.v[0] - v).abs() < 1e-15);
    assert!((s.y[0] - y).abs() < 1e-15);
}

#[test]
fn chain_initialisation_statistics() {
    // y0 = N(0, σ²) + U(0, 1): mean 0.5, variance σ² + 1/12
    let sigma = NoiseLevel::new(0.9).unwrap();
    let mut rng = chain_rng(3, 0);
    let s = init_chain(200_000, sigma, &mut rng);
    let n = s.y.len() as f64;
    let mean = s.y.iter().sum::<f64>() / n;
    let var = s.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
    assert!((var - (0.81 + 1.0 / 12.0)).abs() < 0.015, "{var}");
}

#[test]
fn identical_seeds_identical_samples() {
    let den = gmm_den();
    let a = walk_jump_sample(&den, &quick(), 20, 11).unwrap();
    let b = walk_jump_sample(&den, &quick(), 20, 11).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.diagnostics, b.diagnostics);
    let c = walk_jump_sample(&den, &quick(), 20, 12).unwrap();
    assert_ne!(a.samples, c.samples);
}

#[test]
fn thread_count_does_not_change_results() {
    let den = gmm_den();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| walk_jump_sample(&den, &quick(), 24, 5).unwrap())
    };
    assert_eq!(run(1).samples, run(4).samples);
}

#[test]
fn quotas_and_jump_schedule() {
    let den = gmm_den();
    let p = SamplerParams { n_chains: Some(3), ..quick() };
    let out = walk_jump_sample(&den, &p, 10, 1).unwrap();
    assert_eq!(out.samples.len(), 10);
    let per_chain: Vec<usize> = (0..3).map(|c| out.samples.iter().filter(|s| s.chain == c).count()).collect();
    assert_eq!(per_chain, [4, 3, 3]);
    // budget 100 after warmup, Δk = 10: every chain fits its quota without restarting
    for d in &out.diagnostics {
        assert_eq!(d.restarts, 0);
        let steps: Vec<u64> = d.jumps.iter().map(|j| j.step).collect();
        let want: Vec<u64> = (1..=steps.len() as u64).map(|k| 50 + 10 * k).collect();
        assert_eq!(steps, want);
    }
    let mut log = Vec::new();
    out.write_jump_log(&mut log).unwrap();
    let text = String::from_utf8(log).unwrap();
    assert_eq!(text.lines().count(), 10);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["mean_score_norm"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn chains_restart_when_budget_runs_out() {
    let den = gmm_den();
    let p = SamplerParams {
        n_chains: Some(1),
        max_steps_after_warmup: 25,
        ..quick()
    };
    // two jumps fit in 25 steps at Δk = 10, so 5 samples need restarts
    let out = walk_jump_sample(&den, &p, 5, 2).unwrap();
    assert_eq!(out.samples.len(), 5);
    assert_eq!(out.diagnostics[0].restarts, 2);
}

#[test]
fn divergence_is_reported_or_reseeded() {
    // a denoiser returning huge values makes the score explode
    let den = ConstantDenoiser { value: vec![1e300; 4], sigma: NoiseLevel::new(1e-3).unwrap() };
    let err = walk_jump_sample(&den, &quick(), 2, 0).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err}");
    let reseed = SamplerParams { on_divergence: DivergencePolicy::Reseed, ..quick() };
    let err = walk_jump_sample(&den, &reseed, 1, 0).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }));
}

#[test]
fn identity_denoiser_samples_are_noisy_walks() {
    // zero score: y performs a damped random walk and jumps return it unchanged
    let den = IdentityDenoiser { dim: 3, sigma: NoiseLevel::new(0.5).unwrap() };
    let out = walk_jump_sample(&den, &quick(), 4, 9).unwrap();
    assert!(out.samples.iter().all(|s| s.x.iter().all(|v| v.is_finite())));
}

#[test]
fn invalid_parameters() {
    let den = gmm_den();
    for p in [
        SamplerParams { delta: 0.0, ..quick() },
        SamplerParams { gamma: -1.0, ..quick() },
        SamplerParams { u: f64::NAN, ..quick() },
        SamplerParams { steps_between_jumps: 0, ..quick() },
        SamplerParams { n_chains: Some(0), ..quick() },
    ] {
        assert!(walk_jump_sample(&den, &p, 2, 0).is_err(), "{p:?}");
    }
    assert!(walk_jump_sample(&den, &quick(), 0, 0).is_err());
}
