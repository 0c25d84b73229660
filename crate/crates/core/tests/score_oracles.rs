//! The GMM denoiser against oracles that share no code with it.

use molvox::denoise::{
    gmm_oracle_denoise, score_from_denoiser, Denoiser, GmmComponent, GmmDenoiser, GmmModel, NoiseLevel,
};
use molvox::sampler::jump;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixture_1d() -> GmmModel {
    GmmModel::new(vec![
        GmmComponent { weight: 0.2, mean: vec![-2.0], tau: 0.3 },
        GmmComponent { weight: 0.5, mean: vec![0.5], tau: 0.7 },
        GmmComponent { weight: 0.3, mean: vec![3.0], tau: 0.5 },
    ])
    .unwrap()
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// `E[X | Y = y]` by trapezoidal quadrature over the clean density.
fn quadrature_posterior_mean(m: &GmmModel, y: f64, sigma: f64) -> f64 {
    let prior = |x: f64| {
        m.components()
            .iter()
            .map(|c| c.weight * normal_pdf(x, c.mean[0], c.tau * c.tau))
            .sum::<f64>()
    };
    let (lo, hi, n) = (-12.0, 12.0, 200_000);
    let h = (hi - lo) / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let joint = prior(x) * normal_pdf(y, x, sigma * sigma);
        num += w * x * joint;
        den += w * joint;
    }
    num / den
}

#[test]
fn posterior_mean_matches_quadrature() {
    let m = mixture_1d();
    for &sigma in &[0.3, 0.9, 1.5] {
        let s = NoiseLevel::new(sigma).unwrap();
        for i in 0..41 {
            let y = -6.0 + 0.3 * i as f64;
            let got = gmm_oracle_denoise(&m, &[y], s).unwrap()[0];
            let want = quadrature_posterior_mean(&m, y, sigma);
            assert!((got - want).abs() < 1e-7, "σ={sigma} y={y}: {got} vs {want}");
        }
    }
}

#[test]
fn smoothed_density_matches_quadrature() {
    let m = mixture_1d();
    let sigma = 0.8;
    for &y in &[-3.0, 0.0, 1.7, 4.2] {
        let prior = |x: f64| {
            m.components()
                .iter()
                .map(|c| c.weight * normal_pdf(x, c.mean[0], c.tau * c.tau))
                .sum::<f64>()
        };
        let (lo, n) = (-12.0, 100_000);
        let h = 24.0 / n as f64;
        let p: f64 = (0..=n)
            .map(|i| {
                let x = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * prior(x) * normal_pdf(y, x, sigma * sigma) * h
            })
            .sum();
        let got = m.log_density(&[y], NoiseLevel::new(sigma).unwrap()).unwrap();
        assert!((got - p.ln()).abs() < 1e-8, "{got} vs {}", p.ln());
    }
}

#[test]
fn score_field_is_conservative() {
    // the Jacobian of a gradient field is symmetric
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = GmmModel::new(
        (0..3)
            .map(|k| GmmComponent {
                weight: [0.2, 0.3, 0.5][k],
                mean: (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
                tau: rng.random_range(0.2..0.8),
            })
            .collect(),
    )
    .unwrap();
    let den = GmmDenoiser::new(m, NoiseLevel::new(0.7).unwrap());
    let h = 1e-5;
    for _ in 0..50 {
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut a = y.clone();
            let mut b = y.clone();
            a[j] += h;
            b[j] -= h;
            let ga = score_from_denoiser(&den, &a).unwrap();
            let gb = score_from_denoiser(&den, &b).unwrap();
            for i in 0..3 {
                jac[i][j] = (ga[i] - gb[i]) / (2.0 * h);
            }
        }
        for i in 0..3 {
            for j in 0..i {
                let scale = jac[i][j].abs().max(jac[j][i].abs()).max(1.0);
                assert!((jac[i][j] - jac[j][i]).abs() / scale < 1e-5, "{jac:?}");
            }
        }
    }
}

#[test]
fn jump_equals_score_step_to_rounding() {
    let m = mixture_1d();
    let sigma = NoiseLevel::new(0.9).unwrap();
    let den = GmmDenoiser::new(m, sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let y = [rng.random_range(-8.0..8.0)];
        let x = jump(&y, &den).unwrap()[0];
        let via_score = y[0] + sigma.variance() * score_from_denoiser(&den, &y).unwrap()[0];
        let ulps = 8.0 * f64::EPSILON * y[0].abs().max(x.abs()).max(1.0);
        assert!((x - via_score).abs() <= ulps, "{x} vs {via_score}");
        assert_eq!(x, den.apply(&y).unwrap()[0]);
    }
}

#[test]
fn single_gaussian_is_linear_shrinkage() {
    let tau = 0.6;
    let sigma = 0.8;
    let m = GmmModel::new(vec![GmmComponent { weight: 1.0, mean: vec![1.0, -1.0], tau }]).unwrap();
    let y = [2.5, 0.3];
    let got = gmm_oracle_denoise(&m, &y, NoiseLevel::new(sigma).unwrap()).unwrap();
    let k = tau * tau / (tau * tau + sigma * sigma);
    let want = [1.0 + k * (2.5 - 1.0), -1.0 + k * (0.3 + 1.0)];
    for i in 0..2 {
        assert!((got[i] - want[i]).abs() < 1e-14);
    }
}

#[test]
fn point_mass_components() {
    // τ = 0 everywhere: the posterior mean is a convex combination of means
    let m = GmmModel::new(vec![
        GmmComponent { weight: 0.5, mean: vec![-1.0], tau: 0.0 },
        GmmComponent { weight: 0.5, mean: vec![1.0], tau: 0.0 },
    ])
    .unwrap();
    let s = NoiseLevel::new(0.5).unwrap();
    let x = gmm_oracle_denoise(&m, &[0.4], s).unwrap()[0];
    assert!((x - (0.4f64 / 0.25).tanh()).abs() < 1e-12);
    // far out in the tail the log-sum-exp path stays finite
    let far = gmm_oracle_denoise(&m, &[1e3], s).unwrap()[0];
    assert!((far - 1.0).abs() < 1e-12);
}
