mod common;

use common::*;
use num_complex::Complex;
use proptest::prelude::*;
use ssisar_core::denoiser::{
    complex_noise, denoise_forward, estimate_sigma, init_denoiser, recorrupt, DenoiserConfig, DenoiserParams,
};
use ssisar_core::rng::derive_seed;
use ssisar_core::ComplexTensor;

fn random_denoiser(seed: u64) -> DenoiserParams<f64> {
    let mut den = init_denoiser::<f64>(&DenoiserConfig { base: 4, residual: false }, seed).unwrap();
    for (i, t) in den.tensors.values_mut().enumerate() {
        let noise = random_real(t.shape(), derive_seed(seed, i as u64));
        *t = t.zip_map(&noise, |a, b| a + 0.3 * b).unwrap();
    }
    den
}

#[test]
fn recorruption_pair_noise_is_uncorrelated() {
    let sigma = 0.7;
    let (rows, cols) = (250, 400);
    let clean = random_complex(rows, cols, 1);
    let noisy = clean.add(&complex_noise(rows, cols, sigma, 2)).unwrap();
    let pair = recorrupt(&noisy, sigma, 3).unwrap();
    let n1 = pair.y1.sub(&clean).unwrap();
    let n2 = pair.y2.sub(&clean).unwrap();
    let count = (rows * cols) as f64;
    let var1 = n1.norm_sqr() / count;
    let var2 = n2.norm_sqr() / count;
    let cross: Complex<f64> = n1.iter().zip(n2.iter()).map(|(a, b)| a * b.conj()).sum::<Complex<f64>>() / count;
    let target = 2.0 * sigma * sigma;
    assert!((var1 / target - 1.0).abs() < 0.03, "var1 {var1}");
    assert!((var2 / target - 1.0).abs() < 0.03, "var2 {var2}");
    assert!(cross.norm() < 0.01 * target, "cross {cross}");

    let pearson = |a: Vec<f64>, b: Vec<f64>| {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    assert!(pearson(n1.re.data().to_vec(), n2.re.data().to_vec()).abs() < 0.01);
    assert!(pearson(n1.im.data().to_vec(), n2.im.data().to_vec()).abs() < 0.01);
}

#[test]
fn recorrupted_loss_equals_clean_loss_plus_constant() {
    let sigma = 0.4;
    let (rows, cols) = (8, 8);
    let clean = random_complex(rows, cols, 10);
    let den = random_denoiser(11);
    let trials = 10_000;
    let offset = 2.0 * sigma * sigma * (rows * cols) as f64;
    let diffs: Vec<f64> = (0..trials)
        .map(|t| {
            let noisy = clean.add(&complex_noise(rows, cols, sigma, derive_seed(20, t))).unwrap();
            let pair = recorrupt(&noisy, sigma, derive_seed(21, t)).unwrap();
            let f = denoise_forward(&pair.y1, &den).unwrap();
            f.sub(&pair.y2).unwrap().norm_sqr() - f.sub(&clean).unwrap().norm_sqr() - offset
        })
        .collect();
    let n = trials as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn pair_mean_restores_the_echo() {
    let y = random_complex(9, 11, 30);
    let pair = recorrupt(&y, 0.5, 31).unwrap();
    let mean = pair.y1.add(&pair.y2).unwrap().scale_real(0.5);
    assert!(max_abs_diff(&mean, &y) < 1e-12);
}

#[test]
fn estimator_recovers_noise_level() {
    for (sigma, seed) in [(0.05, 1), (0.3, 2), (1.5, 3)] {
        let noise: ComplexTensor<f64> = complex_noise(128, 128, sigma, seed);
        let est = estimate_sigma(&noise).unwrap();
        assert!((est / sigma - 1.0).abs() < 0.05, "sigma {sigma} est {est}");
        // Constant 2x2 blocks cancel in the diagonal detail band.
        let blocks = ComplexTensor::from_fn2(128, 128, |i, j| Complex::new(((i / 2) * 7 % 5) as f64, ((j / 2) % 3) as f64));
        let est = estimate_sigma(&blocks.add(&noise).unwrap()).unwrap();
        assert!((est / sigma - 1.0).abs() < 0.05, "blocks sigma {sigma} est {est}");
    }
    assert!(estimate_sigma(&random_complex(3, 8, 0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn denoiser_preserves_shape(h in 8usize..20, w in 8usize..20, seed in 0u64..100) {
        let den = random_denoiser(seed);
        let y = random_complex(h, w, seed);
        let out = denoise_forward(&y, &den).unwrap();
        prop_assert_eq!(out.shape(), &[h, w]);
        prop_assert!(out.is_finite());
    }
}
