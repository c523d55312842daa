use std::f64::consts::PI;

use grinpol::fitkit::{fit_gaussian, fit_sinusoid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `reps` copies of the sample grid, each with fresh noise.
fn replicate(
    xs: &[f64],
    model: impl Fn(f64) -> f64,
    sigma: f64,
    reps: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..reps {
        for &xi in xs {
            x.push(xi);
            y.push(model(xi) + noise.sample(&mut rng));
        }
    }
    (x, y)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn sinusoid_uncertainties_shrink_as_root_n() {
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 728e-9 / 39.0).collect();
    let model = |x: f64| 1000.0 * (1.0 + 0.95 * (4.0 * PI * x / 728e-9 + 0.3).cos());
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let (x1, y1) = replicate(&xs, model, 10.0, 1, seed);
        let (x4, y4) = replicate(&xs, model, 10.0, 4, seed + 1000);
        let a = fit_sinusoid(&x1, &y1, None).unwrap().uncertainties;
        let b = fit_sinusoid(&x4, &y4, None).unwrap().uncertainties;
        ratios.push(a.visibility / b.visibility);
        ratios.push(a.period / b.period);
    }
    let r = mean(&ratios);
    assert!((r - 2.0).abs() <= 0.3 * 2.0, "ratio {r}");
}

#[test]
fn gaussian_uncertainties_shrink_as_root_n() {
    let xs: Vec<f64> = (0..41).map(|i| (i as f64 - 20.0) * 30e-6).collect();
    let model = |x: f64| 0.7 * (-x * x / (2.0 * 131e-6f64.powi(2))).exp();
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let (x1, y1) = replicate(&xs, model, 0.01, 1, seed);
        let (x4, y4) = replicate(&xs, model, 0.01, 4, seed + 1000);
        let a = fit_gaussian(&x1, &y1, None).unwrap().uncertainties;
        let b = fit_gaussian(&x4, &y4, None).unwrap().uncertainties;
        ratios.push(a.fwhm / b.fwhm);
        ratios.push(a.center / b.center);
    }
    let r = mean(&ratios);
    assert!((r - 2.0).abs() <= 0.3 * 2.0, "ratio {r}");
}

#[test]
fn noisy_fits_cover_the_truth() {
    // about 95% of 2-sigma intervals should contain the generating value
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 728e-9 / 39.0).collect();
    let model = |x: f64| 500.0 * (1.0 + 0.9 * (4.0 * PI * x / 728e-9).cos());
    let mut inside = 0;
    for seed in 0..100 {
        let (x, y) = replicate(&xs, model, 8.0, 1, seed);
        let fit = fit_sinusoid(&x, &y, None).unwrap();
        if (fit.visibility - 0.9).abs() <= 2.0 * fit.uncertainties.visibility {
            inside += 1;
        }
    }
    assert!((88..=100).contains(&inside), "{inside}/100");
}
