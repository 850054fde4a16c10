use std::f64::consts::TAU;

use nhpp_shrink::posterior::{write_estimates_csv, ShapePosterior};
use nhpp_shrink::simulate::sample_nhpp;
use nhpp_shrink::{IntensityModel, KernelSpec, McmcConfig, PointPattern, PriorSpec, RngStream, Window};
use proptest::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn short_chain() -> McmcConfig {
    McmcConfig {
        burn_in: 50,
        samples: 50,
        thin: 1,
        ..McmcConfig::default()
    }
}

#[test]
fn simulate_then_estimate_on_the_circle() {
    let truth = IntensityModel::sine2();
    let pattern = sample_nhpp(&truth, 2.0, &mut RngStream::new(11, 0).rng()).unwrap();
    let kernel = KernelSpec::von_mises(5.0).unwrap();
    let flat = PriorSpec::improper_uniform(Window::Circle, 1.0, 0.0).unwrap();
    let shrunk = flat.with_gamma(flat.shrinkage_gamma()).unwrap();
    let shape =
        ShapePosterior::fit(&pattern, &flat, &kernel, &short_chain(), 256, &mut RngStream::new(11, 1).rng()).unwrap();
    let n = pattern.count() as f64;
    let a = shape.summary(&flat, 2.0).unwrap();
    let b = shape.summary(&shrunk, 2.0).unwrap();
    assert!((a.lambda_hat.integral() - (n + TAU) / 2.0).abs() < 1e-9);
    assert!((b.lambda_hat.integral() - (n + 1.0) / 2.0).abs() < 1e-9);

    let mut buf = Vec::new();
    write_estimates_csv(&[a, b], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 257);
}

#[test]
fn interval_window_with_gaussian_kernel() {
    // the Gaussian kernel is not renormalized on an interval, so the prior
    // shape integrates to (1/L)∫∫ k(y,u) du dy = 2Φ(L/σ) − 1 + 2σ(φ(L/σ) − φ(0))/L
    let (len, sigma) = (10.0, 0.8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z = len / sigma;
    let leaked = 2.0 * normal.cdf(z) - 1.0 + 2.0 * sigma * (normal.pdf(z) - normal.pdf(0.0)) / len;

    let window = Window::interval(0.0, len).unwrap();
    let kernel = KernelSpec::gaussian(sigma, window).unwrap();
    let prior = PriorSpec::improper_uniform(window, 0.3, 0.0).unwrap();
    let empty = PointPattern::empty(window);
    let prior_shape =
        ShapePosterior::fit(&empty, &prior, &kernel, &short_chain(), 400, &mut RngStream::new(5, 0).rng()).unwrap();
    let got = prior_shape.lambda_bar.integral();
    assert!((got - leaked).abs() < 1e-4, "{got} vs {leaked}");

    let pattern = PointPattern::new(window, vec![1.0, 1.5, 7.0, 7.2]).unwrap();
    let shape =
        ShapePosterior::fit(&pattern, &prior, &kernel, &short_chain(), 400, &mut RngStream::new(5, 0).rng()).unwrap();
    let total = shape.lambda_bar.integral();
    assert!(total > leaked - 0.05 && total < 1.0, "{total}");
    assert!(shape.lambda_bar.values().iter().all(|&v| v > 0.0));
}

#[test]
fn window_mismatch_is_rejected() {
    let window = Window::interval(0.0, 10.0).unwrap();
    let pattern = PointPattern::new(window, vec![1.0]).unwrap();
    let kernel = KernelSpec::von_mises(5.0).unwrap();
    let prior = PriorSpec::improper_uniform(Window::Circle, 1.0, 0.0).unwrap();
    let r = ShapePosterior::fit(&pattern, &prior, &kernel, &short_chain(), 64, &mut RngStream::new(1, 0).rng());
    assert!(r.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pattern_csv_round_trips(points in prop::collection::vec(0.0..TAU, 0..40)) {
        let pattern = PointPattern::new(Window::Circle, points).unwrap();
        let mut buf = Vec::new();
        pattern.write_csv(&mut buf).unwrap();
        let back = PointPattern::read_csv(Window::Circle, buf.as_slice()).unwrap();
        prop_assert_eq!(back, pattern.clone());
        let json = pattern.to_json().unwrap();
        prop_assert_eq!(PointPattern::from_json(&json).unwrap(), pattern);
    }

    #[test]
    fn estimates_share_one_shape(points in prop::collection::vec(0.0..TAU, 1..6), gamma in 0.0..5.0f64, seed in 0u64..1000) {
        let pattern = PointPattern::new(Window::Circle, points).unwrap();
        let kernel = KernelSpec::von_mises(3.0).unwrap();
        let flat = PriorSpec::improper_uniform(Window::Circle, 1.0, 0.0).unwrap();
        let other = flat.with_gamma(gamma).unwrap();
        let shape = ShapePosterior::fit(&pattern, &flat, &kernel, &short_chain(), 64, &mut RngStream::new(seed, 0).rng()).unwrap();
        let a = shape.summary(&flat, 1.0).unwrap();
        let b = shape.summary(&other, 1.0).unwrap();
        let ratio = b.weight_mean / a.weight_mean;
        for (x, y) in a.lambda_hat.values().iter().zip(b.lambda_hat.values()) {
            prop_assert!((y - ratio * x).abs() <= 1e-12 * x.abs().max(1.0));
        }
        prop_assert!(b.weight_mean <= a.weight_mean);
    }
}
