//! Bayesian predictive densities for a future window of exposure `t`.
//!
//! The predictive splits into a negative-binomial law for the future count
//! `M` and an exchangeable density for the future locations given `M`:
//!
//! ```text
//! p(M, y₁…y_M | 𝒙) = NB(M; r, p) · p_α(y₁…y_M | M, 𝒙)
//! r = |α| − γ + N,   p = t / (t + s + 1/β)
//! ```
//!
//! Only the count layer depends on `β`, `γ` and the exposures.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::kernels::KernelSpec;
use crate::pattern::PointPattern;
use crate::posterior::{batch_means_se, draw_lambda_bar, sample_index, ClusterState};
use crate::prior::PriorSpec;

/// Augmentation replicates per posterior draw.
pub const DEFAULT_REPLICATES: usize = 8;

/// `ln[Γ(M+r)/(M! Γ(r)) p^M (1−p)^r]`. Requires `r > 0`, `0 < p < 1`.
pub fn nb_log_pmf(r: f64, p: f64, m: u64) -> f64 {
    let m = m as f64;
    let coeff = if m == 0.0 {
        0.0
    } else {
        ln_gamma(m + r) - ln_gamma(m + 1.0) - ln_gamma(r)
    };
    coeff + m * p.ln() + r * (-p).ln_1p()
}

/// `ln[(μ^M / M!) e^{−μ}]`.
pub fn poisson_log_pmf(mean: f64, m: u64) -> f64 {
    let m = m as f64;
    if m == 0.0 {
        return -mean;
    }
    m * mean.ln() - ln_gamma(m + 1.0) - mean
}

/// Negative-binomial count layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountLayer {
    /// `|α| − γ + N`.
    pub r: f64,
    /// `t / (t + s + 1/β)`.
    pub p: f64,
}

impl CountLayer {
    pub fn new(r: f64, p: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::param("r", format!("must be positive, got {r}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param("p", format!("must lie in (0, 1), got {p}")));
        }
        Ok(CountLayer { r, p })
    }

    pub fn log_pmf(&self, m: u64) -> f64 {
        nb_log_pmf(self.r, self.p, m)
    }

    pub fn mean(&self) -> f64 {
        self.r * self.p / (1.0 - self.p)
    }

    /// Sums the pmf until a certified tail bound drops below `tail_tol`.
    ///
    /// Returns `(partial sum, tail bound, terms)`. Once the successive ratio
    /// `p(M + r)/(M + 1)` is below one, the remaining terms are dominated by a
    /// geometric series.
    pub fn mass_check(&self, tail_tol: f64) -> (f64, f64, u64) {
        let mut sum = 0.0;
        let mut m = 0u64;
        loop {
            let pmf = self.log_pmf(m).exp();
            sum += pmf;
            m += 1;
            let ratio = (self.p * (m as f64 + self.r) / (m as f64 + 1.0)).max(self.p);
            let next = self.log_pmf(m).exp();
            if ratio < 1.0 {
                let tail = next / (1.0 - ratio);
                if tail < tail_tol {
                    return (sum, tail, m);
                }
            }
        }
    }
}

/// `(r, p)` of the predictive count law.
pub fn predictive_count_params(prior: &PriorSpec, n: usize, s: f64, t: f64) -> Result<CountLayer> {
    for (name, v) in [("s", s), ("t", t)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, format!("exposure must be positive, got {v}")));
        }
    }
    CountLayer::new(prior.weight_shape() + n as f64, t / (t + prior.beta().posterior_rate(s)))
}

/// Estimate of `ln p_α(y₁…y_M | M, 𝒙)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLogDensity {
    pub log_density: f64,
    /// Delta-method standard error, from batch means over posterior draws.
    pub std_error: f64,
}

/// Sequential estimate of the point layer.
///
/// For every draw and replicate the future points are added one at a time:
/// each contributes its one-step CRP predictive density given the draw's
/// clusters and the points already placed, and is then seated at an existing
/// table or a new one drawn from its conditional. The weights are averaged in
/// log space.
pub fn predictive_point_logdensity<R: Rng + ?Sized>(
    draws: &[ClusterState],
    prior: &PriorSpec,
    kernel: &KernelSpec,
    ys: &[f64],
    replicates: usize,
    rng: &mut R,
) -> Result<PointLogDensity> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    if replicates == 0 {
        return Err(Error::param("replicates", "need at least one"));
    }
    let window = kernel.window();
    for &y in ys {
        window.check_point(y)?;
    }
    if ys.is_empty() {
        return Ok(PointLogDensity {
            log_density: 0.0,
            std_error: 0.0,
        });
    }
    let base = prior.base();
    let a = base.mass();
    let kb: Vec<f64> = ys.iter().map(|&y| base.kernel_integral(kernel, y)).collect();

    // a single point needs no augmentation
    if ys.len() == 1 {
        let vals: Vec<f64> = draws.iter().map(|d| draw_lambda_bar(d, base, kernel, ys[0])).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        return Ok(PointLogDensity {
            log_density: mean.ln(),
            std_error: batch_means_se(&vals, 20) / mean,
        });
    }

    let mut log_weights = Vec::with_capacity(draws.len() * replicates);
    let mut locs = Vec::new();
    let mut counts = Vec::new();
    let mut probs = Vec::new();
    for d in draws {
        for _ in 0..replicates {
            locs.clear();
            counts.clear();
            locs.extend(d.clusters.iter().map(|c| c.location));
            counts.extend(d.clusters.iter().map(|c| c.count as f64));
            let mut n = d.observations() as f64;
            let mut logw = 0.0;
            for (j, &y) in ys.iter().enumerate() {
                probs.clear();
                probs.extend(locs.iter().zip(&counts).map(|(&u, &c)| c * kernel.eval(y, u)));
                probs.push(a * kb[j]);
                let total: f64 = probs.iter().sum();
                logw += (total / (a + n)).ln();
                if j + 1 < ys.len() {
                    let pick = sample_index(&probs, rng);
                    if pick < locs.len() {
                        counts[pick] += 1.0;
                    } else {
                        locs.push(base.sample_given_point(kernel, y, rng));
                        counts.push(1.0);
                    }
                }
                n += 1.0;
            }
            log_weights.push(logw);
        }
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // per-draw means of exp(logw − max), for the standard error
    let per_draw: Vec<f64> = log_weights
        .chunks_exact(replicates)
        .map(|c| c.iter().map(|l| (l - max).exp()).sum::<f64>() / replicates as f64)
        .collect();
    let mean = per_draw.iter().sum::<f64>() / per_draw.len() as f64;
    Ok(PointLogDensity {
        log_density: max + mean.ln(),
        std_error: batch_means_se(&per_draw, 20) / mean,
    })
}

/// The full predictive `p(M, y | 𝒙)` for one prior.
#[derive(Debug, Clone, Copy)]
pub struct PredictiveDensity<'a> {
    pub count_layer: CountLayer,
    pub draws: &'a [ClusterState],
    pub prior: &'a PriorSpec,
    pub kernel: &'a KernelSpec,
    pub replicates: usize,
}

impl<'a> PredictiveDensity<'a> {
    /// `draws` must come from the posterior given `observed`.
    pub fn new(
        draws: &'a [ClusterState],
        prior: &'a PriorSpec,
        kernel: &'a KernelSpec,
        observed: &PointPattern,
        s: f64,
        t: f64,
    ) -> Result<Self> {
        let first = draws.first().ok_or(Error::EmptyDraws)?;
        if first.observations() != observed.count() {
            return Err(Error::param("draws", "draws do not belong to the observed pattern"));
        }
        Ok(PredictiveDensity {
            count_layer: predictive_count_params(prior, observed.count(), s, t)?,
            draws,
            prior,
            kernel,
            replicates: DEFAULT_REPLICATES,
        })
    }

    pub fn point_logdensity<R: Rng + ?Sized>(&self, ys: &[f64], rng: &mut R) -> Result<PointLogDensity> {
        predictive_point_logdensity(self.draws, self.prior, self.kernel, ys, self.replicates, rng)
    }

    /// `ln NB(M) + ln p_α(y | M, 𝒙)`.
    pub fn log_score<R: Rng + ?Sized>(&self, future: &PointPattern, rng: &mut R) -> Result<f64> {
        predictive_log_score(self, future, rng)
    }
}

/// `ln p(M, y₁…y_M | 𝒙)` of a future pattern.
pub fn predictive_log_score<R: Rng + ?Sized>(
    predictive: &PredictiveDensity<'_>,
    future: &PointPattern,
    rng: &mut R,
) -> Result<f64> {
    if future.window() != predictive.kernel.window() {
        return Err(Error::DomainMismatch("future pattern lives on another window".into()));
    }
    let count = predictive.count_layer.log_pmf(future.count() as u64);
    Ok(count + predictive.point_logdensity(future.points(), rng)?.log_density)
}

/// `ln p_λ(M, y)` under the true intensity over exposure `t`:
/// `ln Poisson(M; t w) + Σ ln λ̄(y_j)`.
pub fn true_log_density(model: &IntensityModel, future: &PointPattern, t: f64) -> Result<f64> {
    let mut total = poisson_log_pmf(t * model.total_mass(), future.count() as u64);
    for &y in future.points() {
        let v = model.normalized(y);
        if !(v > 0.0) {
            return Err(Error::NonPositiveIntensity { at: y, value: model.eval(y) });
        }
        total += v.ln();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{lambda_bar_at, run_mcmc, Cluster, McmcConfig};
    use crate::simulate::RngStream;
    use crate::window::Window;
    use proptest::prelude::*;
    use std::f64::consts::{LN_2, TAU};

    #[test]
    fn nb_special_cases() {
        assert!((nb_log_pmf(11.0, 0.5, 0) - 11.0 * 0.5f64.ln()).abs() < 1e-14);
        assert!((nb_log_pmf(1.0, 0.5, 3) + 4.0 * LN_2).abs() < 1e-13);
        // Γ(M+r)/(M!Γ(r)) against the product form ∏_{k<M} (r+k)/(k+1)
        let (r, p, m) = (2.5f64, 0.3f64, 6u64);
        let coeff: f64 = (0..m).map(|k| (r + k as f64) / (k as f64 + 1.0)).product();
        let direct = coeff * p.powi(m as i32) * (1.0 - p).powf(r);
        assert!((nb_log_pmf(r, p, m).exp() - direct).abs() < 1e-15);
    }

    #[test]
    fn nb_sums_to_one() {
        for (r, p) in [(11.0, 0.5), (TAU, 0.5), (1.0, 0.9), (0.3, 0.7)] {
            let layer = CountLayer::new(r, p).unwrap();
            let (sum, tail, _) = layer.mass_check(1e-12);
            assert!(tail < 1e-12);
            assert!((sum - 1.0).abs() < 1e-10, "({r},{p}): {sum}");
        }
    }

    #[test]
    fn count_params() {
        let prior = PriorSpec::improper_uniform(Window::Circle, 1.0, TAU - 1.0).unwrap();
        let c = predictive_count_params(&prior, 10, 1.0, 1.0).unwrap();
        assert!((c.r - 11.0).abs() < 1e-12 && c.p == 0.5);
        let c = predictive_count_params(&prior.with_gamma(0.0).unwrap(), 0, 2.0, 2.0).unwrap();
        assert!((c.r - TAU).abs() < 1e-15 && c.p == 0.5);
        let small = prior.with_beta(crate::Beta::finite(1e-9).unwrap()).unwrap();
        let c = predictive_count_params(&small, 10, 1.0, 1.0).unwrap();
        assert!(c.p < 1e-8);
        assert!(predictive_count_params(&prior, 10, 0.0, 1.0).is_err());
    }

    #[test]
    fn poisson_pmf() {
        assert!((poisson_log_pmf(2.0, 0) + 2.0).abs() < 1e-15);
        assert!((poisson_log_pmf(2.0, 3).exp() - 8.0 / 6.0 * (-2.0f64).exp()).abs() < 1e-15);
    }

    fn setup() -> (PriorSpec, KernelSpec, PointPattern) {
        let prior = PriorSpec::improper_uniform(Window::Circle, 1.0, 0.0).unwrap();
        let k = KernelSpec::von_mises(5.0).unwrap();
        let p = PointPattern::new(Window::Circle, vec![0.5, 0.8, 3.0]).unwrap();
        (prior, k, p)
    }

    #[test]
    fn single_point_is_lambda_bar() {
        let (prior, k, p) = setup();
        let config = McmcConfig { burn_in: 100, samples: 200, thin: 1, ..McmcConfig::default() };
        let draws = run_mcmc(&p, &prior, &k, &config, &mut RngStream::new(1, 0).rng()).unwrap().draws;
        for y in [0.6, 2.0, 5.0] {
            let est = predictive_point_logdensity(&draws, &prior, &k, &[y], 8, &mut RngStream::new(2, 0).rng()).unwrap();
            let lb = lambda_bar_at(&draws, &prior, &k, y).unwrap();
            assert!((est.log_density.exp() - lb).abs() < 1e-12 * lb);
        }
        let empty = predictive_point_logdensity(&draws, &prior, &k, &[], 8, &mut RngStream::new(2, 0).rng()).unwrap();
        assert_eq!(empty.log_density, 0.0);
    }

    #[test]
    fn two_points_without_data_match_crp_formula() {
        // no observations, uniform base: p(y₁, y₂) = (1/2π) (∫k(y₁,u)k(y₂,u)du + A/2π) / (A+1)
        let (prior, k, _) = setup();
        let (y1, y2) = (1.0, 1.3);
        let a = TAU;
        let q = crate::quadrature::Trapezoid::default();
        let conv = q.integrate(&Window::Circle, |u| k.eval(y1, u) * k.eval(y2, u));
        let exact = (conv + a / TAU) / (a + 1.0) / TAU;
        let draws = vec![ClusterState::empty()];
        let est = predictive_point_logdensity(&draws, &prior, &k, &[y1, y2], 40_000, &mut RngStream::new(5, 0).rng())
            .unwrap();
        let rel = (est.log_density.exp() - exact).abs() / exact;
        assert!(rel < 0.01, "{} vs {exact}", est.log_density.exp());
    }

    #[test]
    fn log_score_composes_layers() {
        let (prior, k, p) = setup();
        let draws = vec![ClusterState {
            assignments: vec![0, 0, 1],
            clusters: vec![Cluster { location: 0.6, count: 2 }, Cluster { location: 3.0, count: 1 }],
        }];
        let pred = PredictiveDensity::new(&draws, &prior, &k, &p, 1.0, 1.0).unwrap();
        let empty = PointPattern::empty(Window::Circle);
        let s = pred.log_score(&empty, &mut RngStream::new(1, 0).rng()).unwrap();
        assert!((s - pred.count_layer.r * 0.5f64.ln()).abs() < 1e-12);
        let one = PointPattern::new(Window::Circle, vec![0.7]).unwrap();
        let s = pred.log_score(&one, &mut RngStream::new(1, 0).rng()).unwrap();
        let manual = pred.count_layer.log_pmf(1)
            + pred.point_logdensity(&[0.7], &mut RngStream::new(1, 0).rng()).unwrap().log_density;
        assert_eq!(s, manual);
    }

    #[test]
    fn true_density_of_constant_intensity() {
        let m = IntensityModel::constant(Window::Circle, 2.0).unwrap();
        let f = PointPattern::new(Window::Circle, vec![1.0, 2.0]).unwrap();
        let w = 4.0 * std::f64::consts::PI;
        let expected = poisson_log_pmf(w, 2) + 2.0 * (1.0 / TAU).ln();
        assert!((true_log_density(&m, &f, 1.0).unwrap() - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn count_layer_depends_only_on_r_and_p(gamma in -3.0..6.0f64, n in 0usize..30, s in 0.1..5.0f64, t in 0.1..5.0f64) {
            let prior = PriorSpec::improper_uniform(Window::Circle, 1.0, gamma).unwrap();
            let c = predictive_count_params(&prior, n, s, t).unwrap();
            prop_assert!(c.r > 0.0 && c.p > 0.0 && c.p < 1.0);
            // shifting γ by δ and N by δ leaves the law unchanged
            let shifted = prior.with_gamma(gamma - 1.0).unwrap();
            if n > 0 {
                let d = predictive_count_params(&shifted, n - 1, s, t).unwrap();
                prop_assert!((d.r - c.r).abs() < 1e-12);
                prop_assert_eq!(d.p, c.p);
            }
        }
    }
}
