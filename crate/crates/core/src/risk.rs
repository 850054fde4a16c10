//! Kullback–Leibler loss and risk.
//!
//! The KL divergence between the Poisson process laws with intensities `λ`
//! and `λ'` over exposure `t` is
//!
//! ```text
//! D = t ∫ (λ' − λ + λ ln λ/λ')
//!   = t w (w'/w − 1 − ln w'/w) + t w ∫ λ̄ ln λ̄/λ̄'
//! ```
//!
//! The first term only involves the total masses. Within the prior family the
//! shape estimate is shared, so risk differences between members reduce to
//! expectations of the weight term over `N ~ Poisson(τw)`, which are computed
//! here by certified series.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::kernels::KernelSpec;
use crate::pattern::PointPattern;
use crate::posterior::{posterior_weight_mean, McmcConfig, ShapePosterior, LAMBDA_GRID_CELLS};
use crate::predict::{predictive_count_params, predictive_point_logdensity, true_log_density, DEFAULT_REPLICATES};
use crate::prior::PriorSpec;
use crate::quadrature::{gauss_legendre_on, Trapezoid};
use crate::simulate::{NhppSampler, RngStream};

/// Poisson series are cut where the Chernoff tail bound drops below this.
pub const SERIES_TAIL: f64 = 1e-12;

/// Finite-difference step for the Poisson derivative check.
pub const LEMMA1_STEP: f64 = 1e-4;

/// Smallest `n > μ` with `P(N ≥ n) ≤ e^{−μ}(eμ/n)^n < tol`.
pub fn poisson_truncation(mean: f64, tol: f64) -> u64 {
    if mean <= 0.0 {
        return 1;
    }
    let mut n = mean.floor() as u64 + 1;
    loop {
        let nf = n as f64;
        let log_bound = -mean + nf * (1.0 + mean.ln() - nf.ln());
        if log_bound < tol.ln() {
            return n;
        }
        n += 1;
    }
}

/// `Σ_{n<n_max} h(n) P(N = n)` for `N ~ Poisson(mean)`.
pub fn poisson_expectation_to<H: Fn(u64) -> f64>(mean: f64, n_max: u64, h: H) -> f64 {
    if mean <= 0.0 {
        return h(0);
    }
    let ln_mean = mean.ln();
    let mut log_p = -mean;
    let mut acc = 0.0;
    for n in 0..n_max {
        if n > 0 {
            log_p += ln_mean - (n as f64).ln();
        }
        acc += h(n) * log_p.exp();
    }
    acc
}

/// `E[h(N)]`, `N ~ Poisson(mean)`, truncated at [`SERIES_TAIL`].
pub fn poisson_expectation<H: Fn(u64) -> f64>(mean: f64, h: H) -> f64 {
    poisson_expectation_to(mean, poisson_truncation(mean, SERIES_TAIL), h)
}

/// `t ∫ (λ' − λ + λ ln λ/λ')` by the default trapezoid rule.
///
/// Fails if the estimate is not strictly positive at some node.
pub fn kl_intensity(truth: &IntensityModel, estimate: &IntensityModel, t: f64) -> Result<f64> {
    check_pair(truth, estimate, t)?;
    let q = Trapezoid::default();
    let window = truth.window();
    let mut values = Vec::with_capacity(q.cells + 1);
    for u in window.grid(q.cells) {
        let l = truth.eval(u);
        let e = estimate.eval(u);
        if !(e > 0.0) {
            return Err(Error::NonPositiveIntensity { at: u, value: e });
        }
        if l < 0.0 {
            return Err(Error::NonPositiveIntensity { at: u, value: l });
        }
        let log_term = if l == 0.0 { 0.0 } else { l * (l / e).ln() };
        values.push(e - l + log_term);
    }
    Ok(t * q.integrate_values(&window, &values))
}

/// `(t w (w'/w − 1 − ln w'/w), t w ∫ λ̄ ln λ̄/λ̄')`.
pub fn kl_decomposed(truth: &IntensityModel, estimate: &IntensityModel, t: f64) -> Result<(f64, f64)> {
    check_pair(truth, estimate, t)?;
    let w = truth.total_mass();
    let we = estimate.total_mass();
    let q = Trapezoid::default();
    let window = truth.window();
    let mut values = Vec::with_capacity(q.cells + 1);
    for u in window.grid(q.cells) {
        let l = truth.normalized(u);
        let e = estimate.normalized(u);
        if !(e > 0.0) {
            return Err(Error::NonPositiveIntensity { at: u, value: estimate.eval(u) });
        }
        values.push(if l <= 0.0 { 0.0 } else { l * (l / e).ln() });
    }
    Ok((t * weight_loss(w, we), t * w * q.integrate_values(&window, &values)))
}

fn check_pair(truth: &IntensityModel, estimate: &IntensityModel, t: f64) -> Result<()> {
    if truth.window() != estimate.window() {
        return Err(Error::DomainMismatch("intensities live on different windows".into()));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", format!("exposure must be positive, got {t}")));
    }
    Ok(())
}

/// `w' − w − w ln(w'/w)`, the weight part of the loss per unit exposure.
pub fn weight_loss(w: f64, w_est: f64) -> f64 {
    w_est - w - w * (w_est / w).ln()
}

/// Exact estimation-risk difference `R(γ) − R(γ̃)` at exposure `τ`, `t = 1`.
///
/// With `a = |α| − γ`, `ã = |α| − γ̃` and `N ~ Poisson(τw)`:
/// `(a − ã)/τ − w E[ln(N + a) − ln(N + ã)]`.
pub fn weight_risk_difference_exact(abs_alpha: f64, gamma: f64, gamma_tilde: f64, w: f64, tau: f64) -> Result<f64> {
    let a = abs_alpha - gamma;
    let at = abs_alpha - gamma_tilde;
    if !(a > 0.0 && at > 0.0) {
        return Err(Error::param("gamma", format!("need gamma, gamma_tilde < |alpha| = {abs_alpha}")));
    }
    if !(w > 0.0 && tau > 0.0) {
        return Err(Error::param("w", format!("need w > 0 and tau > 0, got w = {w}, tau = {tau}")));
    }
    let log_gap = poisson_expectation(tau * w, |n| {
        let n = n as f64;
        (n + a).ln() - (n + at).ln()
    });
    Ok((a - at) / tau - w * log_gap)
}

/// `(θ E[ln(X+1+c) − ln(X+1)], c(1 − e^{−θ}))` for `X ~ Poisson(θ)`.
pub fn lemma3_check(theta: f64, c: f64) -> Result<(f64, f64)> {
    if !(theta >= 0.0 && theta.is_finite()) || !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("theta", format!("need theta >= 0 and c > 0, got ({theta}, {c})")));
    }
    let lhs = theta
        * poisson_expectation(theta, |n| {
            let n = n as f64;
            (c / (n + 1.0)).ln_1p()
        });
    Ok((lhs, -c * (-theta).exp_m1()))
}

/// The default `20 × 10` grid of `(θ, c)`, log-spaced over `[0.01, 50] × [0.1, 10]`.
pub fn lemma3_grid() -> Vec<(f64, f64)> {
    let thetas = log_grid(0.01, 50.0, 20);
    let cs = log_grid(0.1, 10.0, 10);
    thetas
        .iter()
        .flat_map(|&th| cs.iter().map(move |&c| (th, c)))
        .collect()
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Central difference of `τ ↦ E[h(N_τ)]` and `w E[h(N_τ + 1) − h(N_τ)]`,
/// `N_τ ~ Poisson(τw)`.
pub fn lemma1_check<H: Fn(u64) -> f64>(w: f64, tau: f64, h: H) -> Result<(f64, f64)> {
    if !(w > 0.0 && tau > LEMMA1_STEP) {
        return Err(Error::param("tau", format!("need w > 0 and tau > {LEMMA1_STEP}")));
    }
    let d = LEMMA1_STEP;
    // one truncation point for all three series keeps the difference clean
    let n_max = poisson_truncation((tau + d) * w, SERIES_TAIL * 1e-4) + 1;
    let up = poisson_expectation_to((tau + d) * w, n_max, &h);
    let down = poisson_expectation_to((tau - d) * w, n_max, &h);
    let numeric = (up - down) / (2.0 * d);
    let identity = w * poisson_expectation_to(tau * w, n_max, |n| h(n + 1) - h(n));
    Ok((numeric, identity))
}

/// One row of a risk report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEntry {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
}

impl RiskEntry {
    fn from_samples(label: String, samples: &[f64]) -> Self {
        let (estimate, std_error) = mean_se(samples);
        RiskEntry {
            label,
            estimate,
            std_error,
            replications: samples.len(),
            exact: None,
        }
    }

    fn exact(label: String, value: f64) -> Self {
        RiskEntry {
            label,
            estimate: value,
            std_error: 0.0,
            replications: 1,
            exact: Some(value),
        }
    }
}

/// Sample mean and its standard error.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A table of risk values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub entries: Vec<RiskEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Per-replication losses of the first entry, when kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl RiskReport {
    pub fn entry(&self, label: &str) -> Option<&RiskEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["label", "estimate", "std_error", "replications", "exact"])?;
        for e in &self.entries {
            wtr.write_record([
                e.label.clone(),
                e.estimate.to_string(),
                e.std_error.to_string(),
                e.replications.to_string(),
                e.exact.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Tabulates `R(γ) − R(γ̃)` over a grid of true weights.
///
/// Each pair must satisfy `|α| − γ > 1` and `γ̃ = |α| − 1`; violations are
/// recorded as notes and the pair is skipped.
pub fn domination_study(abs_alpha: f64, gamma_pairs: &[(f64, f64)], w_grid: &[f64], tau: f64) -> Result<RiskReport> {
    let mut report = RiskReport::default();
    if abs_alpha <= 1.0 {
        report
            .notes
            .push(format!("|alpha| = {abs_alpha} <= 1: the shrinkage exponent |alpha| - 1 offers no dominating member"));
        return Ok(report);
    }
    for &(gamma, gamma_tilde) in gamma_pairs {
        if abs_alpha - gamma <= 1.0 {
            report
                .notes
                .push(format!("skipped gamma = {gamma}: needs |alpha| - gamma > 1"));
            continue;
        }
        if (gamma_tilde - (abs_alpha - 1.0)).abs() > 1e-12 * abs_alpha {
            report
                .notes
                .push(format!("skipped gamma_tilde = {gamma_tilde}: expected |alpha| - 1 = {}", abs_alpha - 1.0));
            continue;
        }
        for &w in w_grid {
            let v = weight_risk_difference_exact(abs_alpha, gamma, gamma_tilde, w, tau)?;
            report
                .entries
                .push(RiskEntry::exact(format!("gamma={gamma};gamma_tilde={gamma_tilde};w={w}"), v));
        }
    }
    Ok(report)
}

/// Everything a Monte Carlo risk study needs besides the priors.
#[derive(Debug, Clone)]
pub struct StudySetup<'a> {
    pub truth: &'a IntensityModel,
    pub kernel: &'a KernelSpec,
    pub config: McmcConfig,
    pub replications: usize,
    pub stream: RngStream,
}

impl StudySetup<'_> {
    fn check(&self, priors: &[PriorSpec]) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::param("replications", "need at least one"));
        }
        if priors.is_empty() {
            return Err(Error::param("priors", "need at least one prior"));
        }
        let base = priors[0].base();
        for p in priors {
            if p.base().window() != self.kernel.window() || p.abs_alpha() != base.mass() {
                return Err(Error::param("priors", "a paired study needs one base measure"));
            }
        }
        if self.truth.window() != self.kernel.window() {
            return Err(Error::DomainMismatch("truth and kernel live on different windows".into()));
        }
        self.config.validate()
    }
}

/// Per-replication estimation losses for several members of one prior family.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedLosses {
    /// Shared shape term `w ∫ λ̄ ln λ̄/λ̄'`, per replication.
    pub shape: Vec<f64>,
    /// Weight term per prior, per replication.
    pub weight: Vec<Vec<f64>>,
}

impl PairedLosses {
    pub fn total(&self, prior: usize) -> Vec<f64> {
        self.weight[prior].iter().zip(&self.shape).map(|(w, s)| w + s).collect()
    }

    /// `loss(i) − loss(j)`; the shared shape term cancels identically.
    pub fn difference(&self, i: usize, j: usize) -> Vec<f64> {
        self.weight[i].iter().zip(&self.weight[j]).map(|(a, b)| a - b).collect()
    }
}

/// Estimation KL losses (per unit prediction exposure) at observation exposure
/// `s`, with every prior seeing the same pattern and the same MCMC draws.
pub fn paired_estimation_losses(setup: &StudySetup<'_>, priors: &[PriorSpec], s: f64) -> Result<PairedLosses> {
    setup.check(priors)?;
    let sampler = NhppSampler::new(setup.truth);
    let w = setup.truth.total_mass();
    let rows: Vec<(f64, Vec<f64>)> = (0..setup.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = setup.stream.stream(rep).rng();
            let pattern = sampler.sample(s, &mut rng)?;
            let fit = ShapePosterior::fit(&pattern, &priors[0], setup.kernel, &setup.config, LAMBDA_GRID_CELLS, &mut rng)?;
            let shape = shape_loss(setup.truth, &fit)?;
            let weights = priors
                .iter()
                .map(|p| weight_loss(w, posterior_weight_mean(p, pattern.count(), s)))
                .collect();
            Ok((shape, weights))
        })
        .collect::<Result<_>>()?;
    let mut out = PairedLosses {
        shape: Vec::with_capacity(rows.len()),
        weight: vec![Vec::with_capacity(rows.len()); priors.len()],
    };
    for (shape, weights) in rows {
        out.shape.push(shape);
        for (k, v) in weights.into_iter().enumerate() {
            out.weight[k].push(v);
        }
    }
    Ok(out)
}

// w ∫ λ̄ ln λ̄/λ̄' on the estimate's own grid
fn shape_loss(truth: &IntensityModel, fit: &ShapePosterior) -> Result<f64> {
    let grid = &fit.lambda_bar;
    let window = grid.window();
    let mut values = Vec::with_capacity(grid.values().len());
    for (u, &e) in grid.nodes().into_iter().zip(grid.values()) {
        if !(e > 0.0) {
            return Err(Error::NonPositiveIntensity { at: u, value: e });
        }
        let l = truth.normalized(u);
        values.push(if l <= 0.0 { 0.0 } else { l * (l / e).ln() });
    }
    Ok(truth.total_mass() * Trapezoid::new(grid.cells()).integrate_values(&window, &values))
}

/// Monte Carlo estimation risk of one prior.
pub fn estimation_risk_mc(setup: &StudySetup<'_>, prior: &PriorSpec, s: f64) -> Result<RiskEntry> {
    let losses = paired_estimation_losses(setup, std::slice::from_ref(prior), s)?;
    Ok(RiskEntry::from_samples(format!("estimation;gamma={}", prior.gamma()), &losses.total(0)))
}

/// Estimation risks of several priors plus each paired difference against
/// the first, with the exact series value attached to the differences.
pub fn paired_estimation_risk(setup: &StudySetup<'_>, priors: &[PriorSpec], s: f64) -> Result<RiskReport> {
    let losses = paired_estimation_losses(setup, priors, s)?;
    let mut report = RiskReport {
        tau_grid: vec![s],
        trace: Some(losses.total(0)),
        ..RiskReport::default()
    };
    for (k, p) in priors.iter().enumerate() {
        report
            .entries
            .push(RiskEntry::from_samples(format!("estimation;gamma={}", p.gamma()), &losses.total(k)));
    }
    let w = setup.truth.total_mass();
    for (k, p) in priors.iter().enumerate().skip(1) {
        let mut e = RiskEntry::from_samples(
            format!("difference;gamma={};gamma={}", priors[0].gamma(), p.gamma()),
            &losses.difference(0, k),
        );
        e.exact = Some(weight_risk_difference_exact(p.abs_alpha(), priors[0].gamma(), p.gamma(), w, s)?);
        report.entries.push(e);
    }
    Ok(report)
}

/// Per-replication predictive log-ratio losses `ln p_λ(𝒚) − ln p_π(𝒚 | 𝒙)`.
pub fn predictive_losses(setup: &StudySetup<'_>, priors: &[PriorSpec], s: f64, t: f64) -> Result<Vec<Vec<f64>>> {
    setup.check(priors)?;
    let sampler = NhppSampler::new(setup.truth);
    let rows: Vec<Vec<f64>> = (0..setup.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = setup.stream.stream(rep).rng();
            let x = sampler.sample(s, &mut rng)?;
            let y = sampler.sample(t, &mut rng)?;
            predictive_loss_once(setup, priors, &x, &y, s, t, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok((0..priors.len()).map(|k| rows.iter().map(|r| r[k]).collect()).collect())
}

fn predictive_loss_once(
    setup: &StudySetup<'_>,
    priors: &[PriorSpec],
    x: &PointPattern,
    y: &PointPattern,
    s: f64,
    t: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<f64>> {
    let truth = true_log_density(setup.truth, y, t)?;
    let fit = if y.is_empty() {
        None
    } else {
        Some(ShapePosterior::fit(x, &priors[0], setup.kernel, &setup.config, 8, rng)?)
    };
    // the point layer is shared by every prior
    let point = match &fit {
        None => 0.0,
        Some(f) => {
            predictive_point_logdensity(&f.draws, &priors[0], setup.kernel, y.points(), DEFAULT_REPLICATES, rng)?
                .log_density
        }
    };
    priors
        .iter()
        .map(|p| {
            let count = predictive_count_params(p, x.count(), s, t)?.log_pmf(y.count() as u64);
            Ok(truth - count - point)
        })
        .collect()
}

/// Monte Carlo predictive risk of one prior.
pub fn predictive_risk_mc(setup: &StudySetup<'_>, prior: &PriorSpec, s: f64, t: f64) -> Result<RiskEntry> {
    let losses = predictive_losses(setup, std::slice::from_ref(prior), s, t)?;
    Ok(RiskEntry::from_samples(format!("predictive;gamma={}", prior.gamma()), &losses[0]))
}

/// Gauss–Legendre nodes used for the τ-integral.
pub const THEOREM3_NODES: usize = 8;

/// Predictive risk against the τ-integral of estimation risks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Check {
    pub predictive: RiskEntry,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub node_risks: Vec<RiskEntry>,
    pub integral: f64,
    pub integral_se: f64,
    pub discrepancy: f64,
    /// `3 (SE_pred + SE_quad)`.
    pub tolerance: f64,
}

impl Theorem3Check {
    pub fn passes(&self) -> bool {
        self.discrepancy.abs() <= self.tolerance
    }

    pub fn report(&self) -> RiskReport {
        let mut entries = vec![self.predictive.clone()];
        entries.extend(self.node_risks.iter().cloned());
        entries.push(RiskEntry {
            label: "integral".into(),
            estimate: self.integral,
            std_error: self.integral_se,
            replications: self.predictive.replications,
            exact: None,
        });
        RiskReport {
            entries,
            tau_grid: self.nodes.clone(),
            notes: vec![format!(
                "discrepancy {:.6} against tolerance {:.6}",
                self.discrepancy, self.tolerance
            )],
            trace: None,
        }
    }
}

/// Checks that the predictive risk over `[s, s+t]` equals the integral over
/// `τ ∈ [s, s+t]` of the estimation risk at exposure `τ`.
///
/// Every node and the predictive arm use their own independent stream family.
pub fn theorem3_check(setup: &StudySetup<'_>, prior: &PriorSpec, s: f64, t: f64) -> Result<Theorem3Check> {
    let (nodes, weights) = gauss_legendre_on(THEOREM3_NODES, s, s + t);
    let mut node_risks = Vec::with_capacity(nodes.len());
    for (i, &tau) in nodes.iter().enumerate() {
        let arm = StudySetup {
            stream: setup.stream.derive(i as u64 + 1),
            ..setup.clone()
        };
        let mut e = estimation_risk_mc(&arm, prior, tau)?;
        e.label = format!("estimation;tau={tau}");
        node_risks.push(e);
    }
    let pred_arm = StudySetup {
        stream: setup.stream.derive(0),
        ..setup.clone()
    };
    let predictive = predictive_risk_mc(&pred_arm, prior, s, t)?;
    let integral = nodes.iter().zip(&weights).zip(&node_risks).map(|((_, w), e)| w * e.estimate).sum::<f64>();
    let integral_se = weights
        .iter()
        .zip(&node_risks)
        .map(|(w, e)| (w * e.std_error).powi(2))
        .sum::<f64>()
        .sqrt();
    let discrepancy = predictive.estimate - integral;
    Ok(Theorem3Check {
        tolerance: 3.0 * (predictive.std_error + integral_se),
        predictive,
        nodes,
        weights,
        node_risks,
        integral,
        integral_se,
        discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Atom;
    use crate::window::Window;
    use proptest::prelude::*;
    use std::f64::consts::{E, PI, TAU};

    #[test]
    fn truncation_is_certified() {
        for mean in [0.01, 1.0, 12.566, 200.0] {
            let n = poisson_truncation(mean, SERIES_TAIL);
            let mass = poisson_expectation_to(mean, n, |_| 1.0);
            assert!((mass - 1.0).abs() < 1e-11, "{mean}: {mass}");
        }
        assert_eq!(poisson_expectation(0.0, |n| n as f64 + 3.0), 3.0);
    }

    #[test]
    fn kl_of_identical_models_is_zero() {
        let m = IntensityModel::sine2();
        assert!(kl_intensity(&m, &m, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_between_constants() {
        let a = IntensityModel::constant(Window::Circle, 2.0).unwrap();
        let b = IntensityModel::constant(Window::Circle, 3.0).unwrap();
        let exact = TAU * (1.0 + 2.0 * (2.0f64 / 3.0).ln());
        assert!((kl_intensity(&a, &b, 1.0).unwrap() - exact).abs() < 1e-12);
        assert!((exact - 1.18796).abs() < 1e-5);
    }

    #[test]
    fn kl_sine_against_constant_by_refined_quadrature() {
        let a = IntensityModel::sine2();
        let b = IntensityModel::constant(Window::Circle, 2.0).unwrap();
        let oracle = Trapezoid::new(8192).integrate(&Window::Circle, |u| {
            let l = u.sin() + 2.0;
            2.0 - l + l * (l / 2.0).ln()
        });
        let v = kl_intensity(&a, &b, 1.0).unwrap();
        assert!(v > 0.0);
        assert!((v - oracle).abs() < 1e-8);
        let (wt, sh) = kl_decomposed(&a, &b, 1.0).unwrap();
        assert!(wt.abs() < 1e-15);
        assert!((wt + sh - v).abs() < 1e-10);
    }

    #[test]
    fn kl_decomposition_cases() {
        let k = KernelSpec::von_mises(5.0).unwrap();
        let a = IntensityModel::mixture(k, vec![Atom::new(1.0, 2.0)]).unwrap();
        let b = IntensityModel::mixture(k, vec![Atom::new(1.0, 4.0)]).unwrap();
        let (wt, sh) = kl_decomposed(&a, &b, 1.5).unwrap();
        assert!(sh.abs() < 1e-12);
        assert!((wt - 1.5 * 2.0 * (1.0 - 2f64.ln())).abs() < 1e-12);

        let c = IntensityModel::mixture(k, vec![Atom::new(1.0, 1.0), Atom::new(4.0, 1.0)]).unwrap();
        let (wt, sh) = kl_decomposed(&a, &c, 1.0).unwrap();
        assert!(wt.abs() < 1e-15 && sh > 0.0);
        assert!((wt + sh - kl_intensity(&a, &c, 1.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn kl_rejects_vanishing_estimate() {
        let a = IntensityModel::sine2();
        let b = IntensityModel::closed_form(Window::Circle, None, |u: f64| u.sin() + 1.0, Some(TAU)).unwrap();
        assert!(matches!(kl_intensity(&a, &b, 1.0), Err(Error::NonPositiveIntensity { .. })));
    }

    #[test]
    fn weight_difference_limits() {
        assert_eq!(weight_risk_difference_exact(1.0, 0.0, 0.0, 3.0, 1.0).unwrap(), 0.0);
        let small = weight_risk_difference_exact(TAU, 0.0, TAU - 1.0, 1e-9, 2.0).unwrap();
        assert!((small - (TAU - 1.0) / 2.0).abs() < 1e-8);
        assert!(weight_risk_difference_exact(3.0, 0.0, 2.0, 1.0, 2.0).unwrap() > 0.0);
        assert!(weight_risk_difference_exact(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn weight_difference_matches_direct_summation() {
        // independent oracle: sum the pmf with factorials formed in closed form
        let (abs_alpha, w, tau) = (TAU, 4.0 * PI, 1.0);
        let mu = tau * w;
        let mut oracle = 0.0;
        for n in 0..200u32 {
            let log_pmf = -mu + n as f64 * mu.ln() - statrs::function::gamma::ln_gamma(n as f64 + 1.0);
            oracle += log_pmf.exp() * ((n as f64 + abs_alpha).ln() - (n as f64 + 1.0).ln());
        }
        let oracle = (abs_alpha - 1.0) / tau - w * oracle;
        let v = weight_risk_difference_exact(abs_alpha, 0.0, abs_alpha - 1.0, w, tau).unwrap();
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn lemma3_cases() {
        assert_eq!(lemma3_check(0.0, 1.0).unwrap(), (0.0, 0.0));
        let (lhs, rhs) = lemma3_check(1.0, 1.0).unwrap();
        let mut series = 0.0;
        let mut fact = 1.0;
        for n in 0..60 {
            if n > 0 {
                fact *= n as f64;
            }
            series += (-1.0f64).exp() / fact * ((n as f64 + 2.0).ln() - (n as f64 + 1.0).ln());
        }
        assert!((lhs - series).abs() < 1e-12);
        assert!((rhs - (1.0 - 1.0 / E)).abs() < 1e-15);
        assert!(lhs < rhs);
        let (lhs, rhs) = lemma3_check(4.0 * PI, TAU - 1.0).unwrap();
        assert!(lhs < rhs);
        assert_eq!(lemma3_grid().len(), 200);
    }

    #[test]
    fn lemma1_polynomials() {
        let (w, tau) = (2.0, 0.5);
        let (num, id) = lemma1_check(w, tau, |n| n as f64).unwrap();
        assert!((id - w).abs() < 1e-12);
        assert!((num - w).abs() < 1e-7);
        let (num, id) = lemma1_check(w, tau, |n| (n * n) as f64).unwrap();
        let exact = w * (2.0 * tau * w + 1.0);
        assert!((id - exact).abs() < 1e-11);
        assert!((num - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn domination_table() {
        let r = domination_study(TAU, &[(0.0, TAU - 1.0)], &[0.1, 1.0, 4.0 * PI, 50.0], 1.0).unwrap();
        assert_eq!(r.entries.len(), 4);
        assert!(r.entries.iter().all(|e| e.estimate > 0.0));
        let r = domination_study(1.0, &[(0.0, 0.0)], &[1.0], 1.0).unwrap();
        assert!(r.entries.is_empty() && !r.notes.is_empty());
        let r = domination_study(3.0, &[(0.0, 2.0), (2.5, 2.0)], &[1.0], 2.0).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert!(r.entries[0].estimate > 0.0);
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn report_csv_and_json() {
        let r = domination_study(3.0, &[(0.0, 2.0)], &[1.0], 2.0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("label,estimate,std_error,replications,exact\n"));
        let back: RiskReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    fn small_setup<'a>(truth: &'a IntensityModel, kernel: &'a KernelSpec, reps: usize) -> StudySetup<'a> {
        StudySetup {
            truth,
            kernel,
            config: McmcConfig {
                burn_in: 50,
                samples: 50,
                thin: 1,
                ..McmcConfig::default()
            },
            replications: reps,
            stream: RngStream::new(17, 0),
        }
    }

    #[test]
    fn paired_difference_is_weight_only() {
        let truth = IntensityModel::sine2();
        let k = KernelSpec::von_mises(5.0).unwrap();
        let setup = small_setup(&truth, &k, 40);
        let p0 = PriorSpec::improper_uniform(Window::Circle, 1.0, 0.0).unwrap();
        let p1 = p0.with_gamma(TAU - 1.0).unwrap();
        let losses = paired_estimation_losses(&setup, &[p0.clone(), p1.clone()], 1.0).unwrap();
        assert!(losses.total(0).iter().chain(&losses.total(1)).all(|&l| l >= 0.0));

        // the same study with a different kernel gives the same differences
        let k2 = KernelSpec::von_mises(1.0).unwrap();
        let other = paired_estimation_losses(&small_setup(&truth, &k2, 40), &[p0, p1], 1.0).unwrap();
        assert_eq!(losses.difference(0, 1), other.difference(0, 1));
        assert_ne!(losses.shape, other.shape);
    }

    #[test]
    fn studies_are_deterministic() {
        let truth = IntensityModel::sine2();
        let k = KernelSpec::von_mises(5.0).unwrap();
        let setup = small_setup(&truth, &k, 12);
        let p = PriorSpec::improper_uniform(Window::Circle, 1.0, TAU - 1.0).unwrap();
        let a = estimation_risk_mc(&setup, &p, 1.0).unwrap();
        let b = estimation_risk_mc(&setup, &p, 1.0).unwrap();
        assert_eq!(a, b);
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = serial.install(|| estimation_risk_mc(&setup, &p, 1.0)).unwrap();
        assert_eq!(a, c);
        let pa = predictive_risk_mc(&setup, &p, 1.0, 0.5).unwrap();
        let pb = predictive_risk_mc(&setup, &p, 1.0, 0.5).unwrap();
        assert_eq!(pa, pb);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn theorem4_integrand_positive(abs_alpha in 1.05..20.0f64, w in 0.001..200.0f64, tau in 0.05..5.0f64) {
            let v = weight_risk_difference_exact(abs_alpha, 0.0, abs_alpha - 1.0, w, tau).unwrap();
            prop_assert!(v > 0.0);
        }

        #[test]
        fn lemma3_holds(theta in 0.0..60.0f64, c in 0.05..12.0f64) {
            let (lhs, rhs) = lemma3_check(theta, c).unwrap();
            prop_assert!(lhs <= rhs + 1e-14);
        }

        #[test]
        fn kl_nonnegative_and_split(w1 in 0.1..20.0f64, w2 in 0.1..20.0f64, u1 in 0.0..6.28f64, u2 in 0.0..6.28f64) {
            let k = KernelSpec::von_mises(2.0).unwrap();
            let a = IntensityModel::mixture(k, vec![Atom::new(u1, w1)]).unwrap();
            let b = IntensityModel::mixture(k, vec![Atom::new(u2, w2)]).unwrap();
            let total = kl_intensity(&a, &b, 1.0).unwrap();
            let (wt, sh) = kl_decomposed(&a, &b, 1.0).unwrap();
            prop_assert!(total >= -1e-12 && wt >= 0.0 && sh >= -1e-12);
            prop_assert!((wt + sh - total).abs() < 1e-10 * (1.0 + total));
        }
    }
}
