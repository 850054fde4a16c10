//! Posterior inference under `π_{α,β,γ}`.
//!
//! The posterior factorizes: the total mass `w` has a closed-form gamma
//! posterior, while the shape `λ̄` only sees the Dirichlet process mixture
//! posterior of the latent locations, which is explored by MCMC. Because the
//! shape posterior never reads `β`, `γ` or `s`, one chain serves every member
//! of the prior family.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernels::{KernelSpec, VonMisesSeries};
use crate::pattern::PointPattern;
use crate::prior::{BaseMeasure, Beta, PriorSpec};
use crate::window::Window;

/// Grid resolution of posterior shape estimates.
pub const LAMBDA_GRID_CELLS: usize = 1024;

/// Cluster acceptance rate below which a chain is flagged.
pub const MIN_ACCEPTANCE: f64 = 0.05;

/// One occupied table: latent location `u_c` and member count `n_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub location: f64,
    pub count: usize,
}

/// A partition of the observations with one latent location per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    /// Cluster index of each observation.
    pub assignments: Vec<usize>,
    pub clusters: Vec<Cluster>,
}

impl ClusterState {
    /// The state with no observations.
    pub fn empty() -> Self {
        ClusterState {
            assignments: Vec::new(),
            clusters: Vec::new(),
        }
    }

    /// `N`.
    pub fn observations(&self) -> usize {
        self.assignments.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Whether observations `i` and `j` share a cluster.
    pub fn together(&self, i: usize, j: usize) -> bool {
        self.assignments[i] == self.assignments[j]
    }

    fn check(&self, window: &Window) -> bool {
        let total: usize = self.clusters.iter().map(|c| c.count).sum();
        total == self.assignments.len()
            && self.clusters.iter().all(|c| c.count > 0 && window.contains(c.location))
            && self.assignments.iter().all(|&a| a < self.clusters.len())
    }
}

/// Chain settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    /// Auxiliary components `m` per reassignment.
    pub aux_components: usize,
    /// Random-walk scale for cluster locations.
    pub location_step: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in: 2000,
            samples: 2000,
            thin: 5,
            aux_components: 3,
            location_step: 0.2,
        }
    }
}

impl McmcConfig {
    /// Shorter chain for risk studies that run thousands of fits:
    /// burn-in 500, 500 draws, thin 2.
    pub fn harness() -> Self {
        McmcConfig {
            burn_in: 500,
            samples: 500,
            thin: 2,
            ..McmcConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::param("samples", "need at least one retained draw"));
        }
        if self.thin < 1 {
            return Err(Error::param("thin", "must be at least 1"));
        }
        if self.aux_components < 1 {
            return Err(Error::param("aux_components", "must be at least 1"));
        }
        if !(self.location_step.is_finite() && self.location_step > 0.0) {
            return Err(Error::param("location_step", format!("must be positive, got {}", self.location_step)));
        }
        Ok(())
    }

    pub fn sweeps(&self) -> usize {
        self.burn_in + self.samples * self.thin
    }
}

/// What the chain did, for the caller to judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcDiagnostics {
    pub sweeps: usize,
    /// Exact sampling paths (`N ≤ 1`) make no Metropolis moves.
    pub exact: bool,
    /// Acceptance rate of the cluster-location moves; `None` if none were made.
    pub acceptance_rate: Option<f64>,
    /// Number of clusters in each retained draw.
    pub cluster_count_trace: Vec<usize>,
    pub warnings: Vec<String>,
}

impl McmcDiagnostics {
    fn exact(draws: usize) -> Self {
        McmcDiagnostics {
            sweeps: 0,
            exact: true,
            acceptance_rate: None,
            cluster_count_trace: vec![usize::from(draws > 0); draws],
            warnings: Vec::new(),
        }
    }

    pub fn passes(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn mean_clusters(&self) -> f64 {
        if self.cluster_count_trace.is_empty() {
            return 0.0;
        }
        self.cluster_count_trace.iter().sum::<usize>() as f64 / self.cluster_count_trace.len() as f64
    }
}

/// Retained draws plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub draws: Vec<ClusterState>,
    pub diagnostics: McmcDiagnostics,
}

/// `E[w | 𝒙] = (|α| − γ + N) / (s + 1/β)`.
pub fn posterior_weight_mean(prior: &PriorSpec, n: usize, s: f64) -> f64 {
    (prior.weight_shape() + n as f64) / prior.beta().posterior_rate(s)
}

/// Samples the Dirichlet process mixture posterior of the latent locations.
///
/// Auxiliary-component Gibbs reassignment of each observation followed by a
/// random-walk Metropolis move of each cluster location. With one observation
/// the posterior of `u₁ ∝ k(x₁, u) α(u)` is sampled exactly instead.
pub fn run_mcmc<R: Rng + ?Sized>(
    pattern: &PointPattern,
    prior: &PriorSpec,
    kernel: &KernelSpec,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    config.validate()?;
    check_domains(pattern, prior, kernel)?;
    let base = prior.base();
    match pattern.count() {
        0 => Err(Error::param("pattern", "MCMC needs at least one observation")),
        1 => {
            let x = pattern.points()[0];
            let draws = (0..config.samples)
                .map(|_| ClusterState {
                    assignments: vec![0],
                    clusters: vec![Cluster {
                        location: base.sample_given_point(kernel, x, rng),
                        count: 1,
                    }],
                })
                .collect();
            Ok(PosteriorDraws {
                draws,
                diagnostics: McmcDiagnostics::exact(config.samples),
            })
        }
        _ => Ok(Chain::new(pattern.points(), base, kernel, config, rng).run(rng)),
    }
}

fn check_domains(pattern: &PointPattern, prior: &PriorSpec, kernel: &KernelSpec) -> Result<()> {
    if pattern.window() != kernel.window() || prior.base().window() != kernel.window() {
        return Err(Error::DomainMismatch(
            "pattern, base measure and kernel must share one window".into(),
        ));
    }
    Ok(())
}

struct Chain<'a> {
    xs: &'a [f64],
    base: &'a BaseMeasure,
    kernel: &'a KernelSpec,
    config: &'a McmcConfig,
    state: ClusterState,
    proposals: usize,
    accepted: usize,
}

impl<'a> Chain<'a> {
    // every observation starts alone at a draw from its own one-point posterior
    fn new<R: Rng + ?Sized>(
        xs: &'a [f64],
        base: &'a BaseMeasure,
        kernel: &'a KernelSpec,
        config: &'a McmcConfig,
        rng: &mut R,
    ) -> Self {
        let clusters = xs
            .iter()
            .map(|&x| Cluster {
                location: base.sample_given_point(kernel, x, rng),
                count: 1,
            })
            .collect();
        Chain {
            xs,
            base,
            kernel,
            config,
            state: ClusterState {
                assignments: (0..xs.len()).collect(),
                clusters,
            },
            proposals: 0,
            accepted: 0,
        }
    }

    fn run<R: Rng + ?Sized>(mut self, rng: &mut R) -> PosteriorDraws {
        let mut draws = Vec::with_capacity(self.config.samples);
        let mut trace = Vec::with_capacity(self.config.samples);
        for sweep in 1..=self.config.sweeps() {
            self.reassign_all(rng);
            self.move_locations(rng);
            if sweep > self.config.burn_in && (sweep - self.config.burn_in) % self.config.thin == 0 {
                debug_assert!(self.state.check(&self.base.window()));
                trace.push(self.state.cluster_count());
                draws.push(self.state.clone());
            }
        }
        let acceptance_rate = (self.proposals > 0).then(|| self.accepted as f64 / self.proposals as f64);
        let mut warnings = Vec::new();
        if let Some(rate) = acceptance_rate {
            if rate < MIN_ACCEPTANCE {
                warnings.push(format!(
                    "cluster-location acceptance rate {rate:.3} is below {MIN_ACCEPTANCE}"
                ));
            }
        }
        PosteriorDraws {
            draws,
            diagnostics: McmcDiagnostics {
                sweeps: self.config.sweeps(),
                exact: false,
                acceptance_rate,
                cluster_count_trace: trace,
                warnings,
            },
        }
    }

    fn reassign_all<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let m = self.config.aux_components;
        let a = self.base.mass();
        let mut aux = vec![0.0; m];
        let mut probs = Vec::new();
        for i in 0..self.xs.len() {
            let x = self.xs[i];
            let c = self.state.assignments[i];
            self.state.clusters[c].count -= 1;
            let mut first_fresh = 0;
            if self.state.clusters[c].count == 0 {
                // a singleton keeps its location as the first auxiliary component
                aux[0] = self.state.clusters[c].location;
                first_fresh = 1;
                self.remove_cluster(c);
            }
            for slot in aux.iter_mut().skip(first_fresh) {
                *slot = self.base.sample(rng);
            }

            probs.clear();
            probs.extend(
                self.state
                    .clusters
                    .iter()
                    .map(|cl| cl.count as f64 * self.kernel.eval(x, cl.location)),
            );
            probs.extend(aux.iter().map(|&u| a / m as f64 * self.kernel.eval(x, u)));
            let pick = sample_index(&probs, rng);

            let k = self.state.clusters.len();
            if pick < k {
                self.state.clusters[pick].count += 1;
                self.state.assignments[i] = pick;
            } else {
                self.state.clusters.push(Cluster {
                    location: aux[pick - k],
                    count: 1,
                });
                self.state.assignments[i] = k;
            }
        }
    }

    fn remove_cluster(&mut self, c: usize) {
        let last = self.state.clusters.len() - 1;
        self.state.clusters.swap_remove(c);
        if c != last {
            for a in self.state.assignments.iter_mut() {
                if *a == last {
                    *a = c;
                }
            }
        }
    }

    fn move_locations<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let window = self.base.window();
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); self.state.clusters.len()];
        for (i, &c) in self.state.assignments.iter().enumerate() {
            members[c].push(self.xs[i]);
        }
        for (cluster, xs) in self.state.clusters.iter_mut().zip(&members) {
            let z: f64 = StandardNormal.sample(rng);
            let raw = cluster.location + self.config.location_step * z;
            self.proposals += 1;
            let proposal = if window.is_circle() {
                window.wrap(raw)
            } else if window.contains(raw) {
                raw
            } else {
                continue;
            };
            let log_target = |u: f64| -> f64 {
                xs.iter().map(|&x| self.kernel.log_eval(x, u)).sum::<f64>() + self.base.density(u).ln()
            };
            let log_ratio = log_target(proposal) - log_target(cluster.location);
            if log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio {
                cluster.location = proposal;
                self.accepted += 1;
            }
        }
    }
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    // rounding at the top end
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// One-step CRP predictive density of a draw:
/// `(Σ_c n_c k(y, u_c) + |α| ∫k(y,u)ᾱ(du)) / (|α| + N)`.
pub fn draw_lambda_bar(state: &ClusterState, base: &BaseMeasure, kernel: &KernelSpec, y: f64) -> f64 {
    let a = base.mass();
    let n = state.observations() as f64;
    let data: f64 = state
        .clusters
        .iter()
        .map(|c| c.count as f64 * kernel.eval(y, c.location))
        .sum();
    (data + a * base.kernel_integral(kernel, y)) / (a + n)
}

/// `λ̄_{α,𝒙}(y)`: the draw average of [`draw_lambda_bar`].
pub fn lambda_bar_at(draws: &[ClusterState], prior: &PriorSpec, kernel: &KernelSpec, y: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let base = prior.base();
    Ok(draws.iter().map(|d| draw_lambda_bar(d, base, kernel, y)).sum::<f64>() / draws.len() as f64)
}

/// `λ̄_{α,𝒙}` tabulated on `cells` grid cells.
///
/// Depends on the prior only through `α`, so the result is the same for every
/// `β` and `γ`.
pub fn posterior_lambda_bar(
    draws: &[ClusterState],
    prior: &PriorSpec,
    kernel: &KernelSpec,
    cells: usize,
) -> Result<GridFunction> {
    shape_on_grid(draws, prior.base(), kernel, cells)
}

fn shape_on_grid(draws: &[ClusterState], base: &BaseMeasure, kernel: &KernelSpec, cells: usize) -> Result<GridFunction> {
    let first = draws.first().ok_or(Error::EmptyDraws)?;
    let n = first.observations();
    if draws.iter().any(|d| d.observations() != n) {
        return Err(Error::param("draws", "draws disagree on the number of observations"));
    }
    let window = kernel.window();
    let a = base.mass();
    let scale = 1.0 / ((a + n as f64) * draws.len() as f64);
    let prior_part = a / (a + n as f64);
    let nodes = window.grid(cells);

    let data: Vec<f64> = if n == 0 {
        vec![0.0; nodes.len()]
    } else if let Some(series) = VonMisesSeries::for_kernel(kernel) {
        let mut moments = series.empty_moments();
        for d in draws {
            for c in &d.clusters {
                series.accumulate(&mut moments, c.location, c.count as f64 * scale);
            }
        }
        nodes.iter().map(|&y| series.evaluate(&moments, y)).collect()
    } else {
        // pool identical locations across draws before the direct sum
        let mut atoms: Vec<(f64, f64)> = draws
            .iter()
            .flat_map(|d| d.clusters.iter().map(|c| (c.location, c.count as f64 * scale)))
            .collect();
        atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
        atoms.dedup_by(|p, q| {
            if p.0 == q.0 {
                q.1 += p.1;
                true
            } else {
                false
            }
        });
        nodes
            .iter()
            .map(|&y| atoms.iter().map(|&(u, m)| m * kernel.eval(y, u)).sum())
            .collect()
    };
    let values = nodes
        .iter()
        .zip(data)
        .map(|(&y, d)| d + prior_part * base.kernel_integral(kernel, y))
        .collect();
    Ok(GridFunction::new(window, cells, values))
}

/// Batch-means standard error of the mean of a (possibly autocorrelated) trace.
pub fn batch_means_se(values: &[f64], batches: usize) -> f64 {
    let batches = batches.clamp(1, values.len().max(1));
    let size = values.len() / batches;
    if size == 0 || batches < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// The shared part of every estimate: draws and `λ̄` on the grid.
#[derive(Debug, Clone)]
pub struct ShapePosterior {
    pub count: usize,
    pub draws: Vec<ClusterState>,
    pub lambda_bar: GridFunction,
    pub diagnostics: McmcDiagnostics,
}

impl ShapePosterior {
    /// Runs the chain (or skips it for `N = 0`) and tabulates `λ̄`.
    pub fn fit<R: Rng + ?Sized>(
        pattern: &PointPattern,
        prior: &PriorSpec,
        kernel: &KernelSpec,
        config: &McmcConfig,
        cells: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        check_domains(pattern, prior, kernel)?;
        let PosteriorDraws { draws, diagnostics } = if pattern.is_empty() {
            PosteriorDraws {
                draws: vec![ClusterState::empty()],
                diagnostics: McmcDiagnostics::exact(0),
            }
        } else {
            run_mcmc(pattern, prior, kernel, config, rng)?
        };
        let lambda_bar = posterior_lambda_bar(&draws, prior, kernel, cells)?;
        Ok(ShapePosterior {
            count: pattern.count(),
            draws,
            lambda_bar,
            diagnostics,
        })
    }

    /// `λ̂ = w_{|α|−γ,β,N} λ̄` for one member of the prior family.
    pub fn summary(&self, prior: &PriorSpec, s: f64) -> Result<PosteriorSummary> {
        check_exposure(s)?;
        let weight_mean = posterior_weight_mean(prior, self.count, s);
        Ok(PosteriorSummary {
            gamma: prior.gamma(),
            beta: prior.beta(),
            weight_mean,
            lambda_bar: self.lambda_bar.clone(),
            lambda_hat: self.lambda_bar.scaled(weight_mean),
            diagnostics: self.diagnostics.clone(),
        })
    }
}

fn check_exposure(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::param("s", format!("exposure must be positive, got {s}")))
    }
}

/// Bayes estimate of `λ` under one prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub gamma: f64,
    pub beta: Beta,
    /// `E[w | 𝒙]`.
    pub weight_mean: f64,
    pub lambda_bar: GridFunction,
    pub lambda_hat: GridFunction,
    pub diagnostics: McmcDiagnostics,
}

/// Fits the shape posterior and returns `λ_{α,β,γ,𝒙}`.
pub fn estimate_intensity<R: Rng + ?Sized>(
    pattern: &PointPattern,
    prior: &PriorSpec,
    kernel: &KernelSpec,
    s: f64,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorSummary> {
    ShapePosterior::fit(pattern, prior, kernel, config, LAMBDA_GRID_CELLS, rng)?.summary(prior, s)
}

/// Writes `grid, lambda_bar, lambda_hat_gamma=<γ>…` with one row per node.
///
/// All summaries must come from the same [`ShapePosterior`].
pub fn write_estimates_csv<W: Write>(summaries: &[PosteriorSummary], writer: W) -> Result<()> {
    let first = summaries.first().ok_or(Error::EmptyDraws)?;
    if summaries.iter().any(|s| s.lambda_bar != first.lambda_bar) {
        return Err(Error::param("summaries", "estimates do not share one shape posterior"));
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["grid".to_string(), "lambda_bar".to_string()];
    header.extend(summaries.iter().map(|s| format!("lambda_hat_gamma={}", s.gamma)));
    wtr.write_record(&header)?;
    for (i, y) in first.lambda_bar.nodes().into_iter().enumerate() {
        let mut row = vec![y.to_string(), first.lambda_bar.values()[i].to_string()];
        row.extend(summaries.iter().map(|s| s.lambda_hat.values()[i].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
