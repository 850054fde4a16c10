//! Exact sampling of Poisson process realizations, Chinese restaurant process
//! seatings and prior intensities.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::InverseCdf;
use crate::intensity::{IntensityKind, IntensityModel};
use crate::kernels::{Atom, KernelSpec};
use crate::pattern::PointPattern;
use crate::prior::{Beta, BaseMeasure, PriorSpec};
use crate::quadrature::DEFAULT_CELLS;
use crate::window::Window;

/// Default number of sticks for truncated stick-breaking.
pub const DEFAULT_TRUNCATION: usize = 500;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent streams
/// for the same seed. Monte Carlo studies use the replication index as the
/// stream id, so serial and parallel runs draw identical numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Stream `stream_id` under the same seed.
    pub fn stream(&self, stream_id: u64) -> RngStream {
        RngStream::new(self.seed, stream_id)
    }

    /// A derived seed family, independent of this one, labelled by `tag`.
    ///
    /// Used to give each arm of a study (each τ node, the predictive arm, …)
    /// its own family of per-replication streams.
    pub fn derive(&self, tag: u64) -> RngStream {
        RngStream::new(splitmix64(splitmix64(self.seed ^ self.stream_id.rotate_left(32)) ^ tag), 0)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pre-computed sampler for one intensity model.
#[derive(Debug, Clone)]
pub struct NhppSampler {
    model: IntensityModel,
    shape: ShapeSampler,
}

#[derive(Debug, Clone)]
enum ShapeSampler {
    Table(InverseCdf),
    Mixture { kernel: KernelSpec, cumulative: Vec<f64>, locations: Vec<f64> },
}

impl NhppSampler {
    pub fn new(model: &IntensityModel) -> Self {
        let shape = match model.kind() {
            IntensityKind::KernelMixture { kernel, atoms } => {
                let mut acc = 0.0;
                let cumulative = atoms
                    .iter()
                    .map(|a| {
                        acc += a.weight;
                        acc
                    })
                    .collect();
                ShapeSampler::Mixture {
                    kernel: *kernel,
                    cumulative,
                    locations: atoms.iter().map(|a| a.location).collect(),
                }
            }
            _ => ShapeSampler::Table(InverseCdf::new(model.window(), DEFAULT_CELLS, |u| model.eval(u))),
        };
        NhppSampler {
            model: model.clone(),
            shape,
        }
    }

    /// A realization of `𝒫o(τ λ)`: `N ~ Poisson(τ w)`, then `N` i.i.d. points from `λ̄`.
    pub fn sample<R: Rng + ?Sized>(&self, exposure: f64, rng: &mut R) -> Result<PointPattern> {
        check_exposure(exposure)?;
        let window = self.model.window();
        let points = match &self.shape {
            ShapeSampler::Table(table) => {
                let n = poisson(exposure * self.model.total_mass(), rng);
                (0..n).map(|_| table.sample(rng)).collect()
            }
            ShapeSampler::Mixture {
                kernel,
                cumulative,
                locations,
            } => {
                // On an interval the kernel spills past the ends; generating on
                // the whole line and keeping what lands inside is exact thinning.
                let total = *cumulative.last().expect("mixture has atoms");
                let n = poisson(exposure * total, rng);
                let mut pts = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    let target = rng.gen::<f64>() * total;
                    let j = cumulative.partition_point(|&c| c <= target).min(locations.len() - 1);
                    let y = kernel.sample_around(locations[j], rng);
                    if window.contains(y) {
                        pts.push(y);
                    }
                }
                pts
            }
        };
        PointPattern::new(window, points)
    }
}

/// One realization of the process with intensity `exposure · λ`.
pub fn sample_nhpp<R: Rng + ?Sized>(model: &IntensityModel, exposure: f64, rng: &mut R) -> Result<PointPattern> {
    NhppSampler::new(model).sample(exposure, rng)
}

/// Lewis–Shedler thinning of a homogeneous process with rate `bound`.
///
/// Without a bound, the grid supremum of `λ` times 1.001 is used. Fails if a
/// generated point reveals `λ(u) > bound`.
pub fn sample_nhpp_thinning<R: Rng + ?Sized>(
    model: &IntensityModel,
    exposure: f64,
    bound: Option<f64>,
    rng: &mut R,
) -> Result<PointPattern> {
    check_exposure(exposure)?;
    let window = model.window();
    let bound = match bound {
        Some(b) => b,
        None => {
            window
                .grid(DEFAULT_CELLS)
                .into_iter()
                .map(|u| model.eval(u))
                .fold(0.0, f64::max)
                * 1.001
        }
    };
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::param("bound", format!("must be positive, got {bound}")));
    }
    let n = poisson(exposure * bound * window.length(), rng);
    let mut points = Vec::new();
    for _ in 0..n {
        let u = uniform_on(&window, rng);
        let lam = model.eval(u);
        if lam > bound {
            return Err(Error::param("bound", format!("intensity {lam} at u = {u} exceeds bound {bound}")));
        }
        if rng.gen::<f64>() * bound < lam {
            points.push(u);
        }
    }
    PointPattern::new(window, points)
}

/// Locations and table labels of `n` customers of a Chinese restaurant process.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpDraw {
    /// `u_k` for each customer.
    pub locations: Vec<f64>,
    /// Table index of each customer, in order of first occupation.
    pub labels: Vec<usize>,
}

impl CrpDraw {
    pub fn table_count(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }
}

/// Sequential CRP with base measure `α`: customer `k+1` starts a new table
/// with probability `|α|/(|α|+k)` (location drawn from `ᾱ`), otherwise copies
/// the location of one of the previous `k` customers chosen uniformly.
pub fn sample_crp<R: Rng + ?Sized>(base: &BaseMeasure, n: usize, rng: &mut R) -> CrpDraw {
    let a = base.mass();
    let mut locations = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut tables = 0;
    for k in 0..n {
        let fresh = rng.gen::<f64>() * (a + k as f64) < a;
        if fresh {
            locations.push(base.sample(rng));
            labels.push(tables);
            tables += 1;
        } else {
            let i = rng.gen_range(0..k);
            locations.push(locations[i]);
            labels.push(labels[i]);
        }
    }
    CrpDraw { locations, labels }
}

/// Draws an intensity from the proper prior `π_{α,β,γ}`.
///
/// `w ~ Ga(|α| − γ, β)`; `μ̄` is stick-breaking with `truncation` sticks, the
/// leftover mass going to the last stick.
pub fn sample_prior_intensity<R: Rng + ?Sized>(
    prior: &PriorSpec,
    kernel: &KernelSpec,
    truncation: usize,
    rng: &mut R,
) -> Result<IntensityModel> {
    let beta = match prior.beta() {
        Beta::Finite(b) => b,
        Beta::Improper => return Err(Error::ImproperPrior),
    };
    if truncation == 0 {
        return Err(Error::param("truncation", "need at least one stick"));
    }
    if kernel.window() != prior.base().window() {
        return Err(Error::DomainMismatch("kernel and base measure live on different windows".into()));
    }
    let shape = prior.weight_shape();
    let w = Gamma::new(shape, beta)
        .map_err(|e| Error::param("gamma", e.to_string()))?
        .sample(rng);
    let sticks = stick_breaking(prior.abs_alpha(), truncation, rng)?;
    let atoms: Vec<Atom> = sticks
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| Atom::new(prior.base().sample(rng), w * p))
        .filter(|a| a.weight > 0.0)
        .collect();
    if atoms.is_empty() {
        // w underflowed to zero: a vanishing intensity cannot be represented
        return Err(Error::param("weight", format!("sampled total mass {w} is not positive")));
    }
    IntensityModel::mixture(*kernel, atoms)
}

/// Stick proportions `π_k = v_k ∏_{j<k}(1 − v_j)`, `v_k ~ Beta(1, θ)`; the last
/// stick takes whatever is left, so the proportions sum to one.
pub fn stick_breaking<R: Rng + ?Sized>(concentration: f64, truncation: usize, rng: &mut R) -> Result<Vec<f64>> {
    let dist = BetaDist::new(1.0, concentration).map_err(|e| Error::param("concentration", e.to_string()))?;
    let mut remaining = 1.0;
    let mut out = Vec::with_capacity(truncation);
    for _ in 0..truncation.saturating_sub(1) {
        let v: f64 = dist.sample(rng);
        out.push(remaining * v);
        remaining *= 1.0 - v;
    }
    out.push(remaining);
    Ok(out)
}

fn check_exposure(exposure: f64) -> Result<()> {
    if exposure.is_finite() && exposure > 0.0 {
        Ok(())
    } else {
        Err(Error::param("exposure", format!("must be positive, got {exposure}")))
    }
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

fn uniform_on<R: Rng + ?Sized>(window: &Window, rng: &mut R) -> f64 {
    match *window {
        Window::Circle => window.wrap(rng.gen_range(0.0..std::f64::consts::TAU)),
        Window::Interval { a, b } => rng.gen_range(a..=b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::BaseMeasure;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn streams_reproduce_and_differ() {
        let s = RngStream::new(7, 3);
        let a: Vec<u64> = s.rng().sample_iter(rand::distributions::Standard).take(8).collect();
        let b: Vec<u64> = s.rng().sample_iter(rand::distributions::Standard).take(8).collect();
        let c: Vec<u64> = s.stream(4).rng().sample_iter(rand::distributions::Standard).take(8).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(s.derive(1), s.derive(2));
    }

    #[test]
    fn same_stream_same_pattern() {
        let m = IntensityModel::sine2();
        let s = RngStream::new(42, 0);
        let p1 = sample_nhpp(&m, 1.0, &mut s.rng()).unwrap();
        let p2 = sample_nhpp(&m, 1.0, &mut s.rng()).unwrap();
        assert_eq!(p1, p2);
        assert!(sample_nhpp(&m, 0.0, &mut s.rng()).is_err());
    }

    #[test]
    fn homogeneous_count_moments() {
        let m = IntensityModel::constant(Window::Circle, 2.0).unwrap();
        let sampler = NhppSampler::new(&m);
        let mut rng = RngStream::new(1, 0).rng();
        let reps = 20_000;
        let counts: Vec<f64> = (0..reps)
            .map(|_| sampler.sample(1.0, &mut rng).unwrap().count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let target = 4.0 * PI;
        assert!((mean - target).abs() < 3.0 * (target / reps as f64).sqrt());
        // Var of the sample variance of a Poisson ≈ (μ + 2μ²)/n
        assert!((var - target).abs() < 3.0 * ((target + 2.0 * target * target) / reps as f64).sqrt());
    }

    #[test]
    fn thinning_matches_inversion_in_mean() {
        let m = IntensityModel::sine2();
        let mut rng = RngStream::new(2, 0).rng();
        let reps = 20_000;
        let mut left = 0usize;
        let mut total = 0usize;
        for _ in 0..reps {
            let p = sample_nhpp_thinning(&m, 1.0, None, &mut rng).unwrap();
            total += p.count();
            left += p.points().iter().filter(|&&u| u < PI).count();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 4.0 * PI).abs() < 3.0 * (4.0 * PI / reps as f64).sqrt());
        // ∫_0^π (sin u + 2) du = 2 + 2π
        let left_mean = left as f64 / reps as f64;
        assert!((left_mean - (2.0 + TAU)).abs() < 3.0 * ((2.0 + TAU) / reps as f64).sqrt());
        assert!(sample_nhpp_thinning(&m, 1.0, Some(1.0), &mut rng).is_err());
    }

    #[test]
    fn interval_mixture_points_stay_inside() {
        let w = Window::interval(0.0, 1.0).unwrap();
        let k = KernelSpec::gaussian(0.3, w).unwrap();
        let m = IntensityModel::mixture(k, vec![Atom::new(0.1, 50.0)]).unwrap();
        let p = sample_nhpp(&m, 1.0, &mut RngStream::new(3, 0).rng()).unwrap();
        assert!(p.points().iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(p.count() > 0);
    }

    #[test]
    fn crp_first_customer_and_pairs() {
        let base = BaseMeasure::uniform(Window::Circle, 1.0).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        let one = sample_crp(&base, 1, &mut rng);
        assert_eq!(one.labels, vec![0]);
        assert_eq!(one.table_count(), 1);
        assert_eq!(sample_crp(&base, 0, &mut rng).table_count(), 0);

        // n = 2: P(same table) = 1/(θ + 1)
        let theta = base.mass();
        let reps = 100_000;
        let same = (0..reps)
            .filter(|_| sample_crp(&base, 2, &mut rng).table_count() == 1)
            .count();
        let p = 1.0 / (theta + 1.0);
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((same as f64 / reps as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn crp_repeats_share_locations() {
        let base = BaseMeasure::uniform(Window::Circle, 0.2).unwrap();
        let d = sample_crp(&base, 50, &mut RngStream::new(6, 0).rng());
        for i in 0..50 {
            for j in 0..50 {
                assert_eq!(d.labels[i] == d.labels[j], d.locations[i] == d.locations[j]);
            }
        }
    }

    #[test]
    fn prior_weight_is_exponential_when_shape_is_one() {
        // |α| − γ = 1, β = 1
        let base = BaseMeasure::uniform(Window::Circle, 1.0).unwrap();
        let prior = PriorSpec::new(base, Beta::Finite(1.0), TAU - 1.0).unwrap();
        let k = KernelSpec::von_mises(5.0).unwrap();
        let mut rng = RngStream::new(8, 0).rng();
        let reps = 100_000;
        let mean = (0..reps)
            .map(|_| sample_prior_intensity(&prior, &k, 1, &mut rng).unwrap().total_mass())
            .sum::<f64>()
            / reps as f64;
        assert!((mean - 1.0).abs() < 3.0 / (reps as f64).sqrt());
    }

    #[test]
    fn single_stick_is_one_atom() {
        let base = BaseMeasure::uniform(Window::Circle, 1.0).unwrap();
        let prior = PriorSpec::new(base, Beta::Finite(2.0), 0.0).unwrap();
        let k = KernelSpec::von_mises(5.0).unwrap();
        let m = sample_prior_intensity(&prior, &k, 1, &mut RngStream::new(9, 0).rng()).unwrap();
        match m.kind() {
            IntensityKind::KernelMixture { atoms, .. } => {
                assert_eq!(atoms.len(), 1);
                assert_eq!(atoms[0].weight, m.total_mass());
            }
            other => panic!("unexpected {other:?}"),
        }
        let improper = prior.with_beta(Beta::Improper).unwrap();
        assert!(matches!(
            sample_prior_intensity(&improper, &k, 10, &mut RngStream::new(9, 0).rng()),
            Err(Error::ImproperPrior)
        ));
    }

    #[test]
    fn stick_weights() {
        let theta = TAU;
        let mut rng = RngStream::new(10, 0).rng();
        let reps = 100_000;
        let mut first = 0.0;
        for _ in 0..reps {
            let s = stick_breaking(theta, 20, &mut rng).unwrap();
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            first += s[0];
        }
        // E[Beta(1, θ)] = 1/(1 + θ); sd ≤ 1/(1+θ)
        let target = 1.0 / (1.0 + theta);
        assert!((first / reps as f64 - target).abs() < 3.0 * target / (reps as f64).sqrt());
    }
}
