//! Smoothing kernels `k(y, u)` and kernel mixtures `Σ m_j k(y, u_j)`.
//!
//! Two kernels are provided: the von Mises kernel on the circle
//!
//! ```text
//! k(y, u) = exp{κ cos(y − u)} / (2π I₀(κ))
//! ```
//!
//! and the Gaussian kernel with known bandwidth σ, which is a density on the
//! whole real line. On a bounded interval the Gaussian kernel is *not*
//! renormalized, so part of its mass leaks outside the window; intensity
//! diagnostics report that leakage rather than hiding it.

mod bessel;
mod fourier;

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use bessel::{bessel_i0, bessel_i0_scaled, bessel_ratios, ln_bessel_i0};
pub use fourier::VonMisesSeries;

use crate::error::{Error, Result};
use crate::window::Window;

/// Shape parameters of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    VonMises { kappa: f64 },
    Gaussian { sigma: f64 },
}

/// A kernel bound to the window it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct KernelSpec {
    kind: KernelKind,
    window: Window,
    // log normalizing constant, cached
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    #[serde(flatten)]
    kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<Window>,
}

impl TryFrom<KernelRepr> for KernelSpec {
    type Error = Error;

    fn try_from(repr: KernelRepr) -> Result<Self> {
        let window = match (repr.kind, repr.window) {
            (_, Some(w)) => w,
            (KernelKind::VonMises { .. }, None) => Window::Circle,
            (KernelKind::Gaussian { .. }, None) => {
                return Err(Error::DomainMismatch(
                    "a Gaussian kernel needs an explicit interval window".into(),
                ))
            }
        };
        KernelSpec::new(repr.kind, window)
    }
}

impl From<KernelSpec> for KernelRepr {
    fn from(spec: KernelSpec) -> Self {
        let window = match spec.kind {
            KernelKind::VonMises { .. } => None,
            KernelKind::Gaussian { .. } => Some(spec.window),
        };
        KernelRepr {
            kind: spec.kind,
            window,
        }
    }
}

impl KernelSpec {
    pub fn new(kind: KernelKind, window: Window) -> Result<Self> {
        let log_norm = match kind {
            KernelKind::VonMises { kappa } => {
                if !window.is_circle() {
                    return Err(Error::DomainMismatch(format!(
                        "the von Mises kernel lives on the circle, not on {window}"
                    )));
                }
                if !(kappa.is_finite() && kappa >= 0.0) {
                    return Err(Error::param("kappa", format!("must be finite and >= 0, got {kappa}")));
                }
                TAU.ln() + ln_bessel_i0(kappa)
            }
            KernelKind::Gaussian { sigma } => {
                if window.is_circle() {
                    return Err(Error::DomainMismatch(
                        "the Gaussian kernel is a kernel on the real line; use an interval window".into(),
                    ));
                }
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::param("sigma", format!("must be finite and > 0, got {sigma}")));
                }
                0.5 * (TAU * sigma * sigma).ln()
            }
        };
        Ok(KernelSpec {
            kind,
            window,
            log_norm,
        })
    }

    /// Von Mises kernel on `[0, 2π)`. `κ = 0` is the uniform density.
    pub fn von_mises(kappa: f64) -> Result<Self> {
        Self::new(KernelKind::VonMises { kappa }, Window::Circle)
    }

    pub fn gaussian(sigma: f64, window: Window) -> Result<Self> {
        Self::new(KernelKind::Gaussian { sigma }, window)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// `ln k(y, u)`.
    #[inline]
    pub fn log_eval(&self, y: f64, u: f64) -> f64 {
        let d = (y - u).abs();
        match self.kind {
            KernelKind::VonMises { kappa } => kappa * d.cos() - self.log_norm,
            KernelKind::Gaussian { sigma } => -0.5 * (d / sigma) * (d / sigma) - self.log_norm,
        }
    }

    /// `k(y, u)`. Symmetric in its arguments, bit for bit.
    #[inline]
    pub fn eval(&self, y: f64, u: f64) -> f64 {
        let d = (y - u).abs();
        match self.kind {
            // exp(κ(cos d − 1)) / (2π e^{-κ} I₀(κ)) keeps large κ finite
            KernelKind::VonMises { kappa } => {
                if kappa == 0.0 {
                    1.0 / TAU
                } else {
                    (kappa * (d.cos() - 1.0) - self.log_norm + kappa).exp()
                }
            }
            KernelKind::Gaussian { sigma } => {
                let z = d / sigma;
                (-0.5 * z * z - self.log_norm).exp()
            }
        }
    }

    /// Draws `y` from the density `k(·, u)`.
    ///
    /// Gaussian draws are on the whole real line and may fall outside the window.
    pub fn sample_around<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> f64 {
        match self.kind {
            KernelKind::VonMises { kappa } => {
                Window::Circle.wrap(u + sample_von_mises_offset(kappa, rng))
            }
            KernelKind::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                u + sigma * z
            }
        }
    }
}

/// A point mass `weight · δ_location` of a discrete measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: f64, weight: f64) -> Self {
        Atom { location, weight }
    }
}

/// `Σ_j m_j k(y, u_j)`.
pub fn mixture_density(kernel: &KernelSpec, atoms: &[Atom], y: f64) -> f64 {
    atoms
        .iter()
        .map(|a| a.weight * kernel.eval(y, a.location))
        .sum()
}

/// Angular offset from a von Mises(0, κ) distribution, Best & Fisher (1979).
fn sample_von_mises_offset<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return rng.gen_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if rng.gen::<bool>() { theta } else { -theta };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Trapezoid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Σ (κ/2)^{2m} / (m!)², each term formed in log space
    fn i0_series_oracle(k: f64, terms: usize) -> f64 {
        use statrs::function::gamma::ln_gamma;
        (0..terms)
            .map(|m| {
                let m = m as f64;
                if m == 0.0 {
                    1.0
                } else {
                    (2.0 * m * (k / 2.0).ln() - 2.0 * ln_gamma(m + 1.0)).exp()
                }
            })
            .sum()
    }

    #[test]
    fn i0_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        // frozen from the 40-term power series
        let i0_1 = i0_series_oracle(1.0, 40);
        let i0_5 = i0_series_oracle(5.0, 40);
        assert!((i0_1 - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((i0_5 - 27.239_871_823_604_45).abs() < 1e-11);
        assert!(((bessel_i0(1.0) - i0_1) / i0_1).abs() < 1e-12);
        assert!(((bessel_i0(5.0) - i0_5) / i0_5).abs() < 1e-12);
        for k in [0.1, 2.5, 12.0, 19.9, 20.1, 35.0, 60.0] {
            let oracle = i0_series_oracle(k, 200);
            assert!(((bessel_i0(k) - oracle) / oracle).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn von_mises_values() {
        let k0 = KernelSpec::von_mises(0.0).unwrap();
        assert!((k0.eval(1.0, 4.0) - 0.159_154_943_091_895_35).abs() < 1e-15);
        let k5 = KernelSpec::von_mises(5.0).unwrap();
        let expected = 5f64.exp() / (TAU * i0_series_oracle(5.0, 40));
        assert!(((k5.eval(2.0, 2.0) - expected) / expected).abs() < 1e-13);
        assert!((k5.log_eval(1.0, 2.5) - k5.eval(1.0, 2.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mode() {
        let g = KernelSpec::gaussian(1.0, Window::interval(-5.0, 5.0).unwrap()).unwrap();
        assert!((g.eval(0.3, 0.3) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn domain_mismatch_is_a_construction_error() {
        let iv = Window::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            KernelSpec::new(KernelKind::VonMises { kappa: 1.0 }, iv),
            Err(Error::DomainMismatch(_))
        ));
        assert!(matches!(
            KernelSpec::gaussian(1.0, Window::Circle),
            Err(Error::DomainMismatch(_))
        ));
        assert!(KernelSpec::von_mises(-1.0).is_err());
        assert!(KernelSpec::gaussian(0.0, iv).is_err());
    }

    #[test]
    fn json_shape() {
        let k = KernelSpec::von_mises(5.0).unwrap();
        assert_eq!(serde_json::to_string(&k).unwrap(), r#"{"kind":"von_mises","kappa":5.0}"#);
        let back: KernelSpec = serde_json::from_str(r#"{"kind":"von_mises","kappa":5.0}"#).unwrap();
        assert_eq!(back, k);
        let g: KernelSpec = serde_json::from_str(
            r#"{"kind":"gaussian","sigma":0.5,"window":{"kind":"interval","a":0.0,"b":1.0}}"#,
        )
        .unwrap();
        assert_eq!(g.kind(), KernelKind::Gaussian { sigma: 0.5 });
        assert!(serde_json::from_str::<KernelSpec>(r#"{"kind":"gaussian","sigma":0.5}"#).is_err());
    }

    #[test]
    fn normalization_over_random_centres() {
        let q = Trapezoid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kappa in [0.5, 5.0, 40.0] {
            let k = KernelSpec::von_mises(kappa).unwrap();
            for _ in 0..100 {
                let u = rng.gen_range(0.0..TAU);
                let total = q.integrate(&Window::Circle, |y| k.eval(y, u));
                assert!((total - 1.0).abs() < 1e-8, "kappa {kappa}: {total}");
            }
        }
    }

    #[test]
    fn mixture_examples() {
        let k = KernelSpec::von_mises(5.0).unwrap();
        assert_eq!(mixture_density(&k, &[Atom::new(1.0, 1.0)], 2.0), k.eval(2.0, 1.0));

        let anti = [Atom::new(0.0, 1.0), Atom::new(PI, 1.0)];
        let a = mixture_density(&k, &anti, PI / 2.0);
        let b = mixture_density(&k, &anti, 3.0 * PI / 2.0);
        assert!((a - b).abs() < 1e-15);

        let atoms = [Atom::new(0.5, 1.0), Atom::new(2.0, 2.0), Atom::new(4.0, 3.0)];
        for y in [0.0, 1.3, 5.9] {
            let direct = 1.0 * k.eval(y, 0.5) + 2.0 * k.eval(y, 2.0) + 3.0 * k.eval(y, 4.0);
            assert!((mixture_density(&k, &atoms, y) - direct).abs() < 1e-14);
        }
        let total = Trapezoid::default().integrate(&Window::Circle, |y| mixture_density(&k, &atoms, y));
        assert!((total - 6.0).abs() < 1e-8);
    }

    #[test]
    fn von_mises_sampler_moments() {
        // E[cos(θ − μ)] = I₁(κ)/I₀(κ)
        let kappa = 5.0;
        let k = KernelSpec::von_mises(kappa).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mu = 1.0;
        let (mut c, mut s) = (0.0, 0.0);
        for _ in 0..n {
            let y = k.sample_around(mu, &mut rng);
            assert!(Window::Circle.contains(y));
            c += (y - mu).cos();
            s += (y - mu).sin();
        }
        let r1 = bessel_ratios(kappa, 1e-18, 4)[0];
        // sd of cos(θ − μ) is below 0.2 at κ = 5
        assert!((c / n as f64 - r1).abs() < 3.0 * 0.2 / (n as f64).sqrt());
        assert!((s / n as f64).abs() < 3.0 * 0.5 / (n as f64).sqrt());
    }

    proptest! {
        #[test]
        fn kernels_are_symmetric_and_positive(y in 0.0..TAU, u in 0.0..TAU, kappa in 0.0..50.0f64, sigma in 0.05..3.0f64) {
            let vm = KernelSpec::von_mises(kappa).unwrap();
            prop_assert_eq!(vm.eval(y, u), vm.eval(u, y));
            prop_assert!(vm.eval(y, u) > 0.0);
            let g = KernelSpec::gaussian(sigma, Window::interval(0.0, TAU).unwrap()).unwrap();
            prop_assert_eq!(g.eval(y, u), g.eval(u, y));
            // positive wherever f64 can represent it
            prop_assert!(g.log_eval(y, u).is_finite());
            prop_assert!(g.log_eval(y, u) < -700.0 || g.eval(y, u) > 0.0);
        }
    }
}
