//! The prior family `π_{α,β,γ}`: a Dirichlet process `𝒟i(α)` on the
//! normalized mixing measure `μ̄`, independent of a `Ga(|α| − γ, β)` law on the
//! total mass `w`. Letting `β → ∞` gives the improper prior `π_{α,γ}`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::InverseCdf;
use crate::kernels::KernelSpec;
use crate::quadrature::{Trapezoid, DEFAULT_CELLS};
use crate::window::Window;

/// Scale of the gamma weight prior.
///
/// `Improper` is the `β = ∞` limit and never takes part in arithmetic as a
/// number; formulas that involve `1/β` branch on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Improper,
}

impl Beta {
    pub fn finite(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 {
            Ok(Beta::Finite(beta))
        } else {
            Err(Error::param("beta", format!("must be finite and > 0, got {beta}")))
        }
    }

    pub fn is_improper(&self) -> bool {
        matches!(self, Beta::Improper)
    }

    /// `s + 1/β`, the posterior rate of the weight after exposure `s`.
    pub fn posterior_rate(&self, s: f64) -> f64 {
        match *self {
            Beta::Finite(b) => s + 1.0 / b,
            Beta::Improper => s,
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Improper => write!(f, "improper"),
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(b) => s.serialize_f64(*b),
            Beta::Improper => s.serialize_str("improper"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(b) => Beta::finite(b).map_err(de::Error::custom),
            Repr::Text(t) if t == "improper" || t == "inf" || t == "infinity" => Ok(Beta::Improper),
            Repr::Text(t) => t
                .parse::<f64>()
                .map_err(de::Error::custom)
                .and_then(|b| Beta::finite(b).map_err(de::Error::custom)),
        }
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum BaseDensity {
    Uniform(f64),
    Function { f: DensityFn, sampler: Arc<InverseCdf>, sup: f64 },
}

/// The base measure `α(du) = α(u) du` of the Dirichlet process.
#[derive(Clone)]
pub struct BaseMeasure {
    window: Window,
    density: BaseDensity,
    mass: f64,
    // ᾱ at the default quadrature nodes, for ∫ k(y, u) ᾱ(du)
    quad_nodes: Arc<Vec<(f64, f64)>>,
}

impl fmt::Debug for BaseMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("BaseMeasure");
        d.field("window", &self.window).field("mass", &self.mass);
        if let BaseDensity::Uniform(c) = self.density {
            d.field("uniform_density", &c);
        }
        d.finish_non_exhaustive()
    }
}

impl BaseMeasure {
    /// Constant density `c` on the window, `|α| = c · |U|`.
    pub fn uniform(window: Window, density: f64) -> Result<Self> {
        if !(density.is_finite() && density > 0.0) {
            return Err(Error::param("base density", format!("must be positive, got {density}")));
        }
        let mass = density * window.length();
        Ok(Self::build(window, BaseDensity::Uniform(density), mass))
    }

    /// Arbitrary density; it must be strictly positive on the window.
    /// `|α|` is computed by quadrature.
    pub fn from_fn<F>(window: Window, density: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let q = Trapezoid::default();
        let nodes = window.grid(q.cells);
        let mut sup: f64 = 0.0;
        for &u in &nodes {
            let v = density(u);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    "base density",
                    format!("must be strictly positive on the window, got {v} at u = {u}"),
                ));
            }
            sup = sup.max(v);
        }
        let mass = q.integrate(&window, &density);
        let sampler = Arc::new(InverseCdf::new(window, DEFAULT_CELLS, &density));
        let f: DensityFn = Arc::new(density);
        Ok(Self::build(
            window,
            BaseDensity::Function {
                f,
                sampler,
                sup: sup * 1.001,
            },
            mass,
        ))
    }

    fn build(window: Window, density: BaseDensity, mass: f64) -> Self {
        let q = Trapezoid::default();
        let weights = q.weights(&window);
        let eval = |u: f64| match &density {
            BaseDensity::Uniform(c) => *c,
            BaseDensity::Function { f, .. } => f(u),
        };
        let quad_nodes = window
            .grid(q.cells)
            .into_iter()
            .zip(weights)
            .map(|(u, w)| (u, w * eval(u) / mass))
            .collect();
        BaseMeasure {
            window,
            density,
            mass,
            quad_nodes: Arc::new(quad_nodes),
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// `|α|`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Constant density value, if the base is uniform.
    pub fn uniform_density(&self) -> Option<f64> {
        match self.density {
            BaseDensity::Uniform(c) => Some(c),
            BaseDensity::Function { .. } => None,
        }
    }

    /// `α(u)`.
    pub fn density(&self, u: f64) -> f64 {
        if !self.window.contains(u) {
            return 0.0;
        }
        match &self.density {
            BaseDensity::Uniform(c) => *c,
            BaseDensity::Function { f, .. } => f(u),
        }
    }

    /// `ln ᾱ(u)`, `-∞` outside the window.
    pub fn log_normalized(&self, u: f64) -> f64 {
        (self.density(u) / self.mass).ln()
    }

    /// Draw from `ᾱ = α / |α|`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.density {
            BaseDensity::Uniform(_) => match self.window {
                Window::Circle => self.window.wrap(rng.gen_range(0.0..std::f64::consts::TAU)),
                Window::Interval { a, b } => rng.gen_range(a..=b),
            },
            BaseDensity::Function { sampler, .. } => sampler.sample(rng),
        }
    }

    /// `∫ k(y, u) ᾱ(du)`, the density of a fresh draw `y ~ k(·, u)`, `u ~ ᾱ`.
    ///
    /// Exact for a uniform base on the circle (`1/2π`), default trapezoid
    /// quadrature otherwise.
    pub fn kernel_integral(&self, kernel: &KernelSpec, y: f64) -> f64 {
        if self.window.is_circle() && self.uniform_density().is_some() {
            return 1.0 / std::f64::consts::TAU;
        }
        self.quad_nodes
            .iter()
            .map(|&(u, w)| w * kernel.eval(y, u))
            .sum()
    }

    /// Draw `u` from the density proportional to `k(y, u) α(u)` on the window.
    pub fn sample_given_point<R: Rng + ?Sized>(&self, kernel: &KernelSpec, y: f64, rng: &mut R) -> f64 {
        // k(y, ·) is itself a density in u for both kernels (they are symmetric),
        // so propose from it and correct for α by rejection.
        let sup = match &self.density {
            BaseDensity::Uniform(c) => *c,
            BaseDensity::Function { sup, .. } => *sup,
        };
        for _ in 0..10_000 {
            let u = kernel.sample_around(y, rng);
            if !self.window.contains(u) {
                continue;
            }
            match self.density {
                BaseDensity::Uniform(_) => return u,
                BaseDensity::Function { .. } => {
                    if rng.gen::<f64>() * sup <= self.density(u) {
                        return u;
                    }
                }
            }
        }
        // y far outside the bulk of α: fall back to the tabulated product density
        InverseCdf::new(self.window, DEFAULT_CELLS, |u| kernel.eval(y, u) * self.density(u)).sample(rng)
    }
}

/// `π_{α,β,γ}`.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    base: BaseMeasure,
    beta: Beta,
    gamma: f64,
}

impl PriorSpec {
    /// Fails unless `γ < |α|`.
    pub fn new(base: BaseMeasure, beta: Beta, gamma: f64) -> Result<Self> {
        if let Beta::Finite(b) = beta {
            Beta::finite(b)?;
        }
        if !gamma.is_finite() || base.mass() - gamma <= 0.0 {
            return Err(Error::param(
                "gamma",
                format!("need gamma < |alpha| = {}, got {gamma}", base.mass()),
            ));
        }
        Ok(PriorSpec { base, beta, gamma })
    }

    /// Uniform base density `c` on the window with improper `β`.
    pub fn improper_uniform(window: Window, density: f64, gamma: f64) -> Result<Self> {
        Self::new(BaseMeasure::uniform(window, density)?, Beta::Improper, gamma)
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.base
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `|α|`.
    pub fn abs_alpha(&self) -> f64 {
        self.base.mass()
    }

    /// `|α| − γ`, the shape of the gamma law on `w`.
    pub fn weight_shape(&self) -> f64 {
        self.base.mass() - self.gamma
    }

    /// `γ̃ = |α| − 1`.
    pub fn shrinkage_gamma(&self) -> f64 {
        self.base.mass() - 1.0
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.base.clone(), self.beta, gamma)
    }

    pub fn with_beta(&self, beta: Beta) -> Result<Self> {
        Self::new(self.base.clone(), beta, self.gamma)
    }
}

/// Serializable summary of a prior, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSummary {
    pub abs_alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub uniform_density: Option<f64>,
    pub beta: Beta,
    pub gamma: f64,
}

impl From<&PriorSpec> for PriorSummary {
    fn from(p: &PriorSpec) -> Self {
        PriorSummary {
            abs_alpha: p.abs_alpha(),
            uniform_density: p.base().uniform_density(),
            beta: p.beta(),
            gamma: p.gamma(),
        }
    }
}

/// Exposures: `s` for the observed pattern, `t` for the predicted one, and a
/// generic `τ` used by risk integrands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub s: f64,
    pub t: f64,
    pub tau: f64,
}

impl ObservationSpec {
    pub fn new(s: f64, t: f64, tau: f64) -> Result<Self> {
        for (name, v) in [("s", s), ("t", t), ("tau", tau)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("exposure must be positive, got {v}")));
            }
        }
        Ok(ObservationSpec { s, t, tau })
    }
}
