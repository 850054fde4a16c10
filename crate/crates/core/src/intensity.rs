//! Intensity functions `λ(u)` identified with their total mass `w = ∫λ` and
//! normalized shape `λ̄ = λ / w`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernels::{mixture_density, Atom, KernelSpec};
use crate::quadrature::Trapezoid;
use crate::window::Window;

/// Relative tolerance for the quadrature mass check.
pub const MASS_TOLERANCE: f64 = 1e-6;

pub type IntensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum IntensityKind {
    /// Arbitrary evaluator, optionally named (`"sine2"`, `"const:2"`, …).
    ClosedForm { name: Option<String>, f: IntensityFn },
    /// `Σ_j m_j k(·, u_j)`.
    KernelMixture { kernel: KernelSpec, atoms: Vec<Atom> },
    /// Grid values with linear interpolation, as produced by posterior estimates.
    Tabulated(GridFunction),
}

impl fmt::Debug for IntensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensityKind::ClosedForm { name, .. } => f
                .debug_struct("ClosedForm")
                .field("name", name)
                .finish_non_exhaustive(),
            IntensityKind::KernelMixture { kernel, atoms } => f
                .debug_struct("KernelMixture")
                .field("kernel", kernel)
                .field("atoms", &atoms.len())
                .finish(),
            IntensityKind::Tabulated(g) => f.debug_tuple("Tabulated").field(&g.cells()).finish(),
        }
    }
}

/// An evaluable intensity on a window.
#[derive(Debug, Clone)]
pub struct IntensityModel {
    window: Window,
    kind: IntensityKind,
    total_mass: f64,
    analytic_mass: bool,
}

impl IntensityModel {
    /// Closed-form intensity. Without an analytic mass the total is computed by
    /// the default trapezoid rule.
    pub fn closed_form<F>(window: Window, name: Option<String>, f: F, analytic_mass: Option<f64>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let f: IntensityFn = Arc::new(f);
        let (total_mass, analytic) = match analytic_mass {
            Some(m) => (m, true),
            None => (Trapezoid::default().integrate(&window, |u| f(u)), false),
        };
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::param("total_mass", format!("must be positive and finite, got {total_mass}")));
        }
        Ok(IntensityModel {
            window,
            kind: IntensityKind::ClosedForm { name, f },
            total_mass,
            analytic_mass: analytic,
        })
    }

    /// `λ(u) = c` on the window.
    pub fn constant(window: Window, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::param("c", format!("constant intensity must be positive, got {c}")));
        }
        Self::closed_form(window, Some(format!("const:{c}")), move |_| c, Some(c * window.length()))
    }

    /// `λ(u) = sin(u) + 2` on the circle, total mass 4π.
    pub fn sine2() -> Self {
        Self::closed_form(
            Window::Circle,
            Some("sine2".to_string()),
            |u: f64| u.sin() + 2.0,
            Some(4.0 * std::f64::consts::PI),
        )
        .expect("sine2 is a valid intensity")
    }

    /// Kernel mixture; `w = Σ m_j` because every kernel integrates to one.
    pub fn mixture(kernel: KernelSpec, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::param("atoms", "a mixture needs at least one atom"));
        }
        let window = kernel.window();
        for a in &atoms {
            window.check_point(a.location)?;
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(Error::param("atoms", format!("weights must be positive, got {}", a.weight)));
            }
        }
        let total_mass = atoms.iter().map(|a| a.weight).sum();
        Ok(IntensityModel {
            window,
            kind: IntensityKind::KernelMixture { kernel, atoms },
            total_mass,
            analytic_mass: true,
        })
    }

    /// Tabulated intensity; the mass is the grid trapezoid integral.
    pub fn tabulated(grid: GridFunction) -> Result<Self> {
        let total_mass = grid.integral();
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::param("grid", format!("integral must be positive, got {total_mass}")));
        }
        Ok(IntensityModel {
            window: grid.window(),
            kind: IntensityKind::Tabulated(grid),
            total_mass,
            analytic_mass: true,
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn kind(&self) -> &IntensityKind {
        &self.kind
    }

    pub fn name(&self) -> Option<&str> {
        match &self.kind {
            IntensityKind::ClosedForm { name, .. } => name.as_deref(),
            _ => None,
        }
    }

    /// `w = ∫_U λ(u) du`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `λ(u)`.
    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            IntensityKind::ClosedForm { f, .. } => f(u),
            IntensityKind::KernelMixture { kernel, atoms } => mixture_density(kernel, atoms, u),
            IntensityKind::Tabulated(g) => g.eval(u),
        }
    }

    /// `λ̄(u) = λ(u) / w`.
    pub fn normalized(&self, u: f64) -> f64 {
        self.eval(u) / self.total_mass
    }

    /// Quadrature diagnostics for the mass and normalization invariants.
    pub fn validate(&self) -> Diagnostics {
        let q = Trapezoid::default();
        let checked = q.integrate_checked(&self.window, |u| self.eval(u));
        let mass_residual = (checked.value - self.total_mass).abs() / self.total_mass;
        let normalization = checked.value / self.total_mass;
        let nonpositive: Vec<f64> = self
            .window
            .grid(q.cells)
            .into_iter()
            .filter(|&u| !(self.eval(u) > 0.0))
            .collect();

        let mut failures = Vec::new();
        if mass_residual > MASS_TOLERANCE {
            failures.push(format!(
                "stated mass {} differs from quadrature mass {} (relative {mass_residual:.3e})",
                self.total_mass, checked.value
            ));
        }
        if (normalization - 1.0).abs() > MASS_TOLERANCE {
            failures.push(format!("normalized intensity integrates to {normalization}"));
        }
        if checked.residual() > MASS_TOLERANCE {
            failures.push(format!(
                "quadrature under-resolved: {} vs {} on the refined grid",
                checked.value, checked.refined
            ));
        }
        if let Some(&u) = nonpositive.first() {
            failures.push(format!(
                "intensity is not strictly positive at {} grid nodes (first at u = {u})",
                nonpositive.len()
            ));
        }
        Diagnostics {
            stated_mass: self.total_mass,
            analytic_mass: self.analytic_mass,
            quadrature_mass: checked.value,
            mass_residual,
            normalization_residual: (normalization - 1.0).abs(),
            refinement_residual: checked.residual(),
            nonpositive_nodes: nonpositive.len(),
            failures,
        }
    }
}

/// Outcome of [`IntensityModel::validate`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Diagnostics {
    pub stated_mass: f64,
    pub analytic_mass: bool,
    pub quadrature_mass: f64,
    pub mass_residual: f64,
    pub normalization_residual: f64,
    pub refinement_residual: f64,
    pub nonpositive_nodes: usize,
    pub failures: Vec<String>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}
