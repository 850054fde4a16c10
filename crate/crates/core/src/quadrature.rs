//! Composite trapezoid rules on windows and Gauss–Legendre nodes.
//!
//! Integrands here are smooth, and on the circle they are periodic, where the
//! trapezoid rule converges geometrically. The default resolution is 4096
//! cells with a Richardson-style comparison against 8192 cells.

use crate::window::Window;

/// Default number of trapezoid cells.
pub const DEFAULT_CELLS: usize = 4096;

/// Composite trapezoid rule with a fixed number of cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    pub cells: usize,
}

impl Default for Trapezoid {
    fn default() -> Self {
        Trapezoid {
            cells: DEFAULT_CELLS,
        }
    }
}

/// An integral together with the change observed when the grid is refined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckedIntegral {
    pub value: f64,
    pub refined: f64,
}

impl CheckedIntegral {
    /// `|refined - value|`, scaled by `max(1, |refined|)`.
    pub fn residual(&self) -> f64 {
        (self.refined - self.value).abs() / self.refined.abs().max(1.0)
    }
}

impl Trapezoid {
    pub fn new(cells: usize) -> Self {
        assert!(cells >= 1);
        Trapezoid { cells }
    }

    /// Quadrature weights matching [`Window::grid`] with the same cell count.
    pub fn weights(&self, window: &Window) -> Vec<f64> {
        let h = window.length() / self.cells as f64;
        match window {
            Window::Circle => vec![h; self.cells],
            Window::Interval { .. } => {
                let mut w = vec![h; self.cells + 1];
                w[0] = 0.5 * h;
                w[self.cells] = 0.5 * h;
                w
            }
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, window: &Window, f: F) -> f64 {
        let nodes = window.grid(self.cells);
        let weights = self.weights(window);
        nodes.iter().zip(&weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Integrates on values already tabulated at [`Window::grid`] nodes.
    pub fn integrate_values(&self, window: &Window, values: &[f64]) -> f64 {
        let weights = self.weights(window);
        assert_eq!(weights.len(), values.len(), "values do not match the grid");
        weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Integral at this resolution and at twice the number of cells.
    pub fn integrate_checked<F: Fn(f64) -> f64>(&self, window: &Window, f: F) -> CheckedIntegral {
        let value = self.integrate(window, &f);
        let refined = Trapezoid::new(2 * self.cells).integrate(window, &f);
        CheckedIntegral { value, refined }
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[lo, hi]`.
pub fn gauss_legendre_on(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| half * v).collect(),
    )
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
