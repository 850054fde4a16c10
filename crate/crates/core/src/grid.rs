//! Functions tabulated on a window grid, and inverse-CDF sampling from them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quadrature::Trapezoid;
use crate::window::Window;

/// Values of a function at the nodes of [`Window::grid`], with linear
/// interpolation between nodes (periodic on the circle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    window: Window,
    cells: usize,
    values: Vec<f64>,
}

impl GridFunction {
    /// Panics if `values` does not have one entry per grid node.
    pub fn new(window: Window, cells: usize, values: Vec<f64>) -> Self {
        assert_eq!(window.grid(cells).len(), values.len(), "values do not match the grid");
        GridFunction {
            window,
            cells,
            values,
        }
    }

    pub fn tabulate<F: Fn(f64) -> f64>(window: Window, cells: usize, f: F) -> Self {
        let values = window.grid(cells).into_iter().map(f).collect();
        GridFunction {
            window,
            cells,
            values,
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.window.grid(self.cells)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same grid, values multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> GridFunction {
        GridFunction {
            window: self.window,
            cells: self.cells,
            values: self.values.iter().map(|v| factor * v).collect(),
        }
    }

    /// Trapezoid integral over the window on the native grid.
    pub fn integral(&self) -> f64 {
        Trapezoid::new(self.cells).integrate_values(&self.window, &self.values)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let h = self.window.length() / self.cells as f64;
        match self.window {
            Window::Circle => {
                let t = self.window.wrap(x) / h;
                let i = (t.floor() as usize).min(self.cells - 1);
                let frac = t - i as f64;
                let j = (i + 1) % self.cells;
                self.values[i] + frac * (self.values[j] - self.values[i])
            }
            Window::Interval { a, .. } => {
                let t = ((x - a) / h).clamp(0.0, self.cells as f64);
                let i = (t.floor() as usize).min(self.cells - 1);
                let frac = t - i as f64;
                self.values[i] + frac * (self.values[i + 1] - self.values[i])
            }
        }
    }
}

/// Inverse-CDF sampler for a nonnegative density tabulated on a grid.
///
/// The CDF is accumulated with the trapezoid rule and inverted by linear
/// interpolation within each cell.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    window: Window,
    cells: usize,
    cumulative: Vec<f64>,
}

impl InverseCdf {
    pub fn new<F: Fn(f64) -> f64>(window: Window, cells: usize, density: F) -> Self {
        let nodes = window.grid(cells);
        let mut values: Vec<f64> = nodes.iter().map(|&x| density(x).max(0.0)).collect();
        if window.is_circle() {
            // close the cycle: the node at 2π is the node at 0
            values.push(values[0]);
        }
        let h = window.length() / cells as f64;
        let mut cumulative = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..cells {
            acc += 0.5 * h * (values[i] + values[i + 1]);
            cumulative.push(acc);
        }
        InverseCdf {
            window,
            cells,
            cumulative,
        }
    }

    /// Total mass seen by the table.
    pub fn total(&self) -> f64 {
        self.cumulative[self.cells]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.gen::<f64>() * self.total();
        // first index with cumulative > target
        let idx = self.cumulative.partition_point(|&c| c <= target);
        let i = idx.clamp(1, self.cells) - 1;
        let lo = self.cumulative[i];
        let hi = self.cumulative[i + 1];
        let frac = if hi > lo { (target - lo) / (hi - lo) } else { 0.5 };
        let h = self.window.length() / self.cells as f64;
        let x = self.window.start() + (i as f64 + frac) * h;
        match self.window {
            Window::Circle => self.window.wrap(x),
            Window::Interval { a, b } => x.clamp(a, b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    #[test]
    fn interpolation_is_periodic_on_circle() {
        let g = GridFunction::tabulate(Window::Circle, 8, |x| x.cos());
        assert!((g.eval(0.0) - 1.0).abs() < 1e-15);
        let last = g.values()[7];
        // halfway between the last node and 2π ≡ 0
        let mid = TAU * 15.0 / 16.0;
        assert!((g.eval(mid) - 0.5 * (last + 1.0)).abs() < 1e-14);
        assert!((g.eval(TAU + 0.1) - g.eval(0.1)).abs() < 1e-15);
    }

    #[test]
    fn interval_interpolation_and_integral() {
        let w = Window::interval(0.0, 2.0).unwrap();
        let g = GridFunction::tabulate(w, 4, |x| 3.0 * x);
        assert!((g.eval(0.75) - 2.25).abs() < 1e-14);
        assert!((g.eval(2.0) - 6.0).abs() < 1e-14);
        assert!((g.integral() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_cdf_matches_density() {
        let w = Window::Circle;
        let inv = InverseCdf::new(w, 4096, |u| u.sin() + 2.0);
        assert!((inv.total() - 2.0 * TAU).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut upper = 0usize;
        for _ in 0..n {
            let x = inv.sample(&mut rng);
            assert!(w.contains(x));
            if x < std::f64::consts::PI {
                upper += 1;
            }
        }
        // P(x < π) = (2π + 2) / 4π
        let p = (TAU + 2.0) / (2.0 * TAU);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((upper as f64 / n as f64 - p).abs() < 4.0 * se);
    }
}
