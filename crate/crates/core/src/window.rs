//! One-dimensional observation windows.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The region `U` on which a point process lives.
///
/// The circle is fixed to `[0, 2π)` and all arithmetic on it wraps modulo 2π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "WindowRepr")]
pub enum Window {
    Circle,
    Interval { a: f64, b: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum WindowRepr {
    Circle,
    Interval { a: f64, b: f64 },
}

impl TryFrom<WindowRepr> for Window {
    type Error = Error;

    fn try_from(repr: WindowRepr) -> Result<Self> {
        match repr {
            WindowRepr::Circle => Ok(Window::Circle),
            WindowRepr::Interval { a, b } => Window::interval(a, b),
        }
    }
}

impl Window {
    pub fn circle() -> Self {
        Window::Circle
    }

    /// Interval `[a, b]`; fails unless `a < b` and both ends are finite.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidWindow(format!(
                "interval bounds must be finite, got [{a}, {b}]"
            )));
        }
        if a >= b {
            return Err(Error::InvalidWindow(format!(
                "interval must have positive length, got [{a}, {b}]"
            )));
        }
        Ok(Window::Interval { a, b })
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, Window::Circle)
    }

    /// Lebesgue measure of the window.
    pub fn length(&self) -> f64 {
        match *self {
            Window::Circle => TAU,
            Window::Interval { a, b } => b - a,
        }
    }

    /// Lower end of the window (`0` for the circle).
    pub fn start(&self) -> f64 {
        match *self {
            Window::Circle => 0.0,
            Window::Interval { a, .. } => a,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Window::Circle => (0.0..TAU).contains(&x),
            Window::Interval { a, b } => x >= a && x <= b,
        }
    }

    /// Map `x` into the window: modulo 2π on the circle, identity on an interval.
    pub fn wrap(&self, x: f64) -> f64 {
        match self {
            Window::Circle => {
                let r = x.rem_euclid(TAU);
                // rem_euclid can round up to exactly TAU for tiny negative x
                if r >= TAU {
                    0.0
                } else {
                    r
                }
            }
            Window::Interval { .. } => x,
        }
    }

    /// Evenly spaced grid with `cells` cells.
    ///
    /// On the circle the grid is periodic (`cells` nodes, the endpoint 2π is
    /// the same point as 0). On an interval both endpoints are included, giving
    /// `cells + 1` nodes.
    pub fn grid(&self, cells: usize) -> Vec<f64> {
        assert!(cells >= 1, "grid needs at least one cell");
        match *self {
            Window::Circle => {
                let h = TAU / cells as f64;
                (0..cells).map(|i| i as f64 * h).collect()
            }
            Window::Interval { a, b } => {
                let h = (b - a) / cells as f64;
                (0..=cells)
                    .map(|i| if i == cells { b } else { a + i as f64 * h })
                    .collect()
            }
        }
    }

    pub(crate) fn check_point(&self, x: f64) -> Result<()> {
        if x.is_finite() && self.contains(x) {
            Ok(())
        } else {
            Err(Error::PointOutsideWindow {
                point: x,
                window: self.to_string(),
            })
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Circle => write!(f, "circle [0, 2π)"),
            Window::Interval { a, b } => write!(f, "interval [{a}, {b}]"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_needs_positive_length() {
        assert!(Window::interval(1.0, 1.0).is_err());
        assert!(Window::interval(2.0, 1.0).is_err());
        assert!(Window::interval(0.0, f64::INFINITY).is_err());
        assert_eq!(Window::interval(0.0, 3.0).unwrap().length(), 3.0);
    }

    #[test]
    fn circle_wraps() {
        let w = Window::circle();
        assert!((w.wrap(TAU + 0.5) - 0.5).abs() < 1e-15);
        assert!((w.wrap(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert_eq!(w.wrap(-1e-300), 0.0);
        assert!(!w.contains(TAU));
        assert!(w.contains(0.0));
    }

    #[test]
    fn grids() {
        let c = Window::circle().grid(4);
        assert_eq!(c.len(), 4);
        assert!((c[1] - TAU / 4.0).abs() < 1e-15);
        let i = Window::interval(0.0, 1.0).unwrap().grid(4);
        assert_eq!(i, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn json_validates_on_read() {
        let w: Window = serde_json::from_str(r#"{"kind":"interval","a":0,"b":2}"#).unwrap();
        assert_eq!(w, Window::Interval { a: 0.0, b: 2.0 });
        assert!(serde_json::from_str::<Window>(r#"{"kind":"interval","a":1,"b":1}"#).is_err());
        let c: Window = serde_json::from_str(r#"{"kind":"circle"}"#).unwrap();
        assert!(c.is_circle());
    }
}
