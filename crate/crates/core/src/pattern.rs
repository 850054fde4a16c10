//! Observed point patterns and their CSV/JSON forms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::window::Window;

/// A realization `(N, x₁, …, x_N)` of a point process on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatternRepr")]
pub struct PointPattern {
    window: Window,
    points: Vec<f64>,
}

#[derive(Deserialize)]
struct PatternRepr {
    window: Window,
    points: Vec<f64>,
}

impl TryFrom<PatternRepr> for PointPattern {
    type Error = Error;

    fn try_from(repr: PatternRepr) -> Result<Self> {
        PointPattern::new(repr.window, repr.points)
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    location: f64,
}

impl PointPattern {
    /// Fails if any point lies outside the window.
    pub fn new(window: Window, points: Vec<f64>) -> Result<Self> {
        for &p in &points {
            window.check_point(p)?;
        }
        Ok(PointPattern { window, points })
    }

    pub fn empty(window: Window) -> Self {
        PointPattern {
            window,
            points: Vec::new(),
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `N`.
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads a single-column CSV with header `location`.
    pub fn read_csv<R: Read>(window: Window, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            points.push(row?.location);
        }
        PointPattern::new(window, points)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if self.points.is_empty() {
            wtr.write_record(["location"])?;
        }
        for &location in &self.points {
            wtr.serialize(CsvRow { location })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
