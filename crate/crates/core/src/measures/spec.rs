//! JSON description of a measure.
//!
//! Accepted shapes:
//!
//! ```json
//! {"points": [-1, 1], "weights": [0.5, 0.5]}
//! {"points": [-1, 0, 1], "cells": [0.5, 0.5]}
//! {"points": [-1, 0, 1], "atoms": [0, 0.2, 0], "cells": [0.4, 0.4]}
//! {"uniform": [-1, 1], "grid_size": 1000}
//! {"normal": [0, 1], "grid_size": 1000, "tail": 1e-6}
//! {"lognormal": [0, 0.04]}
//! ```

use serde::{Deserialize, Serialize};

use super::measure::{Measure, MeasureKind};
use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lognormal: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
}

impl MeasureSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidMeasure(format!("measure JSON: {e}")))
    }

    /// Build the measure; `default_grid` applies to parametric laws without
    /// an explicit `grid_size`.
    pub fn build(&self, default_grid: usize) -> Result<Measure> {
        let n = self.grid_size.unwrap_or(default_grid);
        let tail = self.tail.unwrap_or(DEFAULT_TAIL);
        let parametric = [self.uniform, self.normal, self.lognormal].iter().filter(|p| p.is_some()).count();
        if parametric > 1 || (parametric == 1 && self.points.is_some()) {
            return Err(Error::InvalidMeasure("give exactly one of points, uniform, normal, lognormal".into()));
        }
        if let Some([a, b]) = self.uniform {
            return Measure::uniform(a, b, n);
        }
        if let Some([m, s2]) = self.normal {
            return Measure::normal(m, s2, n, tail);
        }
        if let Some([m, s2]) = self.lognormal {
            return Measure::lognormal(m, s2, n, tail);
        }
        let Some(points) = self.points.clone() else {
            return Err(Error::InvalidMeasure("no points and no parametric law".into()));
        };
        let k = points.len();
        match (&self.weights, &self.atoms, &self.cells) {
            (Some(w), None, None) => Measure::atomic(points, w.clone()),
            (None, a, Some(c)) => {
                Measure::new(points, a.clone().unwrap_or_else(|| vec![0.0; k]), c.clone())
            }
            (None, Some(a), None) => Measure::atomic(points, a.clone()),
            _ => Err(Error::InvalidMeasure(
                "use either `weights` or `atoms`/`cells` alongside `points`".into(),
            )),
        }
    }

    /// Lossless description of an existing measure.
    pub fn from_measure(m: &Measure) -> Self {
        let mut s = MeasureSpec { points: Some(m.points().to_vec()), ..Default::default() };
        match m.kind() {
            MeasureKind::AtomicGrid => s.weights = Some(m.atoms().to_vec()),
            MeasureKind::DensitySampled => s.cells = Some(m.cells().to_vec()),
            MeasureKind::Mixed => {
                s.atoms = Some(m.atoms().to_vec());
                s.cells = Some(m.cells().to_vec());
            }
        }
        s
    }
}

/// Parse and build in one step.
pub fn measure_from_json(text: &str, default_grid: usize) -> Result<Measure> {
    MeasureSpec::parse(text)?.build(default_grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_shapes_parse() {
        let a = measure_from_json(r#"{"points":[-1,1],"weights":[0.5,0.5]}"#, 10).unwrap();
        assert_eq!(a.kind(), MeasureKind::AtomicGrid);
        let u = measure_from_json(r#"{"uniform":[-1,1],"grid_size":4}"#, 10).unwrap();
        assert_eq!(u.len(), 5);
        let n = measure_from_json(r#"{"normal":[0,1]}"#, 50).unwrap();
        assert_eq!(n.len(), 51);
        let m = measure_from_json(r#"{"points":[0,1],"atoms":[0.5,0],"cells":[0.5]}"#, 10).unwrap();
        assert_eq!(m.kind(), MeasureKind::Mixed);
    }

    #[test]
    fn round_trip() {
        let m = Measure::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.0, 0.2], vec![0.3, 0.4]).unwrap();
        let text = serde_json::to_string(&MeasureSpec::from_measure(&m)).unwrap();
        assert_eq!(measure_from_json(&text, 10).unwrap(), m);
    }

    #[test]
    fn rejects_ambiguous() {
        assert!(measure_from_json(r#"{"uniform":[0,1],"normal":[0,1]}"#, 10).is_err());
        assert!(measure_from_json(r#"{"points":[0,1]}"#, 10).is_err());
        assert!(measure_from_json(r#"{"bogus":1}"#, 10).is_err());
    }
}
