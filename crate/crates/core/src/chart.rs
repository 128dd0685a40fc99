//! Single-chart surfaces with optionally periodic coordinates.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{GeoError, Result};

/// Closed-open coordinate interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A coordinate chart `(u, v)` covering the whole surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceChart {
    pub name: String,
    pub ranges: [Interval; 2],
    pub periodic: [bool; 2],
}

impl SurfaceChart {
    pub fn new(name: impl Into<String>, ranges: [Interval; 2], periodic: [bool; 2]) -> Result<Self> {
        for (k, r) in ranges.iter().enumerate() {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.hi > r.lo) {
                return Err(GeoError::InvalidInput(format!(
                    "coordinate range {k} is empty or non-finite: [{}, {})",
                    r.lo, r.hi
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            ranges,
            periodic,
        })
    }

    /// `[0, 2π) × [0, 2π)`, both coordinates periodic.
    pub fn standard_torus(name: impl Into<String>) -> Self {
        Self::new(
            name,
            [Interval::new(0.0, TAU), Interval::new(0.0, TAU)],
            [true, true],
        )
        .expect("standard ranges are valid")
    }

    pub fn period(&self, k: usize) -> Option<f64> {
        self.periodic[k].then(|| self.ranges[k].length())
    }

    /// Reduces a point into the chart, wrapping periodic coordinates.
    pub fn wrap(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let mut out = x;
        for k in 0..2 {
            let r = self.ranges[k];
            if !x[k].is_finite() {
                return Err(GeoError::Domain(format!("coordinate {k} is not finite")));
            }
            if self.periodic[k] {
                let len = r.length();
                let mut w = r.lo + (x[k] - r.lo).rem_euclid(len);
                // rem_euclid can round up to exactly `len`
                if w >= r.hi {
                    w = r.lo;
                }
                out[k] = w;
            } else if x[k] < r.lo || x[k] > r.hi {
                return Err(GeoError::Domain(format!(
                    "coordinate {k} = {} outside [{}, {}] in chart '{}'",
                    x[k], r.lo, r.hi, self.name
                )));
            }
        }
        Ok(out)
    }

    /// Signed shortest displacement `b - a`, choosing the nearest periodic image.
    pub fn delta(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut d = [b[0] - a[0], b[1] - a[1]];
        for (k, dk) in d.iter_mut().enumerate() {
            if let Some(len) = self.period(k) {
                *dk = wrap_signed(*dk, len);
            }
        }
        d
    }

    /// Euclidean chart distance respecting the periodic identifications.
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.delta(a, b);
        d[0].hypot(d[1])
    }
}

/// Maps `x` into `(-len/2, len/2]`.
pub fn wrap_signed(x: f64, len: f64) -> f64 {
    let half = 0.5 * len;
    let mut y = (x + half).rem_euclid(len) - half;
    if y <= -half {
        y += len;
    }
    y
}
