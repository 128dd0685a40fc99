//! Piecewise-linear time changes in `Rep(ε)`.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// `τ` given by values at increasing breakpoints, linear in between and
/// extended linearly with the end slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reparameterization {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub eps_bound: f64,
}

impl Reparameterization {
    /// Checks `τ(0) = 0` at a breakpoint and `|slope - 1| < eps_bound` on every piece.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, eps_bound: f64) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(GeoError::InvalidInput("need at least two breakpoints with values".into()));
        }
        if !(eps_bound > 0.0 && eps_bound < 1.0) {
            return Err(GeoError::InvalidInput(format!("ε bound must lie in (0, 1), got {eps_bound}")));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GeoError::InvalidInput("breakpoints must increase".into()));
        }
        match breakpoints.iter().position(|&b| b == 0.0) {
            Some(k) if values[k] == 0.0 => {}
            _ => return Err(GeoError::InvalidInput("τ(0) = 0 must hold at a breakpoint".into())),
        }
        let r = Self {
            breakpoints,
            values,
            eps_bound,
        };
        if let Some(s) = r.slopes().into_iter().find(|s| !((s - 1.0).abs() < eps_bound)) {
            return Err(GeoError::InvalidInput(format!("slope {s} outside Rep({eps_bound})")));
        }
        Ok(r)
    }

    pub fn identity(breakpoints: Vec<f64>, eps_bound: f64) -> Result<Self> {
        let values = breakpoints.clone();
        Self::new(breakpoints, values, eps_bound)
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(b, v)| (v[1] - v[0]) / (b[1] - b[0]))
            .collect()
    }

    /// Largest `|slope - 1|` over all pieces.
    pub fn max_deviation(&self) -> f64 {
        self.slopes().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (w, k) = interp_weights(&self.breakpoints, t);
        w[0] * self.values[k] + w[1] * self.values[k + 1]
    }
}

/// Weights `(w₀, w₁)` and left index `k` with `τ(t) = w₀ τ_k + w₁ τ_{k+1}`,
/// extrapolating with the end pieces.
pub(crate) fn interp_weights(knots: &[f64], t: f64) -> ([f64; 2], usize) {
    let n = knots.len();
    let k = knots.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
    let lam = (t - knots[k]) / (knots[k + 1] - knots[k]);
    ([1.0 - lam, lam], k)
}

/// Projects knot values onto the slope band `[1 - e, 1 + e]`, moving outward
/// from the knot at `zero` which is held at 0.
pub(crate) fn clamp_slopes(knots: &[f64], values: &mut [f64], zero: usize, e: f64) {
    values[zero] = 0.0;
    for k in zero + 1..knots.len() {
        let d = knots[k] - knots[k - 1];
        values[k] = values[k].clamp(values[k - 1] + (1.0 - e) * d, values[k - 1] + (1.0 + e) * d);
    }
    for k in (0..zero).rev() {
        let d = knots[k + 1] - knots[k];
        values[k] = values[k].clamp(values[k + 1] - (1.0 + e) * d, values[k + 1] - (1.0 - e) * d);
    }
}
