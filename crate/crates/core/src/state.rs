//! Points of the cotangent bundle and of the unit shell `H = 1/2`.

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::chart::SurfaceChart;
use crate::error::{GeoError, Result};
use crate::metric::MetricField;

/// Tolerance on `|2H - 1|` accepted when pinning a state to the unit shell.
pub const UNIT_SHELL_TOL: f64 = 1e-9;

/// A point `(x, p)` of `T*M` in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CotangentState {
    pub x: [f64; 2],
    pub p: Vector2<f64>,
}

impl CotangentState {
    pub fn new(x: [f64; 2], p: Vector2<f64>) -> Self {
        Self { x, p }
    }

    pub fn x_array(&self) -> [f64; 2] {
        self.x
    }

    /// Packs as `(u, v, p_u, p_v)`.
    pub fn to_vec4(&self) -> Vector4<f64> {
        Vector4::new(self.x[0], self.x[1], self.p[0], self.p[1])
    }

    pub fn from_vec4(z: &Vector4<f64>) -> Self {
        Self::new([z[0], z[1]], Vector2::new(z[2], z[3]))
    }
}

/// A cotangent state on the energy shell `H = 1/2` of a given metric.
///
/// The metric is not stored; `pin` checks the shell condition once.
/// States produced by the integrator are accepted as-is so that energy
/// drift stays visible to callers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitCotangentState(CotangentState);

impl UnitCotangentState {
    /// Pins `state` to the unit shell of `metric`, wrapping `x` into the chart.
    pub fn pin(metric: &MetricField, state: CotangentState) -> Result<Self> {
        Self::pin_with_tol(metric, state, UNIT_SHELL_TOL)
    }

    /// As [`UnitCotangentState::pin`] with a caller-chosen shell tolerance,
    /// for states that come out of the integrator.
    pub fn pin_with_tol(metric: &MetricField, state: CotangentState, tol: f64) -> Result<Self> {
        let x = metric.chart().wrap(state.x)?;
        let s = CotangentState::new(x, state.p);
        let h = metric.hamiltonian(&s)?;
        if !((2.0 * h - 1.0).abs() <= tol) {
            return Err(GeoError::Domain(format!(
                "state is off the unit shell: 2H - 1 = {:.3e}",
                2.0 * h - 1.0
            )));
        }
        Ok(Self(s))
    }

    pub(crate) fn unchecked(state: CotangentState) -> Self {
        Self(state)
    }

    pub fn state(&self) -> &CotangentState {
        &self.0
    }

    pub fn x(&self) -> [f64; 2] {
        self.0.x
    }

    pub fn p(&self) -> Vector2<f64> {
        self.0.p
    }

    pub fn to_vec4(&self) -> Vector4<f64> {
        self.0.to_vec4()
    }
}

/// `max(|x - x'|_chart, |p - p'|)`.
pub fn phase_distance(chart: &SurfaceChart, a: &CotangentState, b: &CotangentState) -> f64 {
    chart.distance(a.x, b.x).max((a.p - b.p).norm())
}

/// Same metric as [`phase_distance`] on packed `(u, v, p_u, p_v)` vectors.
pub fn phase_distance4(chart: &SurfaceChart, a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    let dx = chart.distance([a[0], a[1]], [b[0], b[1]]);
    let dp = (a[2] - b[2]).hypot(a[3] - b[3]);
    dx.max(dp)
}
